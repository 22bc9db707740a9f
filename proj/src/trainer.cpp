#include "visern/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "visern/config.hpp"
#include "visern/error.hpp"
#include "visern/rng.hpp"

namespace visern {

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("lr must be > 0");
  if (!(cfg.lr_decay_factor > 0.0 && cfg.lr_decay_factor < 1.0))
    throw ConfigError("lr_decay_factor must lie in (0, 1)");
  if (cfg.plateau_patience < 1) throw ConfigError("plateau_patience must be >= 1");
  if (!(cfg.margin >= 0.0) || !std::isfinite(cfg.margin)) throw ConfigError("margin must be >= 0");
  if (!(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0))
    throw ConfigError("adam_beta1 must lie in [0, 1)");
  if (!(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0))
    throw ConfigError("adam_beta2 must lie in [0, 1)");
  if (!(cfg.adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (!(cfg.min_lr >= 0.0)) throw ConfigError("min_lr must be >= 0");
  if (cfg.word_dim < 1) throw ConfigError("word_dim must be >= 1");
  if (cfg.common_dim < 1) throw ConfigError("common_dim must be >= 1");
  parse_reasoning(cfg.reasoning, parse_adjacency_mode(cfg.adjacency));
  parse_reduction(cfg.reduction);
}

ModelConfig model_config(const TrainConfig& cfg, std::size_t feature_dim, std::size_t vocab_size) {
  ModelConfig m;
  m.feature_dim = feature_dim;
  m.common_dim = cfg.common_dim;
  m.word_dim = cfg.word_dim;
  m.vocab_size = vocab_size;
  m.reasoning = parse_reasoning(cfg.reasoning, parse_adjacency_mode(cfg.adjacency));
  m.loss = LossConfig{cfg.margin, parse_reduction(cfg.reduction)};
  return m;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, double lr) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  if (!(lr > 0.0)) throw ConfigError("adam_step: lr must be > 0");
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size())
    throw ShapeError("adam_step: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " parameters, got " +
                     std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.first_moment[i]))
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " is " +
                       params[i]->shape_string() + ", gradient " + grads[i]->shape_string() +
                       ", state " + state.first_moment[i].shape_string());
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->data();
    const auto& g = grads[i]->data();
    auto& m = state.first_moment[i].data();
    auto& v = state.second_moment[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double lr_schedule(std::span<const double> val_history, double lr, const TrainConfig& cfg) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t bad = 0;
  bool decay_now = false;
  for (double loss : val_history) {
    decay_now = false;
    if (loss < best) {
      best = loss;
      bad = 0;
    } else if (++bad >= cfg.plateau_patience) {
      decay_now = true;
      bad = 0;
    }
  }
  return decay_now ? lr * cfg.lr_decay_factor : lr;
}

namespace {

double reduction_weight(const ModelConfig& cfg, std::size_t batch) {
  return cfg.loss.reduction == Reduction::kMean ? static_cast<double>(batch) : 1.0;
}

struct BatchView {
  std::vector<const VideoSample*> videos;
  std::vector<const Caption*> captions;
};

BatchView make_batch(const Dataset& ds, std::span<const std::size_t> caption_ids) {
  BatchView b;
  for (auto c : caption_ids) {
    b.captions.push_back(&ds.captions[c]);
    b.videos.push_back(&ds.videos[ds.captions[c].video_index]);
  }
  return b;
}

}  // namespace

Dataset with_frames(const Dataset& ds, std::size_t frames) {
  if (frames == 0) return ds;
  Dataset out = ds;
  for (auto& v : out.videos) v = resample_video(v, frames);
  return out;
}

double dataset_loss(const ModelParams& p, const ModelConfig& cfg, const Dataset& ds,
                    std::size_t batch_size) {
  if (ds.captions.empty()) throw EmptyInputError("dataset_loss: no captions");
  std::vector<std::size_t> ids(ds.captions.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  double total = 0.0;
  for (std::size_t start = 0; start < ids.size(); start += batch_size) {
    const std::size_t end = std::min(ids.size(), start + batch_size);
    const BatchView b = make_batch(ds, std::span(ids).subspan(start, end - start));
    total += batch_loss(p, cfg, b.videos, b.captions) * reduction_weight(cfg, end - start);
  }
  return total / static_cast<double>(ids.size());
}

Checkpoint initial_checkpoint(const TrainConfig& cfg, std::size_t feature_dim,
                              std::size_t vocab_size) {
  validate(cfg);
  Checkpoint ck;
  ck.config = cfg;
  ck.model = model_config(cfg, feature_dim, vocab_size);
  ck.params = ModelParams::init(ck.model, cfg.seed);
  ck.optimizer.beta1 = cfg.adam_beta1;
  ck.optimizer.beta2 = cfg.adam_beta2;
  ck.optimizer.eps = cfg.adam_eps;
  ck.lr = cfg.lr;
  ck.best_val_loss = std::numeric_limits<double>::infinity();
  return ck;
}

TrainResult train(const Dataset& train_in, const Dataset& val_in, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  validate(cfg);
  if (train_in.videos.empty() || train_in.captions.empty())
    throw ConfigError("train: training split is empty");
  if (val_in.videos.empty() || val_in.captions.empty())
    throw ConfigError("train: validation split is empty");
  validate(train_in);
  validate(val_in);
  const Dataset train_set = with_frames(train_in, cfg.frames);
  const Dataset val_set = with_frames(val_in, cfg.frames);
  if (val_set.videos.front().feature_dim() != train_set.videos.front().feature_dim())
    throw ShapeError("train: train and validation feature dimensions differ");
  if (val_set.vocab_size > train_set.vocab_size)
    throw VocabularyError("train: validation vocabulary exceeds training vocabulary");

  TrainResult result;
  Checkpoint ck = initial_checkpoint(cfg, train_set.videos.front().feature_dim(),
                                     train_set.vocab_size);

  EpochLog initial;
  initial.epoch = 0;
  initial.train_loss = dataset_loss(ck.params, ck.model, train_set, cfg.batch_size);
  initial.val_loss = dataset_loss(ck.params, ck.model, val_set, cfg.batch_size);
  initial.lr = ck.lr;
  result.curve.push_back(initial);
  if (on_epoch) on_epoch(initial);
  ck.best_val_loss = initial.val_loss;
  result.best = ck;

  std::vector<std::size_t> order(train_set.captions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(cfg.seed, "shuffle");
  std::vector<double> val_history;

  auto params = ck.params.named();
  std::vector<Matrix*> param_ptrs;
  for (auto& [name, m] : params) param_ptrs.push_back(m);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const BatchView b = make_batch(train_set, std::span(order).subspan(start, end - start));
      ModelParams grads;
      const double loss = batch_loss(ck.params, ck.model, b.videos, b.captions, &grads);
      if (!std::isfinite(loss)) throw EvaluationError("train: non-finite loss at epoch " +
                                                      std::to_string(epoch));
      total += loss * reduction_weight(ck.model, end - start);
      std::vector<const Matrix*> grad_ptrs;
      for (auto& [name, m] : grads.named()) grad_ptrs.push_back(m);
      adam_step(param_ptrs, grad_ptrs, ck.optimizer, ck.lr);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = total / static_cast<double>(order.size());
    log.val_loss = dataset_loss(ck.params, ck.model, val_set, cfg.batch_size);
    log.lr = ck.lr;
    result.curve.push_back(log);
    if (on_epoch) on_epoch(log);

    val_history.push_back(log.val_loss);
    ck.epoch = epoch;
    ck.lr = lr_schedule(val_history, ck.lr, cfg);
    if (log.val_loss < ck.best_val_loss) {
      ck.best_val_loss = log.val_loss;
      result.best = ck;
    }
    if (ck.lr < cfg.min_lr) break;
  }
  result.best.best_val_loss = ck.best_val_loss;
  result.last = std::move(ck);
  return result;
}

void write_training_log(const std::string& path, std::span<const EpochLog> curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : curve) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss)
        << ',' << format_double(e.lr) << '\n';
  }
  if (!out) throw IoError("short write to " + path);
}

GradReport gradcheck_all(std::uint64_t seed, const GradcheckOptions& options) {
  constexpr std::size_t kRegions = 4;
  constexpr std::size_t kFeatureDim = 6;
  constexpr std::size_t kCommonDim = 8;
  constexpr std::size_t kVocab = 10;
  constexpr std::size_t kBatch = 3;
  constexpr std::size_t kWordDim = 5;
  constexpr std::size_t kFrames = 2;
  constexpr std::size_t kCaptionLength = 3;

  ModelConfig mc;
  mc.feature_dim = kFeatureDim;
  mc.common_dim = kCommonDim;
  mc.word_dim = kWordDim;
  mc.vocab_size = kVocab;
  mc.reasoning = options.reasoning;
  mc.loss = LossConfig{0.2, Reduction::kSum};

  ModelParams p = ModelParams::init(mc, seed);
  Rng rng(seed, "gradcheck");
  for (Matrix* b : {&p.embed.b_phi, &p.embed.b_theta, &p.video.b, &p.text.b})
    for (auto& v : b->data()) v = rng.uniform(-0.5, 0.5);

  std::vector<VideoSample> videos(kBatch);
  std::vector<Caption> captions(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) {
    videos[i].video_id = std::to_string(i);
    for (std::size_t f = 0; f < kFrames; ++f)
      videos[i].frames.push_back(RegionSet{rng.normal_matrix(kRegions, kFeatureDim), f});
    captions[i].video_index = i;
    for (std::size_t k = 0; k < kCaptionLength; ++k) captions[i].token_ids.push_back(rng.below(kVocab));
  }
  std::vector<const VideoSample*> vptr;
  std::vector<const Caption*> cptr;
  for (std::size_t i = 0; i < kBatch; ++i) {
    vptr.push_back(&videos[i]);
    cptr.push_back(&captions[i]);
  }

  ModelParams grads;
  batch_loss(p, mc, vptr, cptr, &grads);
  if (options.corrupt_analytic) grads.gcn.w_g(0, 0) += 1.0;

  auto live = p.named();
  auto analytic = grads.named();
  std::vector<GradCheckParam> checks;
  for (std::size_t i = 0; i < live.size(); ++i)
    checks.push_back(GradCheckParam{live[i].first, live[i].second, analytic[i].second});

  auto loss = [&] { return batch_loss(p, mc, vptr, cptr); };
  try {
    return finite_diff_grad(loss, checks, options.step, options.tolerance);
  } catch (const Error& e) {
    GradReport failed;
    failed.tolerance = options.tolerance;
    failed.max_rel_error = std::numeric_limits<double>::infinity();
    failed.passed = false;
    failed.per_parameter_errors.emplace_back(std::string("error: ") + e.what(),
                                             failed.max_rel_error);
    return failed;
  }
}

}  // namespace visern
