#include "visern/model.hpp"

#include <algorithm>

#include "visern/error.hpp"
#include "visern/parallel.hpp"
#include "visern/rng.hpp"

namespace visern {

namespace {

constexpr std::size_t kGradientShards = 8;

// Gradients of the video branch for a contiguous run of batch items.
struct VideoBranchGrads {
  EmbedParams embed;
  GcnParams gcn;
  VideoEncoderParams video;

  explicit VideoBranchGrads(const ModelParams& p) {
    const ModelParams z = ModelParams::zeros_like_video(p);
    embed = z.embed;
    gcn = z.gcn;
    video = z.video;
  }

  void add(const GcnGrads& g) {
    embed.w_phi += g.w_phi;
    embed.b_phi += g.b_phi;
    embed.w_theta += g.w_theta;
    embed.b_theta += g.b_theta;
    gcn.w_g += g.w_g;
    gcn.w_r += g.w_r;
  }

  void add_to(ModelParams& out) const {
    out.embed.w_phi += embed.w_phi;
    out.embed.b_phi += embed.b_phi;
    out.embed.w_theta += embed.w_theta;
    out.embed.b_theta += embed.b_theta;
    out.gcn.w_g += gcn.w_g;
    out.gcn.w_r += gcn.w_r;
    out.video.w += video.w;
    out.video.b += video.b;
  }
};

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.feature_dim == 0 || cfg.common_dim == 0 || cfg.word_dim == 0 || cfg.vocab_size == 0)
    throw ConfigError("model dimensions must all be >= 1");
  Rng root(seed, "init");
  Rng embed_rng = root.fork("embed");
  Rng gcn_rng = root.fork("gcn");
  Rng video_rng = root.fork("video");
  Rng text_rng = root.fork("text");
  return ModelParams{EmbedParams::random(cfg.feature_dim, embed_rng),
                     GcnParams::random(cfg.feature_dim, gcn_rng),
                     VideoEncoderParams::random(cfg.feature_dim, cfg.common_dim, video_rng),
                     TextEncoderParams::random(cfg.vocab_size, cfg.word_dim, cfg.common_dim,
                                               text_rng)};
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams z;
  auto dst = z.named();
  const auto src = other.named();
  for (std::size_t i = 0; i < dst.size(); ++i)
    *dst[i].second = Matrix(src[i].second->rows(), src[i].second->cols());
  return z;
}

ModelParams ModelParams::zeros_like_video(const ModelParams& other) {
  ModelParams z;
  auto dst = z.named();
  const auto src = other.named();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].first.starts_with("text.")) continue;
    *dst[i].second = Matrix(src[i].second->rows(), src[i].second->cols());
  }
  return z;
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::named() {
  return {{"embed.w_phi", &embed.w_phi},   {"embed.b_phi", &embed.b_phi},
          {"embed.w_theta", &embed.w_theta}, {"embed.b_theta", &embed.b_theta},
          {"gcn.w_g", &gcn.w_g},           {"gcn.w_r", &gcn.w_r},
          {"video.w", &video.w},           {"video.b", &video.b},
          {"text.embedding", &text.embedding}, {"text.w", &text.w},
          {"text.b", &text.b}};
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<ModelParams*>(this)->named()) out.emplace_back(name, m);
  return out;
}

std::vector<Matrix> frame_features(const VideoSample& video, const ModelParams& p,
                                   const ModelConfig& cfg) {
  std::vector<Matrix> feats;
  feats.reserve(video.frames.size());
  for (const auto& f : video.frames)
    feats.push_back(rw_gcn_forward(f.features, p.embed, p.gcn, cfg.reasoning).frame_feature);
  return feats;
}

Matrix embed_video(const VideoSample& video, const ModelParams& p, const ModelConfig& cfg) {
  const auto feats = frame_features(video, p, cfg);
  return encode_video(feats, p.video);
}

Matrix embed_caption(const Caption& caption, const ModelParams& p) {
  return encode_text(caption, p.text);
}

Matrix embed_videos(std::span<const VideoSample> videos, const ModelParams& p,
                    const ModelConfig& cfg) {
  Matrix out(videos.size(), p.video.w.cols());
  parallel_for(videos.size(), [&](std::size_t i) {
    const Matrix o = embed_video(videos[i], p, cfg);
    std::copy(o.data().begin(), o.data().end(), out.row(i).begin());
  });
  return out;
}

Matrix embed_captions(std::span<const Caption> captions, const ModelParams& p) {
  Matrix out(captions.size(), p.text.w.cols());
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const Matrix t = embed_caption(captions[i], p);
    std::copy(t.data().begin(), t.data().end(), out.row(i).begin());
  }
  return out;
}

double batch_loss(const ModelParams& p, const ModelConfig& cfg,
                  std::span<const VideoSample* const> videos,
                  std::span<const Caption* const> captions, ModelParams* grads) {
  if (videos.size() != captions.size())
    throw ShapeError("batch_loss: " + std::to_string(videos.size()) + " videos but " +
                     std::to_string(captions.size()) + " captions");
  if (videos.empty()) throw EmptyInputError("batch_loss: empty batch");
  const std::size_t b = videos.size();
  const std::size_t common = p.video.w.cols();

  Matrix video_emb(b, common);
  Matrix text_emb(b, common);
  std::vector<Matrix> pooled(b);
  parallel_for(b, [&](std::size_t i) {
    const auto feats = frame_features(*videos[i], p, cfg);
    pooled[i] = pool_frames(feats);
    Matrix o = matmul(pooled[i], p.video.w);
    o += p.video.b;
    std::copy(o.data().begin(), o.data().end(), video_emb.row(i).begin());
  });
  for (std::size_t i = 0; i < b; ++i) {
    const Matrix t = encode_text(*captions[i], p.text);
    std::copy(t.data().begin(), t.data().end(), text_emb.row(i).begin());
  }

  const Matrix s = similarity_matrix(video_emb, text_emb);
  const TripletLoss loss = triplet_loss_hard(s, cfg.loss);
  if (!grads) return loss.value;

  const SimilarityGrads sg = similarity_backward(video_emb, text_emb, loss.grad);
  *grads = ModelParams::zeros_like(p);
  for (std::size_t i = 0; i < b; ++i) {
    encode_text_backward(*captions[i], p.text, Matrix::row_vector(sg.texts.row(i)), grads->text);
  }

  const std::size_t shards = std::min(kGradientShards, b);
  std::vector<VideoBranchGrads> shard_grads(shards, VideoBranchGrads(p));
  parallel_for(shards, [&](std::size_t sidx) {
    VideoBranchGrads& acc = shard_grads[sidx];
    const std::size_t begin = sidx * b / shards;
    const std::size_t end = (sidx + 1) * b / shards;
    for (std::size_t i = begin; i < end; ++i) {
      const Matrix grad_o = Matrix::row_vector(sg.videos.row(i));
      acc.video.w += matmul_tn(pooled[i], grad_o);
      acc.video.b += grad_o;
      const VideoSample& video = *videos[i];
      Matrix grad_frame = matmul_nt(grad_o, p.video.w);
      grad_frame *= 1.0 / static_cast<double>(video.frames.size());
      for (const auto& frame : video.frames) {
        GcnCache cache;
        rw_gcn_forward(frame.features, p.embed, p.gcn, cfg.reasoning, &cache);
        const std::size_t n = frame.features.rows();
        Matrix grad_z(n, frame.features.cols());
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t k = 0; k < grad_z.cols(); ++k)
            grad_z(r, k) = grad_frame(0, k) / static_cast<double>(n);
        acc.add(rw_gcn_backward(grad_z, cache, p.embed, p.gcn));
      }
    }
  });
  for (const auto& shard : shard_grads) shard.add_to(*grads);
  return loss.value;
}

}  // namespace visern
