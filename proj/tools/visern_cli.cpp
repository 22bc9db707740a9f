// visern: synthesis, training, evaluation, gradient checks, ablation and
// attention export for the region-graph retrieval model.
//
// Exit codes: 0 ok, 2 usage/config, 3 I/O, 4 bad input file or data,
// 5 numeric failure (including a failed gradient check).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "visern/checkpoint.hpp"
#include "visern/config.hpp"
#include "visern/error.hpp"
#include "visern/regions_io.hpp"
#include "visern/retrieval.hpp"
#include "visern/semantic_graph.hpp"
#include "visern/trainer.hpp"

namespace fs = std::filesystem;
using namespace visern;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitFormat = 4;
constexpr int kExitNumeric = 5;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kExitUsage;
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kFormat:
    case ErrorKind::kLength:
    case ErrorKind::kData:
    case ErrorKind::kVocabulary:
    case ErrorKind::kShape:
    case ErrorKind::kEmptyInput:
      return kExitFormat;
    case ErrorKind::kDegenerateInput:
    case ErrorKind::kEvaluation:
    case ErrorKind::kSingularDegree:
    case ErrorKind::kSymmetry:
    case ErrorKind::kState:
      return kExitNumeric;
  }
  return kExitNumeric;
}

// Training options shared by `train` and `ablate`. Flags are kept as text
// and fed through the same parser as the config file so range checks apply
// once.
struct TrainFlags {
  std::string config_path;
  std::vector<std::string> set;
  std::string batch_size, epochs, lr, seed, reasoning, adjacency, margin, frames, common_dim,
      word_dim, reduction;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", set, "extra key=value override (repeatable)");
    cmd->add_option("--batch-size", batch_size, "mini-batch size");
    cmd->add_option("--epochs", epochs, "maximum epochs");
    cmd->add_option("--lr", lr, "initial learning rate");
    cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--reasoning", reasoning, "none | raw | row | sym | rw");
    cmd->add_option("--adjacency", adjacency, "dot | softplus");
    cmd->add_option("--margin", margin, "triplet margin");
    cmd->add_option("--reduction", reduction, "sum | mean");
    cmd->add_option("--frames", frames, "frames per video (0 = as stored)");
    cmd->add_option("--common-dim", common_dim, "joint embedding size");
    cmd->add_option("--word-dim", word_dim, "word embedding size");
  }

  TrainConfig resolve() const {
    KeyValues kv;
    if (!config_path.empty()) kv = load_key_values(config_path);
    const std::pair<const char*, const std::string*> flags[] = {
        {"batch_size", &batch_size}, {"max_epochs", &epochs},   {"lr", &lr},
        {"seed", &seed},             {"reasoning", &reasoning}, {"adjacency", &adjacency},
        {"margin", &margin},         {"frames", &frames},       {"common_dim", &common_dim},
        {"word_dim", &word_dim},     {"reduction", &reduction}};
    for (const auto& [key, value] : flags)
      if (!value->empty()) kv.emplace_back(key, *value);
    for (const auto& s : set) {
      const auto parsed = parse_key_values(s);
      kv.insert(kv.end(), parsed.begin(), parsed.end());
    }
    TrainConfig cfg;
    apply_config(cfg, kv);
    return cfg;
  }
};

void print_reports(std::span<const RetrievalReport> reports) { std::cout << reports_csv(reports); }

int cmd_synth(const SynthConfig& base, const std::vector<std::string>& splits,
              const std::string& out) {
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto vocab = synth_vocab(base.vocab_size, base.topics);
  for (const auto& name : splits) {
    SynthConfig cfg = base;
    cfg.split = parse_split(name);
    const Dataset ds = synth_dataset(cfg);
    write_dataset(dir, ds, vocab);
    std::printf("wrote %s: %zu videos, %zu captions\n", name.c_str(), ds.videos.size(),
                ds.captions.size());
  }
  return kExitOk;
}

int cmd_train(const TrainConfig& cfg, const std::string& data, const std::string& val_split,
              const std::string& out) {
  const Dataset train_set = load_dataset(data, Split::kTrain);
  const Dataset val_set = load_dataset(data, parse_split(val_split));
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const TrainResult result = train(train_set, val_set, cfg, [](const EpochLog& e) {
    std::printf("epoch %zu train_loss %.6f val_loss %.6f lr %.3g\n", e.epoch, e.train_loss,
                e.val_loss, e.lr);
    std::fflush(stdout);
  });
  save_checkpoint(dir / "checkpoint.vsck", result.last);
  save_checkpoint(dir / "best.vsck", result.best);
  write_training_log((dir / "train_log.csv").string(), result.curve);
  std::ofstream cfg_out(dir / "config.txt");
  cfg_out << dump_key_values(to_key_values(cfg));
  if (!cfg_out) throw IoError("cannot write " + (dir / "config.txt").string());
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& split,
             const std::string& out) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset ds = load_dataset(data, parse_split(split));
  const Evaluation e = evaluate(ck, ds);
  const RetrievalReport reports[] = {e.text_to_video, e.video_to_text};
  print_reports(reports);
  if (!out.empty()) write_reports_csv(out, reports);
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t seeds, const std::string& reasoning,
                  const std::string& adjacency) {
  GradcheckOptions opt;
  opt.reasoning = parse_reasoning(reasoning, parse_adjacency_mode(adjacency));
  bool ok = true;
  double worst = 0.0;
  for (std::size_t i = 0; i < seeds; ++i) {
    const GradReport r = gradcheck_all(seed + i, opt);
    std::printf("seed %llu max_rel_error %.3e %s\n", static_cast<unsigned long long>(seed + i),
                r.max_rel_error, r.passed ? "ok" : "FAIL");
    if (!r.passed)
      for (const auto& [name, err] : r.per_parameter_errors)
        std::printf("  %-16s %.3e\n", name.c_str(), err);
    worst = std::max(worst, r.max_rel_error);
    ok = ok && r.passed;
  }
  std::printf("max_rel_error %.3e tolerance %.1e\n", worst, opt.tolerance);
  return ok ? kExitOk : kExitNumeric;
}

int cmd_attn(const std::string& checkpoint, const std::string& data, const std::string& split,
             const std::string& out, const std::string& dump_graph) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset ds = load_dataset(data, parse_split(split));
  const auto rows = attention_rows(ck, ds);
  write_attention_csv(out, rows);
  std::printf("wrote %zu attention rows to %s\n", rows.size(), out.c_str());
  if (!dump_graph.empty()) {
    const fs::path dir(dump_graph);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const Matrix& v = ds.videos.front().frames.front().features;
    const SemanticGraph g = build_adjacency(v, ck.params.embed, ck.model.reasoning.adjacency);
    write_matrix_csv(dir / "adjacency.csv", g.adjacency);
    write_matrix_csv(dir / "propagation.csv", normalize(g, ck.model.reasoning.normalization));
    std::printf("wrote graph of %s frame %zu to %s\n", ds.videos.front().video_id.c_str(),
                ds.videos.front().frames.front().frame_index, dir.c_str());
  }
  return kExitOk;
}

int cmd_ablate(const TrainConfig& base, const std::string& data, const std::string& val_split,
               const std::string& split, const std::string& out) {
  const Dataset train_set = load_dataset(data, Split::kTrain);
  const Dataset val_set = load_dataset(data, parse_split(val_split));
  const Dataset test_set = load_dataset(data, parse_split(split));
  std::string table = "kind,r1,r5,r10,medr,meanr,sumr\n";
  for (const char* kind : {"none", "row", "sym", "rw"}) {
    TrainConfig cfg = base;
    cfg.reasoning = kind;
    const TrainResult result = train(train_set, val_set, cfg);
    const RetrievalReport r = evaluate(result.last, test_set).text_to_video;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", kind, r.r1, r.r5,
                  r.r10, r.med_r, r.mean_r, r.sum_of_recalls);
    table += buf;
  }
  std::cout << table;
  if (!out.empty()) {
    std::ofstream f(out);
    f << table;
    if (!f) throw IoError("cannot write " + out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visern: region-graph reasoning for video/text retrieval"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // synth
  SynthConfig synth;
  std::vector<std::string> synth_splits{"train", "val", "test"};
  std::string synth_out;
  auto* s = app.add_subcommand("synth", "Write a synthetic planted-topic dataset");
  s->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  s->add_option("--pairs", synth.num_pairs, "video/caption pairs per split")
      ->capture_default_str();
  s->add_option("--n", synth.regions, "regions per frame")->capture_default_str();
  s->add_option("--d", synth.feature_dim, "region feature size")->capture_default_str();
  s->add_option("--vocab", synth.vocab_size, "vocabulary size")->capture_default_str();
  s->add_option("--noise", synth.noise_scale, "region noise scale")->capture_default_str();
  s->add_option("--frames", synth.frames, "frames per video")->capture_default_str();
  s->add_option("--topics", synth.topics, "latent topics")->capture_default_str();
  s->add_option("--caption-length", synth.caption_length, "tokens per caption")
      ->capture_default_str();
  s->add_option("--split", synth_splits, "train | val | test (repeatable)")
      ->capture_default_str();
  s->add_option("--out", synth_out, "output directory")->required();

  // train
  TrainFlags train_flags;
  std::string train_data, train_out, train_val = "val";
  auto* t = app.add_subcommand("train", "Train and write checkpoints plus a loss log");
  train_flags.add(t);
  t->add_option("--data", train_data, "dataset directory")->required();
  t->add_option("--val-split", train_val, "split driving the lr schedule")
      ->capture_default_str();
  t->add_option("--out", train_out, "output directory")->required();

  // eval
  std::string eval_ck, eval_data, eval_split = "test", eval_out;
  auto* e = app.add_subcommand("eval", "Retrieval metrics in both directions");
  e->add_option("--checkpoint", eval_ck, "checkpoint file")->required();
  e->add_option("--data", eval_data, "dataset directory")->required();
  e->add_option("--split", eval_split, "split to evaluate")->capture_default_str();
  e->add_option("--out", eval_out, "also write the report CSV here");

  // gradcheck
  std::uint64_t gc_seed = 7;
  std::size_t gc_seeds = 1;
  std::string gc_reasoning = "rw", gc_adjacency = "dot";
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  g->add_option("--seed", gc_seed, "first seed")->capture_default_str();
  g->add_option("--seeds", gc_seeds, "number of consecutive seeds")->capture_default_str();
  g->add_option("--reasoning", gc_reasoning, "none | raw | row | sym | rw")
      ->capture_default_str();
  g->add_option("--adjacency", gc_adjacency, "dot | softplus")->capture_default_str();

  // attn
  std::string at_ck, at_data, at_split = "test", at_out, at_dump;
  auto* a = app.add_subcommand("attn", "Export per-region attention scores");
  a->add_option("--checkpoint", at_ck, "checkpoint file")->required();
  a->add_option("--data", at_data, "dataset directory")->required();
  a->add_option("--split", at_split, "split to score")->capture_default_str();
  a->add_option("--out", at_out, "attention CSV path")->required();
  a->add_option("--dump-graph", at_dump,
                "also write adjacency.csv and propagation.csv of the first frame here");

  // ablate
  TrainFlags ab_flags;
  std::string ab_data, ab_val = "val", ab_split = "test", ab_out;
  auto* b = app.add_subcommand("ablate", "Train and evaluate each reasoning kind");
  ab_flags.add(b);
  b->add_option("--data", ab_data, "dataset directory")->required();
  b->add_option("--val-split", ab_val, "split driving the lr schedule")->capture_default_str();
  b->add_option("--split", ab_split, "split to evaluate")->capture_default_str();
  b->add_option("--out", ab_out, "also write the table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth, synth_splits, synth_out);
    if (*t) return cmd_train(train_flags.resolve(), train_data, train_val, train_out);
    if (*e) return cmd_eval(eval_ck, eval_data, eval_split, eval_out);
    if (*g) return cmd_gradcheck(gc_seed, gc_seeds, gc_reasoning, gc_adjacency);
    if (*a) return cmd_attn(at_ck, at_data, at_split, at_out, at_dump);
    if (*b) return cmd_ablate(ab_flags.resolve(), ab_data, ab_val, ab_split, ab_out);
  } catch (const Error& err) {
    std::fprintf(stderr, "visern: %s: %s\n", to_string(err.kind()), err.what());
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "visern: %s\n", err.what());
    return kExitNumeric;
  }
  return kExitUsage;
}
