#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "visern/gradcheck.hpp"
#include "visern/model.hpp"
#include "visern/regions_io.hpp"

namespace visern {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 50;
  double lr = 1e-4;
  double lr_decay_factor = 0.5;
  std::size_t plateau_patience = 3;
  double margin = 0.2;
  std::uint64_t seed = 7;
  /// none (no reasoning), raw, row, sym or rw.
  std::string reasoning = "rw";
  std::string adjacency = "dot";
  std::string reduction = "sum";
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double min_lr = 1e-8;
  std::size_t word_dim = 500;
  std::size_t common_dim = 2048;
  /// Frames per video fed to the model; 0 keeps what the data provides.
  std::size_t frames = 0;
};

/// Throws ConfigError on the first out-of-range field.
void validate(const TrainConfig& cfg);

/// Model configuration implied by a training config and the data shape.
ModelConfig model_config(const TrainConfig& cfg, std::size_t feature_dim, std::size_t vocab_size);

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. Moment buffers are created on the first
/// call; afterwards every shape must match.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads,
               AdamState& state, double lr);

/// Replays a plateau scheduler over the validation history: an epoch that
/// fails to set a new best loss counts as bad, and `patience` consecutive
/// bad epochs trigger a decay and reset the count. Returns
/// lr * decay_factor when the decay fires on the last epoch, lr otherwise.
double lr_schedule(std::span<const double> val_history, double lr, const TrainConfig& cfg);

struct Checkpoint {
  TrainConfig config;
  ModelConfig model;
  ModelParams params;
  AdamState optimizer;
  std::size_t epoch = 0;
  double lr = 0.0;
  double best_val_loss = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Checkpoint last;
  Checkpoint best;  // parameters at the lowest validation loss
  std::vector<EpochLog> curve;  // entry 0 is the untrained model
};

/// Copy of `ds` with every video resampled to `frames` frames (0 = as is).
Dataset with_frames(const Dataset& ds, std::size_t frames);

/// Mean per-pair loss over a dataset, in fixed batch order.
double dataset_loss(const ModelParams& p, const ModelConfig& cfg, const Dataset& ds,
                    std::size_t batch_size);

/// Fresh checkpoint with initialised parameters for the given data shape.
Checkpoint initial_checkpoint(const TrainConfig& cfg, std::size_t feature_dim,
                              std::size_t vocab_size);

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Training log CSV: `epoch,train_loss,val_loss,lr`.
void write_training_log(const std::string& path, std::span<const EpochLog> curve);

struct GradcheckOptions {
  ReasoningConfig reasoning;
  double step = kDefaultFiniteDiffStep;
  double tolerance = kDefaultGradTolerance;
  /// Negative control: perturbs one analytic gradient entry before comparing.
  bool corrupt_analytic = false;
};

/// Builds a small random instance (n=4, d=6, D=8, vocab=10, B=3) and checks
/// the gradient of the full batch loss for every learnable parameter.
GradReport gradcheck_all(std::uint64_t seed, const GradcheckOptions& options = {});

}  // namespace visern
