#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "visern/embedding.hpp"
#include "visern/matrix.hpp"
#include "visern/regions_io.hpp"
#include "visern/rw_gcn.hpp"
#include "visern/semantic_graph.hpp"

namespace visern {

struct ModelConfig {
  std::size_t feature_dim = 2048;  // d
  std::size_t common_dim = 2048;   // D
  std::size_t word_dim = 500;
  std::size_t vocab_size = 0;
  ReasoningConfig reasoning;
  LossConfig loss;
};

/// Every learnable matrix of the retrieval model.
struct ModelParams {
  EmbedParams embed;
  GcnParams gcn;
  VideoEncoderParams video;
  TextEncoderParams text;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
  static ModelParams zeros_like(const ModelParams& other);
  /// Zeros for every parameter except the text encoder, which stays empty.
  static ModelParams zeros_like_video(const ModelParams& other);

  /// Stable (name, matrix) listing used by the optimizer, checkpoints and
  /// gradient checks.
  std::vector<std::pair<std::string, Matrix*>> named();
  std::vector<std::pair<std::string, const Matrix*>> named() const;
};

/// Reasoned, pooled frame features of a video (one 1 x d row per frame).
std::vector<Matrix> frame_features(const VideoSample& video, const ModelParams& p,
                                   const ModelConfig& cfg);

Matrix embed_video(const VideoSample& video, const ModelParams& p, const ModelConfig& cfg);
Matrix embed_caption(const Caption& caption, const ModelParams& p);

/// Embeds every video / caption, one row each, in input order.
Matrix embed_videos(std::span<const VideoSample> videos, const ModelParams& p,
                    const ModelConfig& cfg);
Matrix embed_captions(std::span<const Caption> captions, const ModelParams& p);

/// Hard-negative triplet loss over a mini-batch of positive pairs
/// (videos[i], captions[i]). When `grads` is non-null it receives the
/// gradient of the loss with respect to every parameter (overwritten).
/// Per-video gradients are reduced in a fixed order independent of the
/// worker count.
double batch_loss(const ModelParams& p, const ModelConfig& cfg,
                  std::span<const VideoSample* const> videos,
                  std::span<const Caption* const> captions, ModelParams* grads = nullptr);

}  // namespace visern
