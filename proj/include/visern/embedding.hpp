#pragma once

#include <span>
#include <string>
#include <vector>

#include "visern/matrix.hpp"
#include "visern/regions_io.hpp"
#include "visern/rng.hpp"

namespace visern {

/// O = mean(frames) W_v + b_v.
struct VideoEncoderParams {
  Matrix w;  // d x D
  Matrix b;  // 1 x D

  static VideoEncoderParams random(std::size_t d, std::size_t common_dim, Rng& rng);
};

/// T = mean(E[token]) W_t + b_t. A one-hot row times E is a row lookup.
struct TextEncoderParams {
  Matrix embedding;  // vocab x word_dim
  Matrix w;          // word_dim x D
  Matrix b;          // 1 x D

  static TextEncoderParams random(std::size_t vocab, std::size_t word_dim, std::size_t common_dim,
                                  Rng& rng);
};

enum class Reduction { kSum, kMean };

const char* to_string(Reduction r);
Reduction parse_reduction(const std::string& name);

struct LossConfig {
  double margin = 0.2;
  Reduction reduction = Reduction::kSum;
};

Matrix encode_video(std::span<const Matrix> frame_features, const VideoEncoderParams& p);

struct VideoEncoderGrads {
  Matrix w;
  Matrix b;
  Matrix frame_feature;  // dL/d(each frame feature); identical for every frame
};

VideoEncoderGrads encode_video_backward(std::span<const Matrix> frame_features,
                                        const VideoEncoderParams& p, const Matrix& grad_out);

/// Throws VocabularyError naming the first out-of-range id.
Matrix encode_text(const Caption& c, const TextEncoderParams& p);

/// Accumulates dL/dE, dL/dW_t and dL/db_t for one caption into `grads`.
void encode_text_backward(const Caption& c, const TextEncoderParams& p, const Matrix& grad_out,
                          TextEncoderParams& grads);

/// S[i][j] = cosine(videos row i, texts row j).
Matrix similarity_matrix(const Matrix& videos, const Matrix& texts);

/// Gradients of sum_ij G_ij S_ij with respect to both embedding matrices.
struct SimilarityGrads {
  Matrix videos;
  Matrix texts;
};
SimilarityGrads similarity_backward(const Matrix& videos, const Matrix& texts,
                                    const Matrix& grad_s);

struct TripletLoss {
  double value = 0.0;
  Matrix grad;  // subgradient dL/dS
  /// Hardest negative video per text (column) and text per video (row);
  /// equal to the pair index when B = 1.
  std::vector<std::size_t> hardest_video;
  std::vector<std::size_t> hardest_text;
};

/// Hinge triplet loss with hardest in-batch negatives; diagonal entries are
/// the positives. Ties pick the lowest index.
TripletLoss triplet_loss_hard(const Matrix& s, const LossConfig& cfg);

}  // namespace visern
