#pragma once

#include <span>
#include <vector>

#include "visern/matrix.hpp"
#include "visern/rng.hpp"
#include "visern/semantic_graph.hpp"

namespace visern {

/// Weights of the residual graph convolution Z = (N V W_g) W_r + V.
struct GcnParams {
  Matrix w_g;
  Matrix w_r;

  /// Uniform in +-1/sqrt(d).
  static GcnParams random(std::size_t d, Rng& rng);
};

/// How a frame's regions are reasoned over. `reasoning = false` skips the
/// layer entirely (Z = V), the no-reasoning ablation.
struct ReasoningConfig {
  Normalization normalization = Normalization::kRandomWalk;
  AdjacencyMode adjacency = AdjacencyMode::kDotProduct;
  bool reasoning = true;
};

/// Ablation label: "none" for the bypass, otherwise the normalization name.
const char* reasoning_label(const ReasoningConfig& cfg);
/// Accepts none (bypass), raw (unnormalised adjacency), row, sym, rw.
ReasoningConfig parse_reasoning(const std::string& name, AdjacencyMode adjacency);

struct ReasonedRegions {
  Matrix z;              // n x d
  Matrix frame_feature;  // 1 x d, column means of z
};

/// Intermediates recorded by the forward pass and consumed by backward.
struct GcnCache {
  bool valid = false;
  ReasoningConfig config;
  Matrix regions;       // V
  Matrix phi;           // V W_phi^T + b_phi
  Matrix theta;         // V W_theta^T + b_theta
  Matrix pre_adjacency; // M + M^T before the optional softplus
  Matrix adjacency;     // R
  std::vector<double> scale;  // stabilised degree, or absolute row sum for kRow
  Matrix propagation;   // N = normalize(R)
  Matrix aggregated;    // N V
  Matrix hidden;        // N V W_g
};

ReasonedRegions rw_gcn_forward(const Matrix& regions, const EmbedParams& p, const GcnParams& q,
                               const ReasoningConfig& cfg, GcnCache* cache = nullptr);

struct GcnGrads {
  Matrix regions;
  Matrix w_g;
  Matrix w_r;
  Matrix w_phi;
  Matrix b_phi;
  Matrix w_theta;
  Matrix b_theta;

  static GcnGrads zeros(std::size_t n, std::size_t d);
};

/// Reverse-mode pass for an upstream gradient dL/dZ (n x d). The degree is
/// differentiated as a function of R. Throws StateError if `cache` was not
/// filled by a forward pass.
GcnGrads rw_gcn_backward(const Matrix& grad_z, const GcnCache& cache, const EmbedParams& p,
                         const GcnParams& q);

/// Mean of per-frame features (each 1 x d).
Matrix pool_frames(std::span<const Matrix> frame_features);

}  // namespace visern
