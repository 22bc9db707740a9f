#include "visern/rw_gcn.hpp"

#include <cmath>

#include "visern/error.hpp"

namespace visern {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// dL/dR from dL/dN for N = normalize(R).
Matrix normalization_backward(const Matrix& grad_n, const GcnCache& c) {
  const std::size_t n = c.adjacency.rows();
  const Matrix& r = c.adjacency;
  const Matrix& prop = c.propagation;
  Matrix grad_r(n, n);
  switch (c.config.normalization) {
    case Normalization::kNone:
      grad_r = grad_n;
      break;
    case Normalization::kRandomWalk:
      // N_ij = R_ij / D_i with D_i = sum_j R_ij.
      for (std::size_t i = 0; i < n; ++i) {
        const double coupled = dot(grad_n.row(i), prop.row(i));
        for (std::size_t j = 0; j < n; ++j)
          grad_r(i, j) = (grad_n(i, j) - coupled) / c.scale[i];
      }
      break;
    case Normalization::kSymmetric: {
      // N_ij = s_i R_ij s_j with s_i = |D_i|^-1/2, so ds_i/dD_i = -s_i / (2 D_i).
      std::vector<double> s(n);
      for (std::size_t i = 0; i < n; ++i) s[i] = 1.0 / std::sqrt(std::abs(c.scale[i]));
      std::vector<double> grad_deg(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double grad_s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          grad_s += grad_n(i, j) * r(i, j) * s[j] + grad_n(j, i) * r(j, i) * s[j];
        grad_deg[i] = grad_s * (-0.5) * s[i] / c.scale[i];
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          grad_r(i, j) = grad_n(i, j) * s[i] * s[j] + grad_deg[i];
      break;
    }
    case Normalization::kRow:
      // N_ij = R_ij / A_i with A_i = sum_j |R_ij|.
      for (std::size_t i = 0; i < n; ++i) {
        const double coupled = dot(grad_n.row(i), r.row(i)) / (c.scale[i] * c.scale[i]);
        for (std::size_t j = 0; j < n; ++j)
          grad_r(i, j) = grad_n(i, j) / c.scale[i] - sign_of(r(i, j)) * coupled;
      }
      break;
  }
  return grad_r;
}

}  // namespace

GcnParams GcnParams::random(std::size_t d, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  return GcnParams{rng.uniform_matrix(d, d, -bound, bound), rng.uniform_matrix(d, d, -bound, bound)};
}

const char* reasoning_label(const ReasoningConfig& cfg) {
  if (!cfg.reasoning) return "none";
  if (cfg.normalization == Normalization::kNone) return "raw";
  return to_string(cfg.normalization);
}

ReasoningConfig parse_reasoning(const std::string& name, AdjacencyMode adjacency) {
  ReasoningConfig cfg;
  cfg.adjacency = adjacency;
  if (name == "none") {
    cfg.reasoning = false;
    cfg.normalization = Normalization::kNone;
  } else if (name == "raw") {
    cfg.normalization = Normalization::kNone;
  } else {
    cfg.normalization = parse_normalization(name);
  }
  return cfg;
}

ReasonedRegions rw_gcn_forward(const Matrix& regions, const EmbedParams& p, const GcnParams& q,
                               const ReasoningConfig& cfg, GcnCache* cache) {
  if (regions.rows() == 0) throw EmptyInputError("rw_gcn_forward: frame has no regions");
  const std::size_t d = regions.cols();
  if (q.w_g.rows() != d || q.w_g.cols() != d || q.w_r.rows() != d || q.w_r.cols() != d) {
    throw ShapeError("rw_gcn_forward: regions are " + regions.shape_string() +
                     " but W_g is " + q.w_g.shape_string() + " and W_r is " +
                     q.w_r.shape_string());
  }

  if (!cfg.reasoning) {
    if (cache) {
      *cache = GcnCache{};
      cache->valid = true;
      cache->config = cfg;
      cache->regions = regions;
    }
    ReasonedRegions out{regions, mean_rows(regions)};
    return out;
  }

  AdjacencyTerms terms = adjacency_terms(regions, p, cfg.adjacency);
  Matrix prop = normalize(terms.graph, cfg.normalization);
  Matrix aggregated = matmul(prop, regions);
  Matrix hidden = matmul(aggregated, q.w_g);
  Matrix z = matmul(hidden, q.w_r);
  z += regions;
  ReasonedRegions out{std::move(z), Matrix{}};
  out.frame_feature = mean_rows(out.z);

  if (cache) {
    GcnCache& c = *cache;
    c = GcnCache{};
    c.config = cfg;
    c.regions = regions;
    switch (cfg.normalization) {
      case Normalization::kRandomWalk:
      case Normalization::kSymmetric:
        c.scale = stabilized_degree(terms.graph);
        break;
      case Normalization::kRow:
        c.scale.assign(terms.graph.size(), 0.0);
        for (std::size_t i = 0; i < terms.graph.size(); ++i)
          for (double v : terms.graph.adjacency.row(i)) c.scale[i] += std::abs(v);
        break;
      case Normalization::kNone:
        break;
    }
    c.phi = std::move(terms.phi);
    c.theta = std::move(terms.theta);
    c.pre_adjacency = std::move(terms.pre_adjacency);
    c.adjacency = std::move(terms.graph.adjacency);
    c.propagation = std::move(prop);
    c.aggregated = std::move(aggregated);
    c.hidden = std::move(hidden);
    c.valid = true;
  }
  return out;
}

GcnGrads GcnGrads::zeros(std::size_t n, std::size_t d) {
  return GcnGrads{Matrix(n, d), Matrix(d, d), Matrix(d, d), Matrix(d, d),
                  Matrix(1, d), Matrix(d, d), Matrix(1, d)};
}

GcnGrads rw_gcn_backward(const Matrix& grad_z, const GcnCache& cache, const EmbedParams& p,
                         const GcnParams& q) {
  if (!cache.valid) throw StateError("rw_gcn_backward: no cached forward pass");
  if (!grad_z.same_shape(cache.regions)) {
    throw ShapeError("rw_gcn_backward: upstream gradient is " + grad_z.shape_string() +
                     " but Z is " + cache.regions.shape_string());
  }
  const std::size_t n = cache.regions.rows();
  const std::size_t d = cache.regions.cols();
  GcnGrads g = GcnGrads::zeros(n, d);
  g.regions = grad_z;  // residual shortcut
  if (!cache.config.reasoning) return g;

  // Z = H W_r + V, H = A W_g, A = N V.
  g.w_r = matmul_tn(cache.hidden, grad_z);
  const Matrix grad_hidden = matmul_nt(grad_z, q.w_r);
  g.w_g = matmul_tn(cache.aggregated, grad_hidden);
  const Matrix grad_agg = matmul_nt(grad_hidden, q.w_g);
  g.regions += matmul_tn(cache.propagation, grad_agg);
  const Matrix grad_prop = matmul_nt(grad_agg, cache.regions);

  Matrix grad_adj = normalization_backward(grad_prop, cache);
  if (cache.config.adjacency == AdjacencyMode::kSoftplus) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) grad_adj(i, j) *= sigmoid(cache.pre_adjacency(i, j));
  }
  // R = M + M^T with M = Phi Theta^T.
  const Matrix grad_cross = grad_adj + grad_adj.transposed();
  const Matrix grad_phi = matmul(grad_cross, cache.theta);
  const Matrix grad_theta = matmul_tn(grad_cross, cache.phi);

  g.w_phi = matmul_tn(grad_phi, cache.regions);
  g.b_phi = sum_rows(grad_phi);
  g.w_theta = matmul_tn(grad_theta, cache.regions);
  g.b_theta = sum_rows(grad_theta);
  g.regions += matmul(grad_phi, p.w_phi);
  g.regions += matmul(grad_theta, p.w_theta);
  return g;
}

Matrix pool_frames(std::span<const Matrix> frame_features) {
  if (frame_features.empty()) throw EmptyInputError("pool_frames: no frames");
  Matrix sum(1, frame_features.front().cols());
  for (const auto& f : frame_features) sum += f;
  sum *= 1.0 / static_cast<double>(frame_features.size());
  return sum;
}

}  // namespace visern
