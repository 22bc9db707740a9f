#include "visern/semantic_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "visern/error.hpp"

namespace visern {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

EmbedParams EmbedParams::random(std::size_t d, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  EmbedParams p;
  p.w_phi = rng.uniform_matrix(d, d, -bound, bound);
  p.b_phi = Matrix(1, d);
  p.w_theta = rng.uniform_matrix(d, d, -bound, bound);
  p.b_theta = Matrix(1, d);
  return p;
}

const char* to_string(AdjacencyMode mode) {
  return mode == AdjacencyMode::kSoftplus ? "softplus" : "dot";
}

AdjacencyMode parse_adjacency_mode(const std::string& name) {
  if (name == "dot") return AdjacencyMode::kDotProduct;
  if (name == "softplus" || name == "nonneg") return AdjacencyMode::kSoftplus;
  throw ConfigError("unknown adjacency mode '" + name + "' (expected dot or softplus)");
}

const char* to_string(Normalization kind) {
  switch (kind) {
    case Normalization::kNone: return "none";
    case Normalization::kRow: return "row";
    case Normalization::kSymmetric: return "sym";
    case Normalization::kRandomWalk: return "rw";
  }
  return "rw";
}

Normalization parse_normalization(const std::string& name) {
  if (name == "none") return Normalization::kNone;
  if (name == "row") return Normalization::kRow;
  if (name == "sym") return Normalization::kSymmetric;
  if (name == "rw") return Normalization::kRandomWalk;
  throw ConfigError("unknown normalization '" + name + "' (expected none, row, sym or rw)");
}

SemanticGraph graph_from_adjacency(Matrix adjacency) {
  if (adjacency.rows() != adjacency.cols())
    throw ShapeError("adjacency must be square, got " + adjacency.shape_string());
  SemanticGraph g;
  g.degree.resize(adjacency.rows());
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    double s = 0.0;
    for (double v : adjacency.row(i)) s += v;
    g.degree[i] = s;
  }
  g.adjacency = std::move(adjacency);
  return g;
}

AdjacencyTerms adjacency_terms(const Matrix& regions, const EmbedParams& p, AdjacencyMode mode) {
  const std::size_t d = regions.cols();
  if (p.w_phi.rows() != d || p.w_phi.cols() != d || p.w_theta.rows() != d ||
      p.w_theta.cols() != d || p.b_phi.cols() != d || p.b_theta.cols() != d) {
    throw ShapeError("build_adjacency: regions are " + regions.shape_string() +
                     " but embedding weights are " + p.w_phi.shape_string());
  }
  const std::size_t n = regions.rows();
  AdjacencyTerms t;
  t.phi = matmul_nt(regions, p.w_phi);
  t.theta = matmul_nt(regions, p.w_theta);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      t.phi(i, k) += p.b_phi(0, k);
      t.theta(i, k) += p.b_theta(0, k);
    }
  }
  const Matrix cross = matmul_nt(t.phi, t.theta);
  t.pre_adjacency = Matrix(n, n);
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = cross(i, j) + cross(j, i);
      t.pre_adjacency(i, j) = v;
      r(i, j) = mode == AdjacencyMode::kSoftplus ? softplus(v) : v;
    }
  }
  t.graph = graph_from_adjacency(std::move(r));
  return t;
}

SemanticGraph build_adjacency(const Matrix& regions, const EmbedParams& p, AdjacencyMode mode) {
  return adjacency_terms(regions, p, mode).graph;
}

Matrix laplacian(const SemanticGraph& g) {
  Matrix l = g.adjacency * -1.0;
  for (std::size_t i = 0; i < g.size(); ++i) l(i, i) += g.degree[i];
  return l;
}

std::vector<double> stabilized_degree(const SemanticGraph& g) {
  std::vector<double> deg(g.degree);
  for (std::size_t i = 0; i < deg.size(); ++i) {
    deg[i] += sign_or_zero(deg[i]) * kDegreeEpsilon;
    if (std::abs(deg[i]) < kSingularDegree)
      throw SingularDegreeError("vertex " + std::to_string(i) + " has zero degree");
  }
  return deg;
}

Matrix normalize(const SemanticGraph& g, Normalization kind) {
  const std::size_t n = g.size();
  Matrix out = g.adjacency;
  switch (kind) {
    case Normalization::kNone:
      break;
    case Normalization::kRandomWalk: {
      const auto deg = stabilized_degree(g);
      for (std::size_t i = 0; i < n; ++i)
        for (auto& v : out.row(i)) v /= deg[i];
      break;
    }
    case Normalization::kSymmetric: {
      const auto deg = stabilized_degree(g);
      std::vector<double> s(n);
      // |D|^-1/2 so that negative degrees (possible under dot-product
      // adjacency) still give a symmetric operator.
      for (std::size_t i = 0; i < n; ++i) s[i] = 1.0 / std::sqrt(std::abs(deg[i]));
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) *= s[i] * s[j];
      break;
    }
    case Normalization::kRow: {
      for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (double v : g.adjacency.row(i)) total += std::abs(v);
        if (total < kSingularDegree)
          throw SingularDegreeError("vertex " + std::to_string(i) + " has an all-zero row");
        for (auto& v : out.row(i)) v /= total;
      }
      break;
    }
  }
  return out;
}

Matrix laplacian_sym(const SemanticGraph& g) {
  Matrix l = normalize(g, Normalization::kSymmetric) * -1.0;
  for (std::size_t i = 0; i < g.size(); ++i) l(i, i) += 1.0;
  return l;
}

Matrix laplacian_rw(const SemanticGraph& g) {
  Matrix l = normalize(g, Normalization::kRandomWalk) * -1.0;
  for (std::size_t i = 0; i < g.size(); ++i) l(i, i) += 1.0;
  return l;
}

SpectralDecomposition spectral_decompose(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("spectral_decompose: " + m.shape_string());
  const std::size_t n = m.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-10) {
        throw SymmetryError("spectral_decompose: entries (" + std::to_string(i) + "," +
                            std::to_string(j) + ") and its transpose differ");
      }
    }
  }

  Matrix a = m;
  // Work on the exactly symmetric part.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
  Matrix v = Matrix::identity(n);

  const double scale = std::max(frobenius_norm(a), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-15 * scale) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = a(p, k) = c * akp - s * akq;
          a(k, q) = a(q, k) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  out.lambda_max = n == 0 ? 0.0 : out.eigenvalues.back();
  return out;
}

SimilarityCheck verify_rw_sym_similarity(const SemanticGraph& g) {
  const std::size_t n = g.size();
  const auto deg = stabilized_degree(g);
  for (std::size_t i = 0; i < n; ++i) {
    if (deg[i] <= 0.0)
      throw SingularDegreeError("vertex " + std::to_string(i) +
                                " has negative degree; similarity needs positive degrees");
  }
  const Matrix lrw = laplacian_rw(g);
  const Matrix lsym = laplacian_sym(g);

  std::vector<double> sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) sqrt_deg[i] = std::sqrt(deg[i]);

  SimilarityCheck out;
  // L_rw against D^-1/2 L_sym D^1/2.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double rebuilt = lsym(i, j) * sqrt_deg[j] / sqrt_deg[i];
      out.similarity_deviation = std::max(out.similarity_deviation, std::abs(lrw(i, j) - rebuilt));
    }
  }

  // D^1/2 L_rw D^-1/2 is symmetric; its spectrum is that of L_rw.
  Matrix transformed(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) transformed(i, j) = sqrt_deg[i] * lrw(i, j) / sqrt_deg[j];
  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      asym = std::max(asym, std::abs(transformed(i, j) - transformed(j, i)));
  if (asym > 1e-10) {
    throw SymmetryError("D^1/2 L_rw D^-1/2 is not symmetric (deviation " +
                        std::to_string(asym) + ")");
  }
  out.rw_eigenvalues = spectral_decompose(transformed).eigenvalues;
  out.sym_eigenvalues = spectral_decompose(lsym).eigenvalues;
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalue_deviation = std::max(
        out.eigenvalue_deviation, std::abs(out.rw_eigenvalues[k] - out.sym_eigenvalues[k]));
  }
  if (n > 0) {
    out.min_eigenvalue = std::min(out.rw_eigenvalues.front(), out.sym_eigenvalues.front());
    out.max_eigenvalue = std::max(out.rw_eigenvalues.back(), out.sym_eigenvalues.back());
  }
  out.holds = out.eigenvalue_deviation < kEigenvalueMatchTolerance &&
              out.similarity_deviation < kSimilarityTolerance &&
              out.min_eigenvalue >= -kSpectrumBoundSlack &&
              out.max_eigenvalue <= 2.0 + kSpectrumBoundSlack;
  return out;
}

Matrix scale_laplacian(const Matrix& l, double lambda_max) {
  if (!(lambda_max > 0.0)) throw ConfigError("scale_laplacian: lambda_max must be positive");
  Matrix out = l * (2.0 / lambda_max);
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) -= 1.0;
  return out;
}

Matrix chebyshev_apply(const Matrix& l_scaled, const ChebCoeffs& c, const Matrix& x) {
  if (c.coefficients.size() != c.order + 1) {
    throw ConfigError("chebyshev_apply: order " + std::to_string(c.order) + " needs " +
                      std::to_string(c.order + 1) + " coefficients, got " +
                      std::to_string(c.coefficients.size()));
  }
  if (l_scaled.rows() != l_scaled.cols() || l_scaled.cols() != x.rows())
    throw ShapeError("chebyshev_apply: " + l_scaled.shape_string() + " x " + x.shape_string());

  Matrix prev2 = x;  // T_0 x
  Matrix out = x * c.coefficients[0];
  if (c.order == 0) return out;
  Matrix prev1 = matmul(l_scaled, x);  // T_1 x
  out += prev1 * c.coefficients[1];
  for (std::size_t k = 2; k <= c.order; ++k) {
    Matrix next = matmul(l_scaled, prev1) * 2.0;
    next -= prev2;
    out += next * c.coefficients[k];
    prev2 = std::move(prev1);
    prev1 = std::move(next);
  }
  return out;
}

std::vector<double> chebyshev_apply(const Matrix& l_scaled, const ChebCoeffs& c,
                                    const std::vector<double>& x) {
  const Matrix col(x.size(), 1, x);
  return chebyshev_apply(l_scaled, c, col).data();
}

double chebyshev_polynomial(std::size_t k, double a) {
  if (k == 0) return 1.0;
  double t0 = 1.0;
  double t1 = a;
  for (std::size_t i = 2; i <= k; ++i) {
    const double t2 = 2.0 * a * t1 - t0;
    t0 = t1;
    t1 = t2;
  }
  return t1;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace visern
