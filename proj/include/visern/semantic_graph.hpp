#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "visern/matrix.hpp"
#include "visern/rng.hpp"

namespace visern {

/// Linear embeddings phi(x) = W_phi x + b_phi and theta(x) = W_theta x + b_theta
/// used to score region pairs. Biases are stored as 1 x d rows.
struct EmbedParams {
  Matrix w_phi;
  Matrix b_phi;
  Matrix w_theta;
  Matrix b_theta;

  static EmbedParams random(std::size_t d, Rng& rng);
  std::size_t dim() const { return w_phi.rows(); }
};

/// kSoftplus passes every dot-product score through softplus so that the
/// adjacency (and therefore the transition matrix) is non-negative.
enum class AdjacencyMode { kDotProduct, kSoftplus };

const char* to_string(AdjacencyMode mode);
AdjacencyMode parse_adjacency_mode(const std::string& name);

struct SemanticGraph {
  Matrix adjacency;
  /// Row sums of the adjacency, unstabilised.
  std::vector<double> degree;

  std::size_t size() const { return adjacency.rows(); }
};

/// Graph over the rows of `regions`:
/// R(i, j) = phi(v_i)^T theta(v_j) + theta(v_i)^T phi(v_j).
/// R is assembled as M + M^T, so it is bitwise symmetric.
SemanticGraph build_adjacency(const Matrix& regions, const EmbedParams& p,
                              AdjacencyMode mode = AdjacencyMode::kDotProduct);

/// build_adjacency together with the embedded regions and the pre-softplus
/// scores, for callers that differentiate through the graph.
struct AdjacencyTerms {
  Matrix phi;
  Matrix theta;
  Matrix pre_adjacency;
  SemanticGraph graph;
};
AdjacencyTerms adjacency_terms(const Matrix& regions, const EmbedParams& p, AdjacencyMode mode);

/// Graph from an explicit adjacency; degrees are recomputed.
SemanticGraph graph_from_adjacency(Matrix adjacency);

/// L = D - R.
Matrix laplacian(const SemanticGraph& g);

enum class Normalization { kNone, kRow, kSymmetric, kRandomWalk };

const char* to_string(Normalization kind);
Normalization parse_normalization(const std::string& name);

inline constexpr double kDegreeEpsilon = 1e-8;
inline constexpr double kSingularDegree = 1e-12;

/// Degrees pushed away from zero: D_ii + sign(D_ii) * 1e-8. Throws
/// SingularDegreeError naming the vertex when |D_ii| < 1e-12 afterwards.
std::vector<double> stabilized_degree(const SemanticGraph& g);

/// kRandomWalk: D^-1 R. kSymmetric: D^-1/2 R D^-1/2, taken as |D|^-1/2 when
/// a degree is negative. kRow: each row divided by its absolute row sum. kNone: R.
Matrix normalize(const SemanticGraph& g, Normalization kind);

/// I - D^-1/2 R D^-1/2.
Matrix laplacian_sym(const SemanticGraph& g);
/// I - D^-1 R.
Matrix laplacian_rw(const SemanticGraph& g);

struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column k pairs with eigenvalues[k]
  double lambda_max = 0.0;
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Throws
/// SymmetryError if |M - M^T| exceeds 1e-10 anywhere.
SpectralDecomposition spectral_decompose(const Matrix& m);

struct SimilarityCheck {
  bool holds = false;
  std::vector<double> rw_eigenvalues;
  std::vector<double> sym_eigenvalues;
  double eigenvalue_deviation = 0.0;   // max |sorted eig(L_rw) - sorted eig(L_sym)|
  double similarity_deviation = 0.0;   // max |L_rw - D^-1/2 L_sym D^1/2|
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

inline constexpr double kEigenvalueMatchTolerance = 1e-8;
inline constexpr double kSimilarityTolerance = 1e-10;
inline constexpr double kSpectrumBoundSlack = 1e-9;

/// Checks that L_rw and L_sym share a spectrum, that
/// L_rw = D^-1/2 L_sym D^1/2 entry-wise, and that the spectrum sits inside
/// [0, 2]. Eigenvalues of L_rw come from the symmetric matrix
/// D^1/2 L_rw D^-1/2 assembled from L_rw's own entries.
SimilarityCheck verify_rw_sym_similarity(const SemanticGraph& g);

struct ChebCoeffs {
  std::vector<double> coefficients;
  std::size_t order = 0;
};

/// 2 L / lambda_max - I.
Matrix scale_laplacian(const Matrix& l, double lambda_max);

/// sum_k c_k T_k(L_scaled) X through the three-term recurrence, applied to
/// every column of `x`.
Matrix chebyshev_apply(const Matrix& l_scaled, const ChebCoeffs& c, const Matrix& x);
std::vector<double> chebyshev_apply(const Matrix& l_scaled, const ChebCoeffs& c,
                                    const std::vector<double>& x);

/// Scalar T_k(a).
double chebyshev_polynomial(std::size_t k, double a);

/// UTF-8 CSV, one matrix row per line.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);

}  // namespace visern
