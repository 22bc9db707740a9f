#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "visern/error.hpp"
#include "visern/matrix.hpp"
#include "visern/rng.hpp"

using namespace visern;
using visern::testing::naive_matmul;

TEST_SUITE("matrix") {
  TEST_CASE("identity times matrix is the matrix") {
    const Matrix a{{1, 2}, {3, 4}};
    CHECK(matmul(Matrix::identity(2), a) == a);
  }

  TEST_CASE("row times column") {
    const Matrix c = matmul(Matrix{{1, 2}}, Matrix{{3}, {4}});
    REQUIRE(c.rows() == 1);
    REQUIRE(c.cols() == 1);
    CHECK(c(0, 0) == 11.0);
  }

  TEST_CASE("matmul matches the triple loop") {
    Rng rng(1, "matmul");
    for (int t = 0; t < 20; ++t) {
      const Matrix a = rng.normal_matrix(5, 7);
      const Matrix b = rng.normal_matrix(7, 3);
      const Matrix c = matmul(a, b);
      CHECK(c.rows() == 5);
      CHECK(c.cols() == 3);
      CHECK(max_abs_diff(c, naive_matmul(a, b)) < 1e-12);
      CHECK(max_abs_diff(matmul_tn(a.transposed(), b), naive_matmul(a, b)) < 1e-12);
      CHECK(max_abs_diff(matmul_nt(a, b.transposed()), naive_matmul(a, b)) < 1e-12);
    }
  }

  TEST_CASE("matmul shape error names both shapes") {
    try {
      matmul(Matrix(2, 3), Matrix(2, 3));
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("2x3") != std::string::npos);
      CHECK(e.kind() == ErrorKind::kShape);
    }
    CHECK_THROWS_AS(matmul_tn(Matrix(2, 3), Matrix(3, 3)), ShapeError);
    CHECK_THROWS_AS(matmul_nt(Matrix(2, 3), Matrix(3, 2)), ShapeError);
  }

  TEST_CASE("matmul is associative") {
    Rng rng(2, "assoc");
    for (int t = 0; t < 20; ++t) {
      const Matrix a = rng.normal_matrix(4, 6);
      const Matrix b = rng.normal_matrix(6, 5);
      const Matrix c = rng.normal_matrix(5, 3);
      const Matrix l = matmul(matmul(a, b), c);
      const Matrix r = matmul(a, matmul(b, c));
      CHECK(frobenius_distance(l, r) <= 1e-9 * frobenius_norm(l));
    }
  }

  TEST_CASE("mean_rows by hand") {
    const Matrix m = mean_rows(Matrix{{2, 4}, {4, 8}});
    CHECK(m == Matrix{{3, 6}});
    const Matrix single{{1.5, -2, 7}};
    CHECK(mean_rows(single) == single);
  }

  TEST_CASE("mean_rows matches per-column accumulation and stays in range") {
    Rng rng(3, "mean");
    const Matrix a = rng.normal_matrix(36, 2048);
    const Matrix m = mean_rows(a);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      double s = 0.0, lo = a(0, j), hi = a(0, j);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        s += a(i, j);
        lo = std::min(lo, a(i, j));
        hi = std::max(hi, a(i, j));
      }
      CHECK(std::abs(m(0, j) - s / 36.0) < 1e-12);
      CHECK(m(0, j) >= lo);
      CHECK(m(0, j) <= hi);
    }
  }

  TEST_CASE("mean_rows of no rows is an empty-input error") {
    CHECK_THROWS_AS(mean_rows(Matrix(0, 3)), EmptyInputError);
  }

  TEST_CASE("cosine examples") {
    const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
    CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
    CHECK(std::abs(cosine(a, b) - 32.0 / (std::sqrt(14.0) * std::sqrt(77.0))) < 1e-15);
    CHECK(std::abs(cosine(a, b) - 0.974632) < 1e-6);
  }

  TEST_CASE("cosine symmetry and scale invariance") {
    Rng rng(4, "cos");
    for (int t = 0; t < 100; ++t) {
      const Matrix a = rng.normal_matrix(1, 9);
      const Matrix b = rng.normal_matrix(1, 9);
      const double c = rng.uniform(0.01, 100.0);
      CHECK(cosine(a.data(), b.data()) == cosine(b.data(), a.data()));
      CHECK(std::abs(cosine((a * c).data(), b.data()) - cosine(a.data(), b.data())) < 1e-12);
      const double v = cosine(a.data(), b.data());
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }

  TEST_CASE("cosine of a zero vector is degenerate") {
    CHECK_THROWS_AS(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}),
                    DegenerateInputError);
    CHECK_THROWS_AS(cosine(std::vector<double>{1}, std::vector<double>{1, 0}), ShapeError);
  }

  TEST_CASE("construction and elementwise ops") {
    CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), ShapeError);
    Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{1, 1}, {1, 1}};
    CHECK(a + b == Matrix{{2, 3}, {4, 5}});
    CHECK(a - b == Matrix{{0, 1}, {2, 3}});
    CHECK(a * 2.0 == Matrix{{2, 4}, {6, 8}});
    CHECK(a.transposed() == Matrix{{1, 3}, {2, 4}});
    CHECK(sum_rows(a) == Matrix{{4, 6}});
    CHECK_THROWS_AS(a += Matrix(1, 2), ShapeError);
    CHECK(a.shape_string() == "2x2");
  }

  TEST_CASE("require_finite reports the bad entry") {
    Matrix m{{1, 2}, {3, NAN}};
    CHECK_FALSE(m.all_finite());
    CHECK_THROWS_AS(require_finite(m, "m"), DataError);
    m(1, 1) = 0.0;
    CHECK(m.all_finite());
    CHECK_NOTHROW(require_finite(m, "m"));
  }
}
