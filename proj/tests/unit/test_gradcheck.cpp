#include <doctest.h>

#include <cmath>
#include <limits>

#include "visern/error.hpp"
#include "visern/gradcheck.hpp"

using namespace visern;

TEST_SUITE("gradcheck") {
  TEST_CASE("x squared at 3") {
    Matrix x{{3.0}};
    const Matrix analytic{{6.0}};
    const GradCheckParam p{"x", &x, &analytic};
    const GradReport r = finite_diff_grad([&] { return x(0, 0) * x(0, 0); }, {&p, 1});
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-9);
    CHECK(x(0, 0) == 3.0);  // restored
    REQUIRE(r.per_parameter_errors.size() == 1);
    CHECK(r.per_parameter_errors[0].first == "x");
  }

  TEST_CASE("constant function has zero gradient") {
    Matrix x{{1.0, -2.0}};
    const Matrix analytic(1, 2);
    const GradCheckParam p{"x", &x, &analytic};
    const GradReport r = finite_diff_grad([] { return 4.2; }, {&p, 1});
    CHECK(r.passed);
    CHECK(r.max_rel_error == 0.0);
  }

  TEST_CASE("wrong gradient fails") {
    Matrix x{{1.0, 2.0}};
    const Matrix analytic{{2.0, 5.0}};  // true gradient of sum x^2 is (2, 4)
    const GradCheckParam p{"x", &x, &analytic};
    const GradReport r =
        finite_diff_grad([&] { return x(0, 0) * x(0, 0) + x(0, 1) * x(0, 1); }, {&p, 1});
    CHECK_FALSE(r.passed);
    CHECK(r.max_rel_error == doctest::Approx(1.0 / 9.0).epsilon(1e-6));
    CHECK(r.passed == (r.max_rel_error < r.tolerance));
  }

  TEST_CASE("non-finite loss is an evaluation error") {
    Matrix x{{1.0}};
    const Matrix analytic{{0.0}};
    const GradCheckParam p{"x", &x, &analytic};
    CHECK_THROWS_AS(
        finite_diff_grad([] { return std::numeric_limits<double>::quiet_NaN(); }, {&p, 1}),
        EvaluationError);
  }

  TEST_CASE("relative error definition") {
    CHECK(grad_relative_error(1.0, 1.0) == 0.0);
    CHECK(grad_relative_error(0.0, 0.0) == 0.0);
    CHECK(grad_relative_error(1.0, 3.0) == doctest::Approx(0.5));
    // Floor of 1e-8 in the denominator.
    CHECK(grad_relative_error(1e-12, 0.0) == doctest::Approx(1e-4));
  }
}
