#include <doctest.h>

#include <cmath>

#include "qrnet/chebyshev.hpp"

using namespace qrnet;

TEST_CASE("differentiation matrix kills constants and reproduces linears") {
  for (int n : {2, 4, 8, 16}) {
    const Matrix D = chebyshev_diff_matrix(n);
    const Vector ones = Vector::Ones(n + 1);
    CHECK(inf_norm(Vector(D * ones)) < 1e-12);

    const Vector xi = chebyshev_nodes(n);
    const Vector dxi = D * xi;
    CHECK(inf_norm(Vector(dxi - ones)) < 1e-12);
  }
}

TEST_CASE("derivative of xi^2 is 2 xi") {
  for (int n : {4, 8, 16}) {
    const Vector xi = chebyshev_nodes(n);
    const Matrix D = chebyshev_diff_matrix(n);
    const Vector d = D * xi.cwiseProduct(xi);
    CHECK(inf_norm(Vector(d - 2.0 * xi)) < 1e-10);
  }
}

TEST_CASE("spectral accuracy: second derivative of sin(pi xi) at n=16") {
  const int n = 16;
  const Vector xi = chebyshev_nodes(n);
  const Matrix D = chebyshev_diff_matrix(n);
  const Matrix D2 = D * D;
  Vector f(n + 1), expect(n + 1);
  for (int j = 0; j <= n; ++j) {
    f[j] = std::sin(M_PI * xi[j]);
    expect[j] = -M_PI * M_PI * std::sin(M_PI * xi[j]);
  }
  CHECK(inf_norm(Vector(D2 * f - expect)) < 1e-6);
}

TEST_CASE("rejects degenerate grids") {
  CHECK_THROWS_AS(chebyshev_diff_matrix(1), std::invalid_argument);
  CHECK_THROWS_AS(chebyshev_nodes(0), std::invalid_argument);
}

TEST_CASE("Clenshaw-Curtis weights integrate low-order polynomials exactly") {
  for (int n : {4, 5, 8, 16, 17}) {
    const Vector w = clenshaw_curtis_weights(n);
    const Vector xi = chebyshev_nodes(n);
    CHECK(std::abs(w.sum() - 2.0) < 1e-12);                      // integral of 1
    CHECK(std::abs(w.dot(xi)) < 1e-12);                          // integral of xi
    CHECK(std::abs(w.dot(xi.cwiseProduct(xi)) - 2.0 / 3.0) < 1e-12);
    CHECK((w.array() > 0.0).all());
  }
}
