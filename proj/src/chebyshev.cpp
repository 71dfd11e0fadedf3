#include "qrnet/chebyshev.hpp"

#include <cmath>

namespace qrnet {

Vector chebyshev_nodes(int n) {
  require(n >= 2, "chebyshev_nodes: n must be >= 2");
  Vector xi(n + 1);
  for (int j = 0; j <= n; ++j) xi[j] = std::cos(j * M_PI / n);
  return xi;
}

Matrix chebyshev_diff_matrix(int n) {
  require(n >= 2, "chebyshev_diff_matrix: n must be >= 2");
  const Vector xi = chebyshev_nodes(n);
  Vector c(n + 1);
  for (int j = 0; j <= n; ++j) c[j] = (j == 0 || j == n) ? 2.0 : 1.0;

  Matrix D(n + 1, n + 1);
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      if (i == j) continue;
      const double sign = (((i + j) % 2) == 0) ? 1.0 : -1.0;
      D(i, j) = (c[i] / c[j]) * sign / (xi[i] - xi[j]);
    }
  }
  for (int i = 0; i <= n; ++i) {
    double s = 0.0;
    for (int j = 0; j <= n; ++j)
      if (j != i) s += D(i, j);
    D(i, i) = -s;
  }
  return D;
}

Vector clenshaw_curtis_weights(int n) {
  require(n >= 2, "clenshaw_curtis_weights: n must be >= 2");
  Vector w = Vector::Zero(n + 1);
  const bool even = (n % 2 == 0);
  const double wend = even ? 1.0 / (double(n) * n - 1.0) : 1.0 / (double(n) * n);
  w[0] = wend;
  w[n] = wend;
  for (int j = 1; j < n; ++j) {
    const double theta = j * M_PI / n;
    double v = 1.0;
    if (even) {
      for (int k = 1; k <= n / 2 - 1; ++k) v -= 2.0 * std::cos(2.0 * k * theta) / (4.0 * k * k - 1.0);
      v -= std::cos(n * theta) / (double(n) * n - 1.0);
    } else {
      for (int k = 1; k <= (n - 1) / 2; ++k) v -= 2.0 * std::cos(2.0 * k * theta) / (4.0 * k * k - 1.0);
    }
    w[j] = 2.0 * v / n;
  }
  return w;
}

}  // namespace qrnet
