#include "qrnet/spectral.hpp"

#include <Eigen/Eigenvalues>

namespace qrnet {

namespace {

// Parlett-Reinsch style diagonal balancing with powers of two.
Matrix balance(const Matrix& A) {
  const int n = static_cast<int>(A.rows());
  Matrix B = A;
  bool converged = false;
  for (int pass = 0; pass < 50 && !converged; ++pass) {
    converged = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(B(j, i));
        r += std::abs(B(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      const double s = c + r;
      while (c < r / 2.0) {
        c *= 2.0;
        r /= 2.0;
        f *= 2.0;
      }
      while (c >= r * 2.0) {
        c /= 2.0;
        r *= 2.0;
        f /= 2.0;
      }
      if (c + r < 0.95 * s) {
        converged = false;
        B.row(i) /= f;
        B.col(i) *= f;
      }
    }
  }
  return B;
}

}  // namespace

double spectral_abscissa(const Matrix& A) {
  require(A.rows() == A.cols(), "spectral_abscissa: matrix must be square");
  require(all_finite(A), "spectral_abscissa: non-finite entries");
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(balance(A), /*computeEigenvectors=*/false);
  require(es.info() == Eigen::Success, "spectral_abscissa: eigensolver failed to converge");
  return es.eigenvalues().real().maxCoeff();
}

}  // namespace qrnet
