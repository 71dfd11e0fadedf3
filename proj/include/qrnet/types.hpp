#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qrnet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline double inf_norm(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }
inline double inf_norm(const Matrix& m) { return m.size() ? m.lpNorm<Eigen::Infinity>() : 0.0; }

inline bool all_finite(const Vector& v) { return v.allFinite(); }
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Box control set. Channels may be individually unbounded, in which case the
// corresponding limits are ignored.
struct ControlBounds {
  Vector u_min;
  Vector u_max;
  BoolArray bounded;

  static ControlBounds unbounded(int m) {
    ControlBounds b;
    b.u_min = Vector::Constant(m, -1.0);
    b.u_max = Vector::Constant(m, 1.0);
    b.bounded = BoolArray::Constant(m, false);
    return b;
  }

  static ControlBounds box(const Vector& lo, const Vector& hi) {
    require(lo.size() == hi.size(), "ControlBounds: size mismatch");
    ControlBounds b;
    b.u_min = lo;
    b.u_max = hi;
    b.bounded = BoolArray::Constant(lo.size(), true);
    return b;
  }

  int dim() const { return static_cast<int>(u_min.size()); }

  bool any_bounded() const { return bounded.any(); }

  // u_min < u_max on every bounded channel; interior must hold for the
  // reference control (equilibrium control is required to be interior).
  void validate(const Vector& u_interior) const {
    require(u_interior.size() == u_min.size(), "ControlBounds: dimension mismatch");
    for (int i = 0; i < dim(); ++i) {
      if (!bounded[i]) continue;
      require(u_min[i] < u_max[i], "ControlBounds: u_min >= u_max on channel " + std::to_string(i));
      require(u_min[i] < u_interior[i] && u_interior[i] < u_max[i],
              "ControlBounds: reference control not strictly interior on channel " + std::to_string(i));
    }
  }

  Vector clip(const Vector& u) const {
    Vector out = u;
    for (int i = 0; i < dim(); ++i) {
      if (!bounded[i]) continue;
      out[i] = std::min(std::max(out[i], u_min[i]), u_max[i]);
    }
    return out;
  }

  // 1 on channels where the hard clip is inactive (strictly inside or unbounded).
  Vector clip_active_mask(const Vector& u) const {
    Vector m = Vector::Ones(dim());
    for (int i = 0; i < dim(); ++i) {
      if (bounded[i] && (u[i] <= u_min[i] || u[i] >= u_max[i])) m[i] = 0.0;
    }
    return m;
  }
};

struct EquilibriumPair {
  Vector x_f;
  Vector u_f;
};

struct SystemLinearization {
  Matrix A;  // df/dx
  Matrix B;  // df/du
};

struct CostQuadratic {
  Matrix Q;  // state weight of the local expansion q(x) ~ (x-x_f)' Q (x-x_f)
  Matrix R;  // control weight of r(u) ~ (u-u_f)' R (u-u_f)
};

inline double masked_inf_norm(const Vector& v, const std::vector<int>& idx) {
  double m = 0.0;
  for (int i : idx) m = std::max(m, std::abs(v[i]));
  return m;
}

inline double masked_norm2(const Vector& v, const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx) s += v[i] * v[i];
  return std::sqrt(s);
}

}  // namespace qrnet
