#include "qrnet/ode.hpp"

#include <cmath>

namespace qrnet {

namespace {

// Dormand-Prince coefficients
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

OdeStatus integrate_rk45(const std::function<Vector(double, const Vector&)>& f, double t0, double t1,
                         Vector& y, const OdeSettings& s,
                         const std::function<bool(double, Vector&, double)>& observer) {
  OdeStatus status;
  double t = t0;
  double h = std::min(s.h_init, t1 - t0);
  long total_iters = 0;
  Vector k1 = f(t, y);

  while (t < t1) {
    h = std::min(h, t1 - t);
    if (h < s.h_min) {
      status.ok = false;
      status.step_collapse = true;
      status.message = "step size collapse at t=" + std::to_string(t);
      return status;
    }

    const Vector k2 = f(t + c2 * h, y + h * (a21 * k1));
    const Vector k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const Vector k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = f(t + h, ynew);
    const Vector err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double norm = 0.0;
    for (int i = 0; i < y.size(); ++i) {
      const double sc = s.atol + s.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      norm = std::max(norm, std::abs(err[i]) / sc);
    }
    if (!std::isfinite(norm)) norm = 1e10;

    if (norm <= 1.0) {
      t += h;
      y = ynew;
      k1 = k7;  // FSAL
      ++status.steps;
      if (observer) {
        if (!observer(t, y, h)) return status;
        if (!y.cwiseEqual(ynew).all()) k1 = f(t, y);  // observer projected the state
      }
    }

    const double fac = std::clamp(0.9 * std::pow(std::max(norm, 1e-12), -0.2), 0.2, 5.0);
    h = std::min(h * fac, s.h_max);

    ++total_iters;
    if (total_iters > s.max_steps) {
      status.ok = false;
      status.message = "max step count exceeded";
      return status;
    }
  }
  return status;
}

}  // namespace qrnet
