#pragma once

#include <functional>

#include "qrnet/types.hpp"

namespace qrnet {

struct OdeSettings {
  double rtol = 1e-6;
  double atol = 1e-8;
  double h_init = 1e-3;
  double h_min = 1e-12;
  double h_max = 1.0;
  long max_steps = 50'000'000;
};

struct OdeStatus {
  bool ok = true;
  bool step_collapse = false;
  long steps = 0;
  std::string message;
};

// Adaptive Dormand-Prince 5(4). Integrates y' = f(t, y) from t0 to t1,
// invoking `observer(t, y, h_taken)` after every accepted step. The observer
// may mutate y (manifold projection) and may return false to stop early.
OdeStatus integrate_rk45(const std::function<Vector(double, const Vector&)>& f, double t0, double t1,
                         Vector& y, const OdeSettings& settings,
                         const std::function<bool(double, Vector&, double)>& observer = nullptr);

}  // namespace qrnet
