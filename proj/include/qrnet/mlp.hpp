#pragma once

#include "qrnet/rng.hpp"
#include "qrnet/types.hpp"

namespace qrnet {

// Feedforward tanh network. `widths` = [in, w_1, ..., w_L, out]; L may be zero
// (a single affine layer). All derivative paths are exact and hand-rolled:
//  - input Jacobian dN/dx via forward accumulation,
//  - parameter gradient of <seed, N(x)> via backprop,
//  - parameter gradient of tr(U' dN/dx) via a second backward sweep (the
//    mixed-derivative path used when training Jacobian-anchored policies).
struct MlpParams {
  std::vector<Matrix> W;
  std::vector<Vector> b;
  std::string activation = "tanh";

  int num_affine() const { return static_cast<int>(W.size()); }
  int input_dim() const { return W.empty() ? 0 : static_cast<int>(W.front().cols()); }
  int output_dim() const { return W.empty() ? 0 : static_cast<int>(W.back().rows()); }
  std::vector<int> widths() const;
  int param_count() const;

  Vector flatten() const;
  void unflatten(const Vector& theta);

  static MlpParams zeros(const std::vector<int>& widths);
  // symmetric uniform fan-in initialization, biases zero
  static MlpParams random(const std::vector<int>& widths, std::uint64_t seed);

  void validate() const;
};

struct MlpGrad {
  std::vector<Matrix> dW;
  std::vector<Vector> db;

  static MlpGrad zeros_like(const MlpParams& p);
  void scale(double s);
  void axpy(double a, const MlpGrad& other);
  Vector flatten() const;
};

// forward/backward workspace for one input
struct MlpCache {
  std::vector<Vector> a;  // activations, a[0] = x
  std::vector<Vector> z;  // pre-activations per hidden layer
  std::vector<Matrix> G;  // forward-mode Jacobian accumulators (filled by jacobian)
  bool has_jacobian = false;
};

Vector mlp_forward(const MlpParams& p, const Vector& x, MlpCache* cache = nullptr);

// exact d N / d x, out x in
Matrix mlp_input_jacobian(const MlpParams& p, const Vector& x, MlpCache* cache = nullptr);

// Accumulate d<seed, N(x)>/dtheta into g. `cache` must come from mlp_forward at x.
void mlp_backprop_value(const MlpParams& p, const MlpCache& cache, const Vector& seed, MlpGrad& g);

// Accumulate d tr(U' dN/dx(x)) / dtheta into g. `cache` must come from
// mlp_input_jacobian at x (needs the G accumulators).
void mlp_backprop_jacobian(const MlpParams& p, const MlpCache& cache, const Matrix& U, MlpGrad& g);

// gradient of <seed, N(x)> w.r.t. every parameter, flattened
Vector mlp_param_gradient(const MlpParams& p, const Vector& x, const Vector& seed);

}  // namespace qrnet
