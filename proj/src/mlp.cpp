#include "qrnet/mlp.hpp"

#include <cmath>

namespace qrnet {

std::vector<int> MlpParams::widths() const {
  std::vector<int> w;
  if (W.empty()) return w;
  w.push_back(static_cast<int>(W.front().cols()));
  for (const auto& m : W) w.push_back(static_cast<int>(m.rows()));
  return w;
}

int MlpParams::param_count() const {
  int c = 0;
  for (std::size_t k = 0; k < W.size(); ++k) c += static_cast<int>(W[k].size() + b[k].size());
  return c;
}

Vector MlpParams::flatten() const {
  Vector v(param_count());
  int off = 0;
  for (std::size_t k = 0; k < W.size(); ++k) {
    v.segment(off, W[k].size()) = Eigen::Map<const Vector>(W[k].data(), W[k].size());
    off += static_cast<int>(W[k].size());
    v.segment(off, b[k].size()) = b[k];
    off += static_cast<int>(b[k].size());
  }
  return v;
}

void MlpParams::unflatten(const Vector& theta) {
  require(theta.size() == param_count(), "MlpParams::unflatten: size mismatch");
  int off = 0;
  for (std::size_t k = 0; k < W.size(); ++k) {
    Eigen::Map<Vector>(W[k].data(), W[k].size()) = theta.segment(off, W[k].size());
    off += static_cast<int>(W[k].size());
    b[k] = theta.segment(off, b[k].size());
    off += static_cast<int>(b[k].size());
  }
}

MlpParams MlpParams::zeros(const std::vector<int>& widths) {
  require(widths.size() >= 2, "MlpParams: need at least [in, out] widths");
  MlpParams p;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    require(widths[k] > 0 && widths[k + 1] > 0, "MlpParams: widths must be positive");
    p.W.push_back(Matrix::Zero(widths[k + 1], widths[k]));
    p.b.push_back(Vector::Zero(widths[k + 1]));
  }
  return p;
}

MlpParams MlpParams::random(const std::vector<int>& widths, std::uint64_t seed) {
  MlpParams p = zeros(widths);
  Rng rng(seed);
  for (std::size_t k = 0; k < p.W.size(); ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.W[k].cols()));
    for (int j = 0; j < p.W[k].cols(); ++j)
      for (int i = 0; i < p.W[k].rows(); ++i) p.W[k](i, j) = rng.uniform(-scale, scale);
  }
  return p;
}

void MlpParams::validate() const {
  require(!W.empty() && W.size() == b.size(), "MlpParams: empty or inconsistent");
  require(activation == "tanh", "MlpParams: unsupported activation '" + activation + "'");
  for (std::size_t k = 0; k < W.size(); ++k) {
    require(b[k].size() == W[k].rows(), "MlpParams: bias shape mismatch at layer " + std::to_string(k));
    if (k + 1 < W.size())
      require(W[k + 1].cols() == W[k].rows(), "MlpParams: layer shape mismatch at " + std::to_string(k));
  }
}

MlpGrad MlpGrad::zeros_like(const MlpParams& p) {
  MlpGrad g;
  for (std::size_t k = 0; k < p.W.size(); ++k) {
    g.dW.push_back(Matrix::Zero(p.W[k].rows(), p.W[k].cols()));
    g.db.push_back(Vector::Zero(p.b[k].size()));
  }
  return g;
}

void MlpGrad::scale(double s) {
  for (auto& m : dW) m *= s;
  for (auto& v : db) v *= s;
}

void MlpGrad::axpy(double a, const MlpGrad& other) {
  for (std::size_t k = 0; k < dW.size(); ++k) {
    dW[k] += a * other.dW[k];
    db[k] += a * other.db[k];
  }
}

Vector MlpGrad::flatten() const {
  int count = 0;
  for (std::size_t k = 0; k < dW.size(); ++k) count += static_cast<int>(dW[k].size() + db[k].size());
  Vector v(count);
  int off = 0;
  for (std::size_t k = 0; k < dW.size(); ++k) {
    v.segment(off, dW[k].size()) = Eigen::Map<const Vector>(dW[k].data(), dW[k].size());
    off += static_cast<int>(dW[k].size());
    v.segment(off, db[k].size()) = db[k];
    off += static_cast<int>(db[k].size());
  }
  return v;
}

Vector mlp_forward(const MlpParams& p, const Vector& x, MlpCache* cache) {
  require(x.size() == p.input_dim(), "mlp_forward: input dimension mismatch");
  const int L = p.num_affine() - 1;  // hidden layers
  Vector a = x;
  if (cache) {
    cache->a.assign(1, x);
    cache->z.clear();
    cache->has_jacobian = false;
  }
  for (int k = 0; k < L; ++k) {
    Vector z = p.W[k] * a + p.b[k];
    a = z.array().tanh();
    if (cache) {
      cache->z.push_back(std::move(z));
      cache->a.push_back(a);
    }
  }
  return p.W[L] * a + p.b[L];
}

Matrix mlp_input_jacobian(const MlpParams& p, const Vector& x, MlpCache* cache) {
  MlpCache local;
  MlpCache& c = cache ? *cache : local;
  mlp_forward(p, x, &c);
  const int L = p.num_affine() - 1;
  c.G.clear();
  Matrix G = Matrix::Identity(p.input_dim(), p.input_dim());
  c.G.push_back(G);
  for (int k = 0; k < L; ++k) {
    const Vector d = 1.0 - c.a[k + 1].array().square();  // tanh'
    G = d.asDiagonal() * (p.W[k] * G);
    c.G.push_back(G);
  }
  c.has_jacobian = true;
  return p.W[L] * G;
}

void mlp_backprop_value(const MlpParams& p, const MlpCache& cache, const Vector& seed, MlpGrad& g) {
  const int L = p.num_affine() - 1;
  require(seed.size() == p.output_dim(), "mlp_backprop_value: seed dimension mismatch");
  Vector delta = seed;
  g.dW[L] += delta * cache.a[L].transpose();
  g.db[L] += delta;
  for (int k = L - 1; k >= 0; --k) {
    const Vector d = 1.0 - cache.a[k + 1].array().square();
    delta = (p.W[k + 1].transpose() * delta).cwiseProduct(d);
    g.dW[k] += delta * cache.a[k].transpose();
    g.db[k] += delta;
  }
}

void mlp_backprop_jacobian(const MlpParams& p, const MlpCache& cache, const Matrix& U, MlpGrad& g) {
  require(cache.has_jacobian, "mlp_backprop_jacobian: cache lacks Jacobian accumulators");
  const int L = p.num_affine() - 1;
  require(U.rows() == p.output_dim() && U.cols() == p.input_dim(),
          "mlp_backprop_jacobian: upstream shape mismatch");

  // phi = tr(U' W_out G_L) with G_k = D_k W_k G_{k-1}, D_k = diag(1 - a_k^2).
  g.dW[L] += U * cache.G[L].transpose();

  // upstream M_k = dphi/dG_k, plus the activation chain eps_k = dphi/dz_k
  std::vector<Matrix> M(L + 1);
  std::vector<Vector> cdiag(L + 1);
  if (L >= 1) {
    M[L] = p.W[L].transpose() * U;
    for (int k = L; k >= 1; --k) {
      const Vector d = 1.0 - cache.a[k].array().square();
      // direct dependence of G_k on W_k and on d via D_k
      g.dW[k - 1] += d.asDiagonal() * M[k] * cache.G[k - 1].transpose();
      cdiag[k] = ((p.W[k - 1] * cache.G[k - 1]).cwiseProduct(M[k])).rowwise().sum();
      if (k >= 2) M[k - 1] = p.W[k - 1].transpose() * (d.asDiagonal() * M[k]);
    }
    // second sweep: phi depends on a_k through D_k; da_k/dz_k = diag(d)
    Vector eps = Vector::Zero(0);
    for (int k = L; k >= 1; --k) {
      const Vector d = 1.0 - cache.a[k].array().square();
      Vector dphi_da = (-2.0) * cache.a[k].cwiseProduct(cdiag[k]);
      if (k < L) dphi_da += p.W[k].transpose() * eps;  // a_k feeds z_{k+1} = W[k] a_k + b[k]
      eps = dphi_da.cwiseProduct(d);
      g.dW[k - 1] += eps * cache.a[k - 1].transpose();
      g.db[k - 1] += eps;
    }
  }
}

Vector mlp_param_gradient(const MlpParams& p, const Vector& x, const Vector& seed) {
  MlpCache cache;
  mlp_forward(p, x, &cache);
  MlpGrad g = MlpGrad::zeros_like(p);
  mlp_backprop_value(p, cache, seed, g);
  return g.flatten();
}

}  // namespace qrnet
