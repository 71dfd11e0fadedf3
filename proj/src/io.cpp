#include "qrnet/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace qrnet {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// SHA-256 (FIPS 180-4)
// ---------------------------------------------------------------------------

namespace {

struct Sha256 {
  std::uint32_t h[8] = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
                        0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
  std::uint64_t total = 0;
  unsigned char buf[64];
  std::size_t buflen = 0;

  static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void block(const unsigned char* p) {
    static const std::uint32_t K[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
        0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
        0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
        0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
        0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
        0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(p[4 * i]) << 24) | (std::uint32_t(p[4 * i + 1]) << 16) |
             (std::uint32_t(p[4 * i + 2]) << 8) | std::uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4], f = h[5], g = h[6], hh = h[7];
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
      const std::uint32_t ch = (e & f) ^ (~e & g);
      const std::uint32_t t1 = hh + S1 + ch + K[i] + w[i];
      const std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
      const std::uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
      const std::uint32_t t2 = S0 + maj;
      hh = g; g = f; f = e; e = d + t1; d = c; c = b; b = a; a = t1 + t2;
    }
    h[0] += a; h[1] += b; h[2] += c; h[3] += d; h[4] += e; h[5] += f; h[6] += g; h[7] += hh;
  }

  void update(const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    total += len;
    while (len > 0) {
      const std::size_t take = std::min(len, sizeof(buf) - buflen);
      std::memcpy(buf + buflen, p, take);
      buflen += take;
      p += take;
      len -= take;
      if (buflen == 64) {
        block(buf);
        buflen = 0;
      }
    }
  }

  std::string hex() {
    const std::uint64_t bits = total * 8;
    unsigned char pad = 0x80;
    update(&pad, 1);
    unsigned char zero = 0;
    while (buflen != 56) update(&zero, 1);
    unsigned char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
    update(lenbuf, 8);
    std::ostringstream oss;
    for (std::uint32_t v : h) {
      char b[9];
      std::snprintf(b, sizeof(b), "%08x", v);
      oss << b;
    }
    return oss.str();
  }
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 s;
  s.update(bytes.data(), bytes.size());
  return s.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  return sha256_hex(read_text_file(path));
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open for writing: " + path.string());
  out << content;
  require(out.good(), "write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open: " + path.string());
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

namespace {

json vec_to_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from_json(const json& a) {
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
  return v;
}

json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Matrix mat_from_json(const json& rows) {
  const int nr = static_cast<int>(rows.size());
  if (nr == 0) return Matrix();
  const int nc = static_cast<int>(rows[0].size());
  Matrix m(nr, nc);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

json bounds_to_json(const ControlBounds& b) {
  json j;
  j["u_min"] = vec_to_json(b.u_min);
  j["u_max"] = vec_to_json(b.u_max);
  json bd = json::array();
  for (int i = 0; i < b.dim(); ++i) bd.push_back(static_cast<bool>(b.bounded[i]));
  j["bounded"] = bd;
  return j;
}

ControlBounds bounds_from_json(const json& j) {
  ControlBounds b;
  b.u_min = vec_from_json(j.at("u_min"));
  b.u_max = vec_from_json(j.at("u_max"));
  const auto& bd = j.at("bounded");
  b.bounded = BoolArray::Constant(static_cast<int>(bd.size()), false);
  for (std::size_t i = 0; i < bd.size(); ++i) b.bounded[static_cast<int>(i)] = bd[i].get<bool>();
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// model configuration
// ---------------------------------------------------------------------------

UavParams load_uav_params(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  UavParams p;
  p.schema_version = j.value("schema_version", 1);
  auto get = [&](const char* name, double dflt) { return j.value(name, dflt); };
  p.mass = get("mass", p.mass);
  if (j.contains("inertia")) {
    const Matrix J = mat_from_json(j["inertia"]);
    require(J.rows() == 3 && J.cols() == 3, "uav params: inertia must be 3x3");
    p.inertia = J;
  }
  p.S = get("wing_area", p.S);
  p.b = get("wing_span", p.b);
  p.c = get("wing_chord", p.c);
  p.rho = get("air_density", p.rho);
  p.gravity = get("gravity", p.gravity);
  p.R_prop = get("prop_radius", p.R_prop);
  p.C_prop = get("C_prop", p.C_prop);
  p.k_motor = get("k_motor", p.k_motor);
  p.C_L0 = get("C_L0", p.C_L0);
  p.C_Lalpha = get("C_L_alpha", p.C_Lalpha);
  p.C_Lq = get("C_L_q", p.C_Lq);
  p.C_Ldeltae = get("C_L_delta_e", p.C_Ldeltae);
  p.C_D0 = get("C_D0", p.C_D0);
  p.C_Dq = get("C_D_q", p.C_Dq);
  p.C_Ddeltae = get("C_D_delta_e", p.C_Ddeltae);
  p.oswald_e = get("oswald_e", p.oswald_e);
  p.C_m0 = get("C_m0", p.C_m0);
  p.C_malpha = get("C_m_alpha", p.C_malpha);
  p.C_mq = get("C_m_q", p.C_mq);
  p.C_mdeltae = get("C_m_delta_e", p.C_mdeltae);
  p.C_m_inf = get("C_m_inf", p.C_m_inf);
  p.alpha_stall = get("alpha_stall", p.alpha_stall);
  p.blend_rate = get("blend_rate", p.blend_rate);
  p.C_Y0 = get("C_Y0", p.C_Y0);
  p.C_Ybeta = get("C_Y_beta", p.C_Ybeta);
  p.C_Yp = get("C_Y_p", p.C_Yp);
  p.C_Yr = get("C_Y_r", p.C_Yr);
  p.C_Ydeltaa = get("C_Y_delta_a", p.C_Ydeltaa);
  p.C_Ydeltar = get("C_Y_delta_r", p.C_Ydeltar);
  p.C_l0 = get("C_l0", p.C_l0);
  p.C_lbeta = get("C_l_beta", p.C_lbeta);
  p.C_lp = get("C_l_p", p.C_lp);
  p.C_lr = get("C_l_r", p.C_lr);
  p.C_ldeltaa = get("C_l_delta_a", p.C_ldeltaa);
  p.C_ldeltar = get("C_l_delta_r", p.C_ldeltar);
  p.C_n0 = get("C_n0", p.C_n0);
  p.C_nbeta = get("C_n_beta", p.C_nbeta);
  p.C_np = get("C_n_p", p.C_np);
  p.C_nr = get("C_n_r", p.C_nr);
  p.C_ndeltaa = get("C_n_delta_a", p.C_ndeltaa);
  p.C_ndeltar = get("C_n_delta_r", p.C_ndeltar);
  p.deltaa_max = get("delta_a_max", p.deltaa_max);
  p.deltae_max = get("delta_e_max", p.deltae_max);
  p.deltar_max = get("delta_r_max", p.deltar_max);
  p.validate();
  return p;
}

void save_uav_params(const UavParams& p, const std::filesystem::path& path) {
  json j;
  j["schema_version"] = p.schema_version;
  j["mass"] = p.mass;
  j["inertia"] = mat_to_json(p.inertia);
  j["wing_area"] = p.S;
  j["wing_span"] = p.b;
  j["wing_chord"] = p.c;
  j["air_density"] = p.rho;
  j["gravity"] = p.gravity;
  j["prop_radius"] = p.R_prop;
  j["C_prop"] = p.C_prop;
  j["k_motor"] = p.k_motor;
  j["C_L0"] = p.C_L0;
  j["C_L_alpha"] = p.C_Lalpha;
  j["C_L_q"] = p.C_Lq;
  j["C_L_delta_e"] = p.C_Ldeltae;
  j["C_D0"] = p.C_D0;
  j["C_D_q"] = p.C_Dq;
  j["C_D_delta_e"] = p.C_Ddeltae;
  j["oswald_e"] = p.oswald_e;
  j["C_m0"] = p.C_m0;
  j["C_m_alpha"] = p.C_malpha;
  j["C_m_q"] = p.C_mq;
  j["C_m_delta_e"] = p.C_mdeltae;
  j["C_m_inf"] = p.C_m_inf;
  j["alpha_stall"] = p.alpha_stall;
  j["blend_rate"] = p.blend_rate;
  j["C_Y0"] = p.C_Y0;
  j["C_Y_beta"] = p.C_Ybeta;
  j["C_Y_p"] = p.C_Yp;
  j["C_Y_r"] = p.C_Yr;
  j["C_Y_delta_a"] = p.C_Ydeltaa;
  j["C_Y_delta_r"] = p.C_Ydeltar;
  j["C_l0"] = p.C_l0;
  j["C_l_beta"] = p.C_lbeta;
  j["C_l_p"] = p.C_lp;
  j["C_l_r"] = p.C_lr;
  j["C_l_delta_a"] = p.C_ldeltaa;
  j["C_l_delta_r"] = p.C_ldeltar;
  j["C_n0"] = p.C_n0;
  j["C_n_beta"] = p.C_nbeta;
  j["C_n_p"] = p.C_np;
  j["C_n_r"] = p.C_nr;
  j["C_n_delta_a"] = p.C_ndeltaa;
  j["C_n_delta_r"] = p.C_ndeltar;
  j["delta_a_max"] = p.deltaa_max;
  j["delta_e_max"] = p.deltae_max;
  j["delta_r_max"] = p.deltar_max;
  write_text_file(path, j.dump(2) + "\n");
}

std::unique_ptr<DynamicsModel> load_model_json(const std::string& text,
                                               const std::filesystem::path& base_dir) {
  const json j = json::parse(text);
  const std::string kind = j.at("model").get<std::string>();
  if (kind == "burgers") {
    BurgersConfig cfg = BurgersConfig::defaults(j.value("n", 64), j.value("m", 2));
    cfg.nu = j.value("nu", cfg.nu);
    cfg.beta = j.value("beta", cfg.beta);
    if (j.contains("alpha")) cfg.alpha = vec_from_json(j["alpha"]);
    if (j.contains("b_cols")) cfg.b_cols = mat_from_json(j["b_cols"]);
    if (j.contains("q_diag")) cfg.q_diag = vec_from_json(j["q_diag"]);
    if (j.contains("r_diag")) cfg.r_diag = vec_from_json(j["r_diag"]);
    if (j.contains("u_min") && j.contains("u_max")) {
      cfg.has_bounds = true;
      cfg.u_min = vec_from_json(j["u_min"]);
      cfg.u_max = vec_from_json(j["u_max"]);
    }
    return std::make_unique<BurgersModel>(cfg);
  }
  if (kind == "uav") {
    UavParams params;
    if (j.contains("params_file")) {
      std::filesystem::path pf = j["params_file"].get<std::string>();
      if (pf.is_relative()) pf = base_dir / pf;
      params = load_uav_params(pf);
    }
    const double airspeed = j.value("airspeed", 20.0);
    return std::make_unique<UavModel>(params, airspeed);
  }
  throw std::invalid_argument("load_model: unknown model kind '" + kind + "'");
}

std::unique_ptr<DynamicsModel> load_model(const std::filesystem::path& config_path) {
  return load_model_json(read_text_file(config_path), config_path.parent_path());
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

std::string checkpoint_to_json(const PolicyCheckpoint& ckpt) {
  json j;
  j["schema_version"] = ckpt.schema_version;
  j["kind"] = kind_name(ckpt.kind);
  j["dims"] = {{"n", ckpt.state_dim()},
               {"m", ckpt.control_dim()},
               {"widths", ckpt.mlp.widths()}};
  j["activation"] = ckpt.mlp.activation;
  json layers = json::array();
  for (std::size_t k = 0; k < ckpt.mlp.W.size(); ++k) {
    json layer;
    layer["W"] = mat_to_json(ckpt.mlp.W[k]);
    layer["b"] = vec_to_json(ckpt.mlp.b[k]);
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  j["x_f"] = vec_to_json(ckpt.x_f);
  j["u_f"] = vec_to_json(ckpt.u_f);
  j["bounds"] = bounds_to_json(ckpt.bounds);
  j["P"] = mat_to_json(ckpt.P);
  j["K"] = mat_to_json(ckpt.K);
  j["scale_center"] = vec_to_json(ckpt.scaling.center);
  j["scale_half_range"] = vec_to_json(ckpt.scaling.half_range);
  j["frozen_N_xf"] = vec_to_json(ckpt.frozen_N_xf);
  if (is_jacobian_kind(ckpt.kind)) j["frozen_J_xf"] = mat_to_json(ckpt.frozen_J_xf);
  return j.dump(2) + "\n";
}

PolicyCheckpoint checkpoint_from_json(const std::string& text) {
  const json j = json::parse(text);
  PolicyCheckpoint ckpt;
  ckpt.schema_version = j.at("schema_version").get<int>();
  ckpt.kind = parse_kind(j.at("kind").get<std::string>());
  ckpt.mlp.activation = j.at("activation").get<std::string>();
  for (const auto& layer : j.at("layers")) {
    ckpt.mlp.W.push_back(mat_from_json(layer.at("W")));
    ckpt.mlp.b.push_back(vec_from_json(layer.at("b")));
  }
  ckpt.mlp.validate();
  ckpt.x_f = vec_from_json(j.at("x_f"));
  ckpt.u_f = vec_from_json(j.at("u_f"));
  ckpt.bounds = bounds_from_json(j.at("bounds"));
  ckpt.P = mat_from_json(j.at("P"));
  ckpt.K = mat_from_json(j.at("K"));
  ckpt.scaling.center = vec_from_json(j.at("scale_center"));
  ckpt.scaling.half_range = vec_from_json(j.at("scale_half_range"));
  ckpt.frozen_N_xf = vec_from_json(j.at("frozen_N_xf"));
  if (j.contains("frozen_J_xf")) ckpt.frozen_J_xf = mat_from_json(j.at("frozen_J_xf"));
  return ckpt;
}

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_to_json(ckpt));
}

PolicyCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

void save_lqr_policy(const LqrSolution& sol, const EquilibriumPair& eq,
                     const std::filesystem::path& path) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = "lqr";
  j["x_f"] = vec_to_json(eq.x_f);
  j["u_f"] = vec_to_json(eq.u_f);
  j["P"] = mat_to_json(sol.P_full);
  j["K"] = mat_to_json(sol.K_full);
  j["riccati_residual"] = sol.riccati_residual;
  j["closed_loop_abscissa"] = sol.closed_loop_abscissa;
  write_text_file(path, j.dump(2) + "\n");
}

std::unique_ptr<FeedbackPolicy> load_policy(const std::filesystem::path& path,
                                            const DynamicsModel& model) {
  const json j = json::parse(read_text_file(path));
  if (j.at("kind").get<std::string>() == "lqr") {
    LqrSolution sol;
    sol.P_full = mat_from_json(j.at("P"));
    sol.K_full = mat_from_json(j.at("K"));
    sol.P = sol.P_full;
    sol.K = sol.K_full;
    EquilibriumPair eq{vec_from_json(j.at("x_f")), vec_from_json(j.at("u_f"))};
    return std::make_unique<LqrFeedbackPolicy>(lqr_policy(sol, eq));
  }
  return std::make_unique<NnFeedbackPolicy>(checkpoint_from_json(read_text_file(path)), model);
}

// ---------------------------------------------------------------------------
// datasets
// ---------------------------------------------------------------------------

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const int n = ds.records.empty() ? 0 : static_cast<int>(ds.records.front().x.size());
  const int m = ds.records.empty() ? 0 : static_cast<int>(ds.records.front().u.size());

  json meta;
  meta["schema_version"] = 1;
  meta["model_id"] = ds.model_id;
  meta["method"] = ds.method;
  meta["n_requested"] = ds.n_requested;
  meta["n_converged"] = ds.n_converged;
  meta["n_discarded"] = ds.n_discarded;
  meta["seed"] = ds.seed;
  meta["count"] = ds.records.size();
  meta["mean_horizon"] = ds.mean_horizon;
  meta["degraded"] = ds.degraded;
  meta["state_dim"] = n;
  meta["control_dim"] = m;
  if (!ds.records.empty()) {
    Vector lo = ds.records.front().x, hi = ds.records.front().x, mean = Vector::Zero(n);
    for (const auto& r : ds.records) {
      lo = lo.cwiseMin(r.x);
      hi = hi.cwiseMax(r.x);
      mean += r.x;
    }
    mean /= static_cast<double>(ds.records.size());
    meta["scaling"] = {{"x_min", vec_to_json(lo)}, {"x_max", vec_to_json(hi)}, {"x_mean", vec_to_json(mean)}};
  }
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");

  std::ostringstream pts;
  pts << "traj_id,t";
  for (int i = 0; i < n; ++i) pts << ",x_" << i;
  for (int i = 0; i < n; ++i) pts << ",lam_" << i;
  for (int i = 0; i < m; ++i) pts << ",u_" << i;
  pts << "\n";
  for (const auto& r : ds.records) {
    pts << r.traj_id << "," << format_double(r.t);
    for (int i = 0; i < n; ++i) pts << "," << format_double(r.x[i]);
    for (int i = 0; i < n; ++i) {
      pts << ",";
      if (r.lam.size()) pts << format_double(r.lam[i]);
    }
    for (int i = 0; i < m; ++i) pts << "," << format_double(r.u[i]);
    pts << "\n";
  }
  write_text_file(dir / "points.csv", pts.str());

  std::ostringstream vals;
  vals << "traj_id";
  for (int i = 0; i < n; ++i) vals << ",x0_" << i;
  vals << ",V\n";
  for (std::size_t k = 0; k < ds.values.size(); ++k) {
    vals << k;
    for (int i = 0; i < n; ++i) vals << "," << format_double(ds.values[k].first[i]);
    vals << "," << format_double(ds.values[k].second) << "\n";
  }
  write_text_file(dir / "values.csv", vals.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  const json meta = json::parse(read_text_file(dir / "meta.json"));
  ds.model_id = meta.at("model_id").get<std::string>();
  ds.method = meta.at("method").get<std::string>();
  ds.n_requested = meta.at("n_requested").get<int>();
  ds.n_converged = meta.at("n_converged").get<int>();
  ds.n_discarded = meta.at("n_discarded").get<int>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.mean_horizon = meta.at("mean_horizon").get<double>();
  ds.degraded = meta.at("degraded").get<bool>();
  const int n = meta.at("state_dim").get<int>();
  const int m = meta.at("control_dim").get<int>();

  std::istringstream pts(read_text_file(dir / "points.csv"));
  std::string line;
  std::getline(pts, line);  // header
  while (std::getline(pts, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    require(static_cast<int>(f.size()) == 2 + 2 * n + m, "points.csv: bad column count");
    DatasetRecord rec;
    rec.traj_id = std::stoi(f[0]);
    rec.t = std::stod(f[1]);
    rec.x.resize(n);
    for (int i = 0; i < n; ++i) rec.x[i] = std::stod(f[2 + i]);
    if (!f[2 + n].empty()) {
      rec.lam.resize(n);
      for (int i = 0; i < n; ++i) rec.lam[i] = std::stod(f[2 + n + i]);
    }
    rec.u.resize(m);
    for (int i = 0; i < m; ++i) rec.u[i] = std::stod(f[2 + 2 * n + i]);
    ds.records.push_back(std::move(rec));
  }

  std::istringstream vals(read_text_file(dir / "values.csv"));
  std::getline(vals, line);  // header
  while (std::getline(vals, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    require(static_cast<int>(f.size()) == 2 + n, "values.csv: bad column count");
    Vector x0(n);
    for (int i = 0; i < n; ++i) x0[i] = std::stod(f[1 + i]);
    ds.values.emplace_back(std::move(x0), std::stod(f.back()));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

std::string train_report_to_json(const TrainReport& report) {
  json j;
  j["final_train_loss"] = report.final_train_loss;
  j["rm_l2"] = report.rm_l2;
  j["wall_time_s"] = report.wall_time_s;
  j["seed"] = report.seed;
  j["iterations"] = report.iterations;
  j["loss_history"] = report.loss_history;
  return j.dump(2) + "\n";
}

void save_mc_runs_csv(const std::vector<McRun>& runs, const std::filesystem::path& path) {
  std::ostringstream oss;
  oss << "run,final_error,cost,termination,t_final\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    oss << i << "," << format_double(runs[i].final_error) << "," << format_double(runs[i].cost) << ","
        << termination_name(runs[i].termination) << "," << format_double(runs[i].t_final) << "\n";
  }
  write_text_file(path, oss.str());
}

}  // namespace qrnet
