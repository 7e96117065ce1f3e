#include "compdiff/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "compdiff/errors.hpp"
#include "compdiff/rng.hpp"

namespace compdiff {
namespace {

constexpr int kMaxChunk = 1024;

void validate_arch(const MlpArch& a) {
  if (a.hidden < 1 || a.blocks < 0 || a.time_embed < 4 || a.time_embed % 2 != 0)
    throw ConfigError(
        "mlp arch invalid: need hidden >= 1, blocks >= 0, time_embed even and >= 4");
}

}  // namespace

const char* to_string(Parameterization p) {
  switch (p) {
    case Parameterization::Epsilon: return "epsilon";
    case Parameterization::EnergyL2: return "energy_l2";
    case Parameterization::EnergyDae: return "energy_dae";
    case Parameterization::EnergyIp: return "energy_ip";
  }
  return "?";
}

Parameterization parameterization_from_string(const std::string& s) {
  if (s == "epsilon") return Parameterization::Epsilon;
  if (s == "energy_l2") return Parameterization::EnergyL2;
  if (s == "energy_dae") return Parameterization::EnergyDae;
  if (s == "energy_ip") return Parameterization::EnergyIp;
  throw ConfigError("unknown parameterization \"" + s +
                    "\" (expected epsilon, energy_l2, energy_dae or energy_ip)");
}

std::size_t param_count(const MlpArch& a) {
  const std::size_t h = a.hidden, e = a.time_embed, b = a.blocks;
  return h * 2 + h * e + h + b * (2 * h * h + 2 * h) + 2 * h + 2;
}

void time_features(double u, int E, double* out) {
  const int half = E / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::pow(1000.0, double(k) / double(half - 1));
    out[2 * k] = std::sin(freq * u);
    out[2 * k + 1] = std::cos(freq * u);
  }
}

namespace detail {

MlpGraph build_mlp_graph(ad::Tape& tape, const MlpArch& arch,
                         Parameterization p, const double* params,
                         const Vec2* xs, const double* u, int n,
                         bool params_rg, bool x_rg) {
  const int h = arch.hidden, E = arch.time_embed;
  // eps for the energy forms is an input gradient; x must be differentiable.
  if (p != Parameterization::Epsilon) x_rg = true;

  MlpGraph g;
  ad::Tensor X(n, 2);
  for (int i = 0; i < n; ++i) {
    X.at(i, 0) = xs[i].x;
    X.at(i, 1) = xs[i].y;
  }
  g.x = tape.leaf(std::move(X), x_rg);

  ad::Tensor TE(n, E);
  for (int i = 0; i < n; ++i) time_features(u[i], E, &TE.v[std::size_t(i) * E]);
  const ad::NodeId te = tape.leaf(std::move(TE), false);

  const double* w = params;
  auto take = [&](int r, int c) {
    ad::Tensor t(r, c);
    std::memcpy(t.v.data(), w, sizeof(double) * t.size());
    w += t.size();
    const ad::NodeId id = tape.leaf(std::move(t), params_rg);
    g.params.push_back(id);
    return id;
  };

  const ad::NodeId Wx = take(h, 2);
  const ad::NodeId Wt = take(h, E);
  const ad::NodeId b0 = take(1, h);
  ad::NodeId hid = tape.silu(tape.add_rowvec(
      tape.add(tape.matmul(g.x, false, Wx, true), tape.matmul(te, false, Wt, true)),
      b0));
  for (int bk = 0; bk < arch.blocks; ++bk) {
    const ad::NodeId W1 = take(h, h);
    const ad::NodeId b1 = take(1, h);
    const ad::NodeId W2 = take(h, h);
    const ad::NodeId b2 = take(1, h);
    const ad::NodeId mid =
        tape.silu(tape.add_rowvec(tape.matmul(hid, false, W1, true), b1));
    hid = tape.add(hid, tape.add_rowvec(tape.matmul(mid, false, W2, true), b2));
  }
  const ad::NodeId Wo = take(2, h);
  const ad::NodeId bo = take(1, 2);
  const ad::NodeId S = tape.add_rowvec(tape.matmul(hid, false, Wo, true), bo);

  switch (p) {
    case Parameterization::Epsilon:
      g.eps = S;
      return g;
    case Parameterization::EnergyL2:
      g.f = tape.scale(tape.rowsum(tape.mul(S, S)), -0.5);
      break;
    case Parameterization::EnergyDae: {
      const ad::NodeId d = tape.sub(g.x, S);
      g.f = tape.scale(tape.rowsum(tape.mul(d, d)), -0.5);
      break;
    }
    case Parameterization::EnergyIp:
      g.f = tape.rowsum(tape.mul(g.x, S));
      break;
  }
  // Rows are independent, so seeding with ones gives each row its own
  // gradient d f_i / d x_i.
  const ad::NodeId gx = tape.gradients(g.f, -1, {g.x})[0];
  g.eps = tape.scale(gx, -1.0);
  return g;
}

void flatten_param_grads(const ad::Tape& tape, const MlpArch& arch,
                         const std::vector<ad::NodeId>& adjoints,
                         double* grad) {
  const int h = arch.hidden, E = arch.time_embed;
  std::vector<std::pair<int, int>> shapes;
  shapes.emplace_back(h, 2);
  shapes.emplace_back(h, E);
  shapes.emplace_back(1, h);
  for (int bk = 0; bk < arch.blocks; ++bk) {
    shapes.emplace_back(h, h);
    shapes.emplace_back(1, h);
    shapes.emplace_back(h, h);
    shapes.emplace_back(1, h);
  }
  shapes.emplace_back(2, h);
  shapes.emplace_back(1, 2);
  if (shapes.size() != adjoints.size())
    throw ConfigError("flatten_param_grads: adjoint count does not match arch");

  double* out = grad;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const std::size_t len = std::size_t(shapes[i].first) * shapes[i].second;
    if (adjoints[i] >= 0) {
      const ad::Tensor& t = tape.val(adjoints[i]);
      std::memcpy(out, t.v.data(), sizeof(double) * len);
    } else {
      std::memset(out, 0, sizeof(double) * len);
    }
    out += len;
  }
}

}  // namespace detail

NeuralModel::NeuralModel(MlpArch arch, Parameterization p, NoiseSchedule sched,
                         std::uint64_t init_seed)
    : arch_(arch), param_(p), sched_(std::move(sched)) {
  validate_arch(arch_);
  w_.assign(param_count(arch_), 0.0);

  RngStream rng(init_seed, 0);
  const int h = arch_.hidden, E = arch_.time_embed;
  double* w = w_.data();
  auto fill = [&](int r, int c, double std) {
    for (int i = 0; i < r * c; ++i) *w++ = std * rng.normal();
  };
  auto skip = [&](int n) { w += n; };  // stays zero

  fill(h, 2, 1.0 / std::sqrt(2.0));
  fill(h, E, 1.0 / std::sqrt(double(E)));
  skip(h);
  for (int bk = 0; bk < arch_.blocks; ++bk) {
    fill(h, h, 1.0 / std::sqrt(double(h)));
    skip(h);
    fill(h, h, 1.0 / std::sqrt(double(h)));
    skip(h);
  }
  // Zero-initialized output layer: eps_theta == 0 at t=0 of training for the
  // Epsilon form, and a smooth quadratic energy for the energy forms.
  skip(2 * h + 2);
}

void NeuralModel::raw_batch(const Vec2* xs, const int* ts, int n, double* f_out,
                            Vec2* eps_out) const {
  if (f_out && param_ == Parameterization::Epsilon)
    throw CapabilityError(
        "epsilon-parameterized model exposes no energy (use an energy_* "
        "parameterization)");
  const int T = sched_.steps();
  const bool need_x = param_ != Parameterization::Epsilon;
  std::vector<double> u;
  for (int off = 0; off < n; off += kMaxChunk) {
    const int m = std::min(kMaxChunk, n - off);
    u.resize(m);
    for (int i = 0; i < m; ++i) {
      (void)sched_.sigma(ts[off + i]);  // validates t in [1, T]
      u[i] = double(ts[off + i]) / T;
    }
    ad::Tape tape;
    auto g = detail::build_mlp_graph(tape, arch_, param_, w_.data(), xs + off,
                                     u.data(), m, false, need_x);
    const ad::Tensor& e = tape.val(g.eps);
    for (int i = 0; i < m; ++i) eps_out[off + i] = {e.at(i, 0), e.at(i, 1)};
    if (f_out) {
      const ad::Tensor& f = tape.val(g.f);
      for (int i = 0; i < m; ++i) f_out[off + i] = f.v[i];
    }
  }
}

Vec2 NeuralModel::eps(const Vec2& x, int t) const {
  Vec2 out;
  raw_batch(&x, &t, 1, nullptr, &out);
  return out;
}

Vec2 NeuralModel::score(const Vec2& x, int t) const {
  const Vec2 e = eps(x, t);
  const double s = sched_.sigma(t);
  return {-e.x / s, -e.y / s};
}

double NeuralModel::energy(const Vec2& x, int t) const {
  if (!has_energy())
    throw CapabilityError(
        "epsilon-parameterized model exposes no energy (use an energy_* "
        "parameterization)");
  double f;
  Vec2 e;
  raw_batch(&x, &t, 1, &f, &e);
  return f / sched_.sigma(t);
}

void NeuralModel::score_batch(const Vec2* xs, int n, int t, Vec2* out) const {
  if (n <= 0) return;
  std::vector<int> ts(n, t);
  raw_batch(xs, ts.data(), n, nullptr, out);
  const double s = sched_.sigma(t);
  for (int i = 0; i < n; ++i) out[i] = {-out[i].x / s, -out[i].y / s};
}

void NeuralModel::energy_score_batch(const Vec2* xs, int n, int t,
                                     double* e_out, Vec2* s_out) const {
  if (!has_energy())
    throw CapabilityError(
        "epsilon-parameterized model exposes no energy (use an energy_* "
        "parameterization)");
  if (n <= 0) return;
  std::vector<int> ts(n, t);
  raw_batch(xs, ts.data(), n, e_out, s_out);
  const double s = sched_.sigma(t);
  for (int i = 0; i < n; ++i) {
    e_out[i] /= s;
    s_out[i] = {-s_out[i].x / s, -s_out[i].y / s};
  }
}

}  // namespace compdiff
