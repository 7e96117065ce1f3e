#include "compdiff/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "compdiff/errors.hpp"
#include "compdiff/parallel.hpp"

namespace compdiff {

namespace {
constexpr double kLogZero = -1e300;
constexpr double kDensityFloor = 1e-300;
}  // namespace

GridOracle::GridOracle(GridSpec spec, const std::function<double(Vec2)>& log_density)
    : spec_(spec) {
  if (spec_.res < 8)
    throw ConfigError("grid: resolution must be >= 8, got " + std::to_string(spec_.res));
  if (!(spec_.lo.x < spec_.hi.x) || !(spec_.lo.y < spec_.hi.y))
    throw ConfigError("grid: lo must be strictly below hi");
  dx_ = (spec_.hi.x - spec_.lo.x) / (spec_.res - 1);
  dy_ = (spec_.hi.y - spec_.lo.y) / (spec_.res - 1);
  values_.resize(size_t(spec_.res) * spec_.res);
  parallel_for(spec_.res, [&](std::int64_t i) {
    double x = node_x(int(i));
    for (int j = 0; j < spec_.res; ++j)
      values_[size_t(i) * spec_.res + j] = log_density({x, node_y(j)});
  });
  finalize();
}

GridOracle::GridOracle(GridSpec spec, std::vector<double> log_values)
    : spec_(spec), values_(std::move(log_values)) {
  if (spec_.res < 8)
    throw ConfigError("grid: resolution must be >= 8, got " + std::to_string(spec_.res));
  if (values_.size() != size_t(spec_.res) * spec_.res)
    throw ConfigError("grid: value table size does not match resolution");
  dx_ = (spec_.hi.x - spec_.lo.x) / (spec_.res - 1);
  dy_ = (spec_.hi.y - spec_.lo.y) / (spec_.res - 1);
  finalize();
}

void GridOracle::finalize() {
  const int R = spec_.res;
  double vmax = kLogZero;
  for (double v : values_) {
    if (!(v <= 0) && !(v > 0))
      throw NumericError("grid: NaN log density in table");
    vmax = std::fmax(vmax, v);
  }
  if (vmax <= kLogZero)
    throw ConfigError("grid: density vanishes on the whole grid");

  // Trapezoid normalizer in a fixed serial order (row by row).
  double total = 0.0;
  for (int i = 0; i < R; ++i) {
    double row = 0.0;
    for (int j = 0; j < R; ++j)
      row += trapezoid_weight_y(j) * std::exp(values_[size_t(i) * R + j] - vmax);
    total += trapezoid_weight_x(i) * row;
  }
  log_norm_ = vmax + std::log(total);
  for (double& v : values_) v -= log_norm_;

  // Cell masses (bilinear average of corners times cell area) and the
  // marginal-then-conditional CDF tables.
  const int C = R - 1;
  cell_cdf_.resize(size_t(C) * C);
  double run_total = 0.0;
  for (int i = 0; i < C; ++i) {
    for (int j = 0; j < C; ++j) {
      double m = 0.25 *
                 (std::exp(values_[size_t(i) * R + j]) +
                  std::exp(values_[size_t(i) * R + j + 1]) +
                  std::exp(values_[size_t(i + 1) * R + j]) +
                  std::exp(values_[size_t(i + 1) * R + j + 1])) *
                 dx_ * dy_;
      run_total += m;
      cell_cdf_[size_t(i) * C + j] = run_total;
    }
  }
  cell_total_ = run_total;
  if (!(cell_total_ > 0.0))
    throw NumericError("grid: sampling table has zero total mass");
}

double GridOracle::log_density(const Vec2& p) const {
  const int R = spec_.res;
  if (p.x < spec_.lo.x || p.x > spec_.hi.x || p.y < spec_.lo.y || p.y > spec_.hi.y)
    return kLogZero;
  double fx = (p.x - spec_.lo.x) / dx_;
  double fy = (p.y - spec_.lo.y) / dy_;
  int i = std::min(int(fx), R - 2);
  int j = std::min(int(fy), R - 2);
  double ax = fx - i, ay = fy - j;
  double v00 = values_[size_t(i) * R + j], v01 = values_[size_t(i) * R + j + 1];
  double v10 = values_[size_t(i + 1) * R + j], v11 = values_[size_t(i + 1) * R + j + 1];
  return (1 - ax) * ((1 - ay) * v00 + ay * v01) + ax * ((1 - ay) * v10 + ay * v11);
}

Vec2 GridOracle::score(const Vec2& p) const {
  const int R = spec_.res;
  double qx = std::clamp(p.x, spec_.lo.x, spec_.hi.x);
  double qy = std::clamp(p.y, spec_.lo.y, spec_.hi.y);
  double fx = (qx - spec_.lo.x) / dx_;
  double fy = (qy - spec_.lo.y) / dy_;
  int i = std::min(int(fx), R - 2);
  int j = std::min(int(fy), R - 2);
  double ax = fx - i, ay = fy - j;
  auto gx = [&](int ii, int jj) {
    int lo = std::max(ii - 1, 0), hi = std::min(ii + 1, R - 1);
    return (values_[size_t(hi) * R + jj] - values_[size_t(lo) * R + jj]) / ((hi - lo) * dx_);
  };
  auto gy = [&](int ii, int jj) {
    int lo = std::max(jj - 1, 0), hi = std::min(jj + 1, R - 1);
    return (values_[size_t(ii) * R + hi] - values_[size_t(ii) * R + lo]) / ((hi - lo) * dy_);
  };
  auto bilerp = [&](auto&& f) {
    return (1 - ax) * ((1 - ay) * f(i, j) + ay * f(i, j + 1)) +
           ax * ((1 - ay) * f(i + 1, j) + ay * f(i + 1, j + 1));
  };
  return {bilerp(gx), bilerp(gy)};
}

Vec2 GridOracle::sample(RngStream& rng) const {
  const int C = spec_.res - 1;
  // Marginal over rows via the flattened row-major CDF: a row's range ends
  // at the last cell of the row, so searching row end-points is the
  // marginal inverse CDF; the search within the row is the conditional.
  double u1 = rng.uniform() * cell_total_;
  int i_lo = 0, i_hi = C - 1;
  while (i_lo < i_hi) {
    int mid = (i_lo + i_hi) / 2;
    if (cell_cdf_[size_t(mid) * C + (C - 1)] <= u1)
      i_lo = mid + 1;
    else
      i_hi = mid;
  }
  int i = i_lo;
  double row_lo = i == 0 ? 0.0 : cell_cdf_[size_t(i - 1) * C + (C - 1)];
  double row_hi = cell_cdf_[size_t(i) * C + (C - 1)];
  double u2 = row_lo + rng.uniform() * (row_hi - row_lo);
  const double* row = &cell_cdf_[size_t(i) * C];
  int j = int(std::lower_bound(row, row + C, u2,
                               [](double v, double u) { return v <= u; }) -
              row);
  j = std::min(j, C - 1);
  double jit_x = rng.uniform(), jit_y = rng.uniform();
  return {node_x(i) + jit_x * dx_, node_y(j) + jit_y * dy_};
}

double GridOracle::boundary_mass() const {
  const int C = spec_.res - 1;
  double edge = 0.0;
  for (int i = 0; i < C; ++i) {
    for (int j = 0; j < C; ++j) {
      if (i != 0 && i != C - 1 && j != 0 && j != C - 1) continue;
      double lo = (i == 0 && j == 0) ? 0.0 : cell_cdf_[size_t(i) * C + j - 1];
      edge += cell_cdf_[size_t(i) * C + j] - lo;
    }
  }
  return edge / cell_total_;
}

std::vector<Vec2> GridOracle::high_mass_points(double mass, int max_points) const {
  const int C = spec_.res - 1;
  std::vector<std::pair<double, int>> cells(size_t(C) * C);
  for (int idx = 0; idx < C * C; ++idx) {
    double lo = idx == 0 ? 0.0 : cell_cdf_[idx - 1];
    cells[idx] = {cell_cdf_[idx] - lo, idx};
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<int> picked;
  double acc = 0.0;
  for (const auto& [m, idx] : cells) {
    picked.push_back(idx);
    acc += m;
    if (acc >= mass * cell_total_) break;
  }
  std::vector<Vec2> out;
  size_t stride = std::max<size_t>(1, picked.size() / std::max(1, max_points));
  for (size_t k = 0; k < picked.size(); k += stride) {
    int i = picked[k] / C, j = picked[k] % C;
    out.push_back({node_x(i) + 0.5 * dx_, node_y(j) + 0.5 * dy_});
    if (int(out.size()) >= max_points) break;
  }
  return out;
}

GridOracle GridOracle::diffused(const NoiseSchedule& s, int t) const {
  const int R = spec_.res;
  double ab = s.alpha_bar(t);
  double scale = std::sqrt(ab);
  double sigma = std::sqrt(1.0 - ab);
  if (t == 0) return *this;

  GridSpec out = spec_;
  out.lo = {scale * spec_.lo.x - 6.0 * sigma, scale * spec_.lo.y - 6.0 * sigma};
  out.hi = {scale * spec_.hi.x + 6.0 * sigma, scale * spec_.hi.y + 6.0 * sigma};
  double odx = (out.hi.x - out.lo.x) / (R - 1);
  double ody = (out.hi.y - out.lo.y) / (R - 1);

  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
  // Kx[oi, ii] = N(out_x(oi); scale * x(ii), sigma^2) * trapezoid weight.
  std::vector<double> kx(size_t(R) * R), ky(size_t(R) * R);
  parallel_for(R, [&](std::int64_t oi) {
    double ox = out.lo.x + oi * odx;
    double oy = out.lo.y + oi * ody;
    for (int ii = 0; ii < R; ++ii) {
      double ddx = ox - scale * node_x(ii);
      double ddy = oy - scale * node_y(ii);
      kx[size_t(oi) * R + ii] = norm * std::exp(-ddx * ddx * inv2s2) * trapezoid_weight_x(ii);
      ky[size_t(oi) * R + ii] = norm * std::exp(-ddy * ddy * inv2s2) * trapezoid_weight_y(ii);
    }
  });

  std::vector<double> dens(values_.size());
  for (size_t n = 0; n < values_.size(); ++n) dens[n] = std::exp(values_[n]);

  // mid[oi, jj] = sum_ii Kx[oi, ii] * dens[ii, jj]
  std::vector<double> mid(size_t(R) * R, 0.0);
  parallel_for(R, [&](std::int64_t oi) {
    double* mrow = &mid[size_t(oi) * R];
    for (int ii = 0; ii < R; ++ii) {
      double k = kx[size_t(oi) * R + ii];
      const double* drow = &dens[size_t(ii) * R];
      for (int jj = 0; jj < R; ++jj) mrow[jj] += k * drow[jj];
    }
  });
  // outv[oi, oj] = sum_jj mid[oi, jj] * Ky[oj, jj]
  std::vector<double> logvals(size_t(R) * R);
  parallel_for(R, [&](std::int64_t oi) {
    const double* mrow = &mid[size_t(oi) * R];
    for (int oj = 0; oj < R; ++oj) {
      const double* krow = &ky[size_t(oj) * R];
      double acc = 0.0;
      for (int jj = 0; jj < R; ++jj) acc += mrow[jj] * krow[jj];
      logvals[size_t(oi) * R + oj] = std::log(std::fmax(acc, kDensityFloor));
    }
  });
  return GridOracle(out, std::move(logvals));
}

}  // namespace compdiff
