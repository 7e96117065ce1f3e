#include "compdiff/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "compdiff/errors.hpp"
#include "compdiff/parallel.hpp"

namespace compdiff {

namespace {

double sq_dist(const Vec2& a, const Vec2& b) {
  const double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

void subsample(const Vec2* x, int n, int cap, std::vector<Vec2>& out) {
  const int stride = n <= cap ? 1 : (n + cap - 1) / cap;
  for (int i = 0; i < n; i += stride) out.push_back(x[i]);
}

// Sum over ordered pairs (i, j != i) of k(a_i, b_j) with b == a, or over the
// full rectangle when cross. Row-partial sums are combined in row order, so
// the result is worker-count invariant.
double pair_sum(const Vec2* a, int n, const Vec2* b, int m, double inv2s2,
                bool skip_diagonal) {
  std::vector<double> row(n);
  parallel_for(n, [&](std::int64_t i) {
    double acc = 0;
    for (int j = 0; j < m; ++j) {
      if (skip_diagonal && j == static_cast<int>(i)) continue;
      acc += std::exp(-sq_dist(a[i], b[j]) * inv2s2);
    }
    row[i] = acc;
  });
  double total = 0;
  for (int i = 0; i < n; ++i) total += row[i];
  return total;
}

}  // namespace

double mmd_bandwidth(const Vec2* x, int n, const Vec2* y, int m) {
  std::vector<Vec2> pool;
  pool.reserve(2048);
  subsample(x, n, 1024, pool);
  subsample(y, m, 1024, pool);
  const int p = static_cast<int>(pool.size());
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(p) * (p - 1) / 2);
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) d2.push_back(sq_dist(pool[i], pool[j]));
  if (d2.empty()) return 1.0;
  auto mid = d2.begin() + (static_cast<std::ptrdiff_t>(d2.size()) - 1) / 2;
  std::nth_element(d2.begin(), mid, d2.end());
  const double med = std::sqrt(*mid);
  return med > 0 ? med : 1.0;
}

double mmd2(const Vec2* x, int n, const Vec2* y, int m) {
  if (n < 2 || m < 2)
    throw ConfigError("mmd: both batches need at least 2 points");
  const double sigma = mmd_bandwidth(x, n, y, m);
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double kxx = pair_sum(x, n, x, n, inv2s2, true);
  const double kyy = pair_sum(y, m, y, m, inv2s2, true);
  const double kxy = pair_sum(x, n, y, m, inv2s2, false);
  return kxx / (static_cast<double>(n) * (n - 1)) +
         kyy / (static_cast<double>(m) * (m - 1)) -
         2.0 * kxy / (static_cast<double>(n) * m);
}

double mmd2(const SampleBatch& x, const SampleBatch& y) {
  return mmd2(x.x.data(), x.size(), y.x.data(), y.size());
}

}  // namespace compdiff
