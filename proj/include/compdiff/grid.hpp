#pragma once

#include <functional>
#include <vector>

#include "compdiff/rng.hpp"
#include "compdiff/schedule.hpp"
#include "compdiff/vec2.hpp"

namespace compdiff {

struct GridSpec {
  Vec2 lo{-1.6, -1.6};
  Vec2 hi{1.6, 1.6};
  int res = 512;  // nodes per axis, endpoints included
};

// Dense evaluation of an unnormalized log density on a rectangular grid.
// Provides trapezoid normalization, bilinear density/score queries,
// inverse-CDF sampling with within-cell jitter, and exact Gaussian
// convolution onto a new grid (the diffusion of the tabulated density).
// Grid rows are built in parallel; each node is computed by exactly one
// worker so the table is bit-identical for any thread count.
class GridOracle {
 public:
  GridOracle(GridSpec spec, const std::function<double(Vec2)>& log_density);
  GridOracle(GridSpec spec, std::vector<double> log_values);

  const GridSpec& spec() const { return spec_; }
  // log of the trapezoid integral of the (unnormalized) input density.
  double log_norm() const { return log_norm_; }

  // Normalized log density, bilinear in the table. Outside the grid: a
  // very negative finite value.
  double log_density(const Vec2& x) const;
  // Central differences of the normalized log density, bilinear between
  // nodes (one-sided at the boundary).
  Vec2 score(const Vec2& x) const;

  Vec2 sample(RngStream& rng) const;

  // Fraction of probability mass in the outermost cell ring. Large values
  // mean the grid is clipping the distribution.
  double boundary_mass() const;

  // Cell centers covering the top `mass` fraction of probability, densest
  // first, deterministically thinned to at most max_points.
  std::vector<Vec2> high_mass_points(double mass, int max_points) const;

  // The diffusion of this (normalized) density at level t: numerically
  // convolves with the q(x_t|x_0) Gaussian via two separable passes onto a
  // grid whose bounds are the scaled input bounds padded by 6 sigma_t.
  GridOracle diffused(const NoiseSchedule& s, int t) const;

  // Node accessors (i indexes x, j indexes y).
  int res() const { return spec_.res; }
  double node_x(int i) const { return spec_.lo.x + i * dx_; }
  double node_y(int j) const { return spec_.lo.y + j * dy_; }
  double log_value(int i, int j) const { return values_[size_t(i) * spec_.res + j]; }

 private:
  void finalize();
  double trapezoid_weight_x(int i) const { return i == 0 || i == spec_.res - 1 ? 0.5 * dx_ : dx_; }
  double trapezoid_weight_y(int j) const { return j == 0 || j == spec_.res - 1 ? 0.5 * dy_ : dy_; }

  GridSpec spec_;
  double dx_ = 0, dy_ = 0;
  std::vector<double> values_;  // normalized log density at nodes, row-major [i*res+j]
  double log_norm_ = 0;
  // Sampling tables over (res-1)^2 cells.
  std::vector<double> cell_cdf_;  // flattened cumulative cell masses
  double cell_total_ = 0;
};

}  // namespace compdiff
