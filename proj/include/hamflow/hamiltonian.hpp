#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "hamflow/core.hpp"

namespace hamflow {

/// Orthonormal frame (e, e_perp) with a window in frame coordinates:
/// z = u e + w e_perp.
struct Chart {
  Vec2 e{1.0, 0.0};
  AxisRect window;  // u in [x_lo, x_hi], w in [y_lo, y_hi]

  Vec2 normal() const { return perp(e); }
  Point world(double u, double w) const { return u * e + w * normal(); }
  Vec2 local(Point z) const { return {dot(z, e), dot(z, normal())}; }
};

/// Level set {H = h} as a graph w = f_h(u) in a chart.
struct LevelCurve {
  double h = 0.0;
  /// Maximal intervals of u where the level crosses the window.
  std::vector<std::pair<double, double>> runs;
  /// Chart-coordinate breakpoints (u, w), strictly increasing in u.
  std::vector<Vec2> breakpoints;
  double graph_lipschitz_L = 0.0;
  Chart chart;
  double delta = 0.0;
  ScalarFieldPtr H;
  /// Piecewise-affine H with exact kink hints: the curve is the polyline
  /// through the breakpoints.
  bool polyline_exact = false;

  double u_lo() const { return runs.empty() ? 0.0 : runs.front().first; }
  double u_hi() const { return runs.empty() ? 0.0 : runs.back().second; }
  /// Run containing u, or nullptr.
  const std::pair<double, double>* run_at(double u) const;
  /// Solve H(u, w) = h for w by bisection on the monotone section, or
  /// interpolate when the polyline is exact.
  double w_at(double u) const;
  Point point_at(double u) const { return chart.world(u, w_at(u)); }
  /// Bisection over the full window height, ignoring the breakpoints.
  double w_solve(double u) const;
  /// Breakpoint u values strictly inside (u0, u1).
  std::vector<double> breaks_between(double u0, double u1) const;
};

struct LevelCurveOptions {
  /// Monotonicity probes per column.
  int section_probes = 6;
  /// Relative slack in the b . e >= delta check at roots.
  double delta_slack = 1e-9;
};

/// Bisection root of a nonincreasing function with F(lo) >= 0 >= F(hi).
/// At most 64 halvings, stopping when the bracket no longer shrinks.
template <class F>
double bisect_decreasing(F&& f, double lo, double hi) {
  for (int it = 0; it < 64; ++it) {
    double mid = lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) break;
    if (f(mid) >= 0)
      lo = mid;
    else
      hi = mid;
  }
  return lo + 0.5 * (hi - lo);
}

/// Extract {H = h} in a chart where b . e >= delta, b = perp-grad H.
/// Columns are uniform at the given resolution plus the field's own kink
/// hints (used when e = +-e1), so piecewise-affine curves are exact between
/// breakpoints.
/// Columns where h is outside the range of the section are excluded; a
/// section that is not decreasing in w, or b . e < delta at a root, raises
/// TransversalityError.
LevelCurve level_curve(ScalarFieldPtr H, double h, const Chart& chart, double delta,
                       double resolution, const LevelCurveOptions& opt = {});

/// Points of {H = h} in the window found on the edges of an n x n lattice.
std::vector<Point> level_set_samples(const ScalarField& H, double h, const AxisRect& window,
                                     int n);

struct StreamfunctionResult {
  std::shared_ptr<GridField> H;
  double path_residual = 0.0;   // max |H_xy - H_yx| over nodes
  double max_divergence = 0.0;  // max cell divergence
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, int ix, int iy, double residual)
      : Error(msg), ix(ix), iy(iy), residual(residual) {}
  int ix, iy;
  double residual;
};

/// Recover H with H(base) = 0 from samples of b on the grid. base is snapped
/// to the nearest node. A cell whose discrete divergence exceeds div_tol
/// times the largest discrete first derivative of b raises DivergenceError.
StreamfunctionResult streamfunction(const PlanarField& b, const NodeGrid& grid, Point base,
                                    double div_tol = 1e-3);

struct LevelRecord {
  double h = 0.0;
  double min_b = 0.0;
  int k = 0;  // 0 when min_b <= 1/k_max
  std::size_t samples = 0;
};

struct OmegaBand {
  int k = 0;
  std::vector<std::pair<double, double>> h_bands;
  std::vector<AxisRect> covers;
};

struct RegularDecomposition {
  std::vector<double> critical_values;
  std::vector<LevelRecord> records;
  std::vector<OmegaBand> omega;  // omega[k-1] for k = 1..k_max
  int k_max = 0;

  /// Smallest k with h in Omega_k, 0 if none.
  int k_of(double h) const;
};

struct DecompositionOptions {
  int lattice = 128;  // level-set sampling lattice per axis
  std::vector<double> extra_levels;
  double critical_tol = 1e-9;
};

RegularDecomposition regular_decomposition(const ScalarField& H, const PlanarField& b,
                                           const AxisRect& window, int k_max,
                                           double h_resolution,
                                           const DecompositionOptions& opt = {});

void write_level_curve_csv(std::ostream& os, const LevelCurve& c, const std::string& preamble = "");

}  // namespace hamflow
