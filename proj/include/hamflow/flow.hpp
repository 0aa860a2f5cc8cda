#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hamflow/core.hpp"
#include "hamflow/hamiltonian.hpp"

namespace hamflow {

struct QuadratureOptions {
  double rel_tol = 1e-12;
  int max_depth = 40;
};

/// tau = int_{u0}^{u1} du / (b . e) along the curve; negative when u1 < u0.
/// Panels split at the curve's breakpoints; each panel uses 5-point
/// Gauss-Legendre with adaptive halving. b . e < delta/2 at a node raises
/// TransversalityError.
double time_along_level(const LevelCurve& curve, const PlanarField& b, double u0, double u1,
                        const QuadratureOptions& q = {});

/// How levelset_flow charts the trajectory.
struct ChartPolicy {
  enum class Kind { fixed, automatic };
  Kind kind = Kind::automatic;

  // fixed: one chart for every start point
  Chart chart;
  double delta = 0.0;

  // automatic: chart around the current point, direction = normalized
  // average of b, half-width rho halved until sampled b.e >= cos_min |b|
  double max_radius = 0.25;
  double min_radius = 1e-4;
  double cos_min = 0.5;
  int max_charts = 10000;

  double resolution = 1e-2;  // column spacing relative to chart width
  QuadratureOptions quadrature;

  static ChartPolicy fixed(Chart c, double delta, double resolution);
  static ChartPolicy automatic(double max_radius, double resolution);
};

struct FlowPoint {
  Point position;
  double time_reached = 0.0;
  bool exited = false;    // ran out of charts before t
  bool critical = false;  // start on or near a critical level
  int charts = 0;
};

/// X(t, z) along the level set of H(z): X_1 solves time_along_level = t.
FlowPoint levelset_flow(const PlanarField& b, Point z, double t, const ChartPolicy& policy);

struct RkOptions {
  double tol = 1e-11;
  double max_step = std::numeric_limits<double>::infinity();
  /// Step cap as a function of position (e.g. a fraction of the local
  /// feature size); empty to disable.
  std::function<double(Point)> local_max_step;
  double min_step = 1e-14;
  std::size_t max_steps = 50'000'000;
  bool record = false;
};

struct RkResult {
  Point position;
  bool underflow = false;
  double uncertainty = 0.0;  // accumulated error estimate of forced steps
  std::size_t steps = 0;
  std::size_t rejected = 0;
  Trajectory trajectory;
};

/// Dormand-Prince 5(4) with a deterministic PI step controller.
RkResult rk_flow(const PlanarField& b, Point z, double t, const RkOptions& opt = {});

enum class FlowMethod { levelset, rk };

const char* to_string(FlowMethod m);

struct FlowMapOptions {
  FlowMethod method = FlowMethod::rk;
  ChartPolicy chart;
  RkOptions rk;
  unsigned threads = 1;
};

/// Flow of every grid node; per-node failures are flagged, never thrown.
FlowMap flow_map(const PlanarField& b, double t, const NodeGrid& grid, const FlowMapOptions& opt);

struct DensityReport {
  double max_ratio = 0.0;  // empirical compressibility_L
  double min_ratio = 0.0;
  std::size_t cells = 0;
  std::vector<std::pair<int, int>> flagged_cells;  // degenerate or touching flagged nodes
};

/// cell area / image area over every grid cell. The image of each cell edge
/// is the quadratic through the node images along its grid line (averaged
/// over the two neighbouring triples where both exist), so the per-cell
/// error is second order in the spacing; with curved_edges = false the image
/// is the straight-edged quadrilateral.
DensityReport compressibility_check(const FlowMap& fm, double degeneracy_tol = 1e-12, bool curved_edges = true);

struct CrossingTimes {
  double y = 0.0, t1 = 0.0, t2 = 0.0, T = 0.0;
};

struct CrossingOptions {
  double x_start = -1.0;
  double x_entry = 0.0;
  double x_exit = 1.0;
  double y_lo = -1.0, y_hi = 2.0;  // chart height
  double resolution = 1e-2;
  QuadratureOptions quadrature;
  unsigned threads = 1;
};

/// Times for the trajectory from (x_start, y) to reach x_entry and x_exit
/// along its level curve; requires b . e1 >= delta from the field metadata.
std::vector<CrossingTimes> crossing_times(const PlanarField& b, std::span<const double> y_samples,
                                          const CrossingOptions& opt = {});

void write_flow_map_csv(std::ostream& os, const FlowMap& fm, const std::string& preamble = "");
void write_crossing_times_csv(std::ostream& os, const std::vector<CrossingTimes>& ct,
                              const std::string& preamble = "");

}  // namespace hamflow
