#include "hamflow/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <ostream>

#include "hamflow/parallel.hpp"
#include "hamflow/text.hpp"

namespace hamflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<double, 5> kGlNodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                         0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> kGlWeights{0.2369268850561891, 0.4786286704993665,
                                           0.5688888888888889, 0.4786286704993665,
                                           0.2369268850561891};

class SpeedIntegrand {
 public:
  SpeedIntegrand(const LevelCurve& c, const PlanarField& b) : c_(c), b_(b) {}

  double operator()(double u) const {
    double be = dot(b_(c_.point_at(u)), c_.chart.e);
    if (!(be >= 0.5 * c_.delta) || be <= 0)
      throw TransversalityError("time_along_level: b.e = " + fmt(be) + " below delta/2 at u = " +
                                fmt(u));
    return 1.0 / be;
  }

 private:
  const LevelCurve& c_;
  const PlanarField& b_;
};

double gauss5(const SpeedIntegrand& f, double a, double b) {
  double m = 0.5 * (a + b), r = 0.5 * (b - a), s = 0.0;
  for (int k = 0; k < 5; ++k) s += kGlWeights[k] * f(m + r * kGlNodes[k]);
  return r * s;
}

double adaptive(const SpeedIntegrand& f, double a, double b, double whole, int depth,
                const QuadratureOptions& q) {
  double m = 0.5 * (a + b);
  double left = gauss5(f, a, m), right = gauss5(f, m, b);
  double refined = left + right;
  if (depth >= q.max_depth || std::abs(refined - whole) <= q.rel_tol * std::abs(refined) ||
      !(m > a && m < b))
    return refined;
  return adaptive(f, a, m, left, depth + 1, q) + adaptive(f, m, b, right, depth + 1, q);
}

double panel_time(const SpeedIntegrand& f, double a, double b, const QuadratureOptions& q) {
  if (a == b) return 0.0;
  return adaptive(f, a, b, gauss5(f, a, b), 0, q);
}

// Panel boundaries from u0 to u1 (u0 < u1) split at the curve breakpoints.
std::vector<double> panels(const LevelCurve& c, double u0, double u1) {
  std::vector<double> p{u0};
  for (double u : c.breaks_between(u0, u1)) p.push_back(u);
  p.push_back(u1);
  return p;
}

// Find u in [a, b] with time(a -> u) = rem, given time(a -> b) = total >= rem.
double solve_in_panel(const LevelCurve& c, const PlanarField& b, const SpeedIntegrand& f,
                      double a, double bnd, double rem, double total,
                      const QuadratureOptions& q) {
  if (rem <= 0) return a;
  if (rem >= total) return bnd;
  double lo = a, hi = bnd;
  double u = a + (bnd - a) * (rem / total);
  for (int it = 0; it < 200; ++it) {
    double F = panel_time(f, a, u, q) - rem;
    if (F == 0) return u;
    if (F < 0)
      lo = u;
    else
      hi = u;
    if (std::abs(F) <= 1e-15 * rem) return u;
    double be = dot(b(c.point_at(u)), c.chart.e);
    double next = u - F * be;
    if (!(next > lo && next < hi)) next = lo + 0.5 * (hi - lo);
    if (!(next > lo && next < hi)) return u;
    u = next;
  }
  return u;
}

struct Advance {
  double u = 0.0;
  double time = 0.0;  // time actually advanced
  bool completed = false;
};

// Move from u0 forward along the curve for at most time t within the run.
Advance advance_on_curve(const LevelCurve& c, const PlanarField& b, double u0, double t,
                         const QuadratureOptions& q) {
  const auto* run = c.run_at(u0);
  if (!run) return {u0, 0.0, false};
  SpeedIntegrand f(c, b);
  auto p = panels(c, u0, run->second);
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) {
    double dt = panel_time(f, p[k], p[k + 1], q);
    if (acc + dt >= t) {
      double u = solve_in_panel(c, b, f, p[k], p[k + 1], t - acc, dt, q);
      return {u, t, true};
    }
    acc += dt;
  }
  return {run->second, acc, false};
}

}  // namespace

double time_along_level(const LevelCurve& curve, const PlanarField& b, double u0, double u1,
                        const QuadratureOptions& q) {
  if (u0 == u1) return 0.0;
  double sign = u1 > u0 ? 1.0 : -1.0;
  double a = std::min(u0, u1), e = std::max(u0, u1);
  const auto* run = curve.run_at(a);
  if (!run || e > run->second)
    throw DomainError("time_along_level: [" + fmt(a) + ", " + fmt(e) + "] is not inside O_h");
  SpeedIntegrand f(curve, b);
  auto p = panels(curve, a, e);
  double tau = 0.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k) tau += panel_time(f, p[k], p[k + 1], q);
  return sign * tau;
}

ChartPolicy ChartPolicy::fixed(Chart c, double delta, double resolution) {
  ChartPolicy p;
  p.kind = Kind::fixed;
  p.chart = c;
  p.delta = delta;
  p.resolution = resolution;
  return p;
}

ChartPolicy ChartPolicy::automatic(double max_radius, double resolution) {
  ChartPolicy p;
  p.kind = Kind::automatic;
  p.max_radius = max_radius;
  p.resolution = resolution;
  return p;
}

namespace {

FlowPoint flow_fixed(const PlanarField& b, const LevelCurve& curve, Point z, double t,
                     const ChartPolicy& pol) {
  FlowPoint out;
  out.position = z;
  out.charts = 1;
  Vec2 loc = curve.chart.local(z);
  Advance adv = advance_on_curve(curve, b, loc.x, t, pol.quadrature);
  out.time_reached = adv.time;
  out.exited = !adv.completed;
  out.position = curve.point_at(adv.u);
  return out;
}

// Chart centred on p whose window is transversal on a sample lattice.
bool make_auto_chart(const PlanarField& b, Point p, double rho, double cos_min, Chart& chart,
                     double& delta) {
  Vec2 avg{};
  constexpr int m = 2;
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j) avg += b(p + Vec2{rho * i / m, rho * j / m});
  double an = norm(avg);
  if (!(an > 0)) return false;
  Vec2 e = avg / an;
  Chart c;
  c.e = e;
  Vec2 loc = c.local(p);
  c.window = {loc.x - rho / 8, loc.x + rho, loc.y - rho, loc.y + rho};
  double min_be = kInf;
  constexpr int s = 4;
  for (int i = 0; i <= s; ++i)
    for (int j = 0; j <= s; ++j) {
      double u = c.window.x_lo + c.window.width() * i / s;
      double w = c.window.y_lo + c.window.height() * j / s;
      Vec2 v = b(c.world(u, w));
      double be = dot(v, e);
      if (!(be > 0) || be < cos_min * norm(v)) return false;
      min_be = std::min(min_be, be);
    }
  chart = c;
  delta = 0.5 * min_be;
  return true;
}

FlowPoint flow_auto(const PlanarField& b, Point z, double t, const ChartPolicy& pol) {
  FlowPoint out;
  out.position = z;
  const ScalarFieldPtr& H = b.H_ptr();
  const double h = H->value(z);
  Point cur = z;
  double remaining = t;
  while (remaining > 0) {
    if (out.charts >= pol.max_charts) {
      out.exited = true;
      break;
    }
    if (norm(b(cur)) == 0) {
      // Rest point: the flow is stationary.
      out.critical = true;
      out.time_reached = t;
      return out;
    }
    Chart chart;
    double delta = 0;
    double rho = pol.max_radius;
    while (rho >= pol.min_radius && !make_auto_chart(b, cur, rho, pol.cos_min, chart, delta))
      rho *= 0.5;
    if (rho < pol.min_radius) {
      out.critical = true;
      out.exited = true;
      break;
    }
    LevelCurve curve;
    try {
      curve = level_curve(H, h, chart, delta, pol.resolution * chart.window.width());
    } catch (const TransversalityError&) {
      out.critical = true;
      out.exited = true;
      break;
    }
    ++out.charts;
    Vec2 loc = chart.local(cur);
    Advance adv = advance_on_curve(curve, b, loc.x, remaining, pol.quadrature);
    if (adv.completed) {
      out.position = curve.point_at(adv.u);
      remaining = 0;
      break;
    }
    if (!(adv.u > loc.x)) {
      out.exited = true;
      break;
    }
    remaining -= adv.time;
    cur = curve.point_at(adv.u);
    out.position = cur;
  }
  out.time_reached = t - remaining;
  return out;
}

}  // namespace

FlowPoint levelset_flow(const PlanarField& b, Point z, double t, const ChartPolicy& pol) {
  if (!(t >= 0)) throw ConfigError("levelset_flow needs t >= 0");
  if (!b.is_hamiltonian()) throw ConfigError("levelset_flow needs a Hamiltonian field");
  if (t == 0) return {z, 0.0, false, false, 0};
  if (pol.kind == ChartPolicy::Kind::automatic) return flow_auto(b, z, t, pol);
  double h = b.H().value(z);
  Vec2 loc = pol.chart.local(z);
  if (!pol.chart.window.contains(loc)) return {z, 0.0, true, false, 0};
  auto curve = level_curve(b.H_ptr(), h, pol.chart, pol.delta, pol.resolution);
  return flow_fixed(b, curve, z, t, pol);
}

// ---------------------------------------------------------------- Runge-Kutta

RkResult rk_flow(const PlanarField& b, Point z, double t, const RkOptions& opt) {
  if (!(t >= 0)) throw ConfigError("rk_flow needs t >= 0");
  if (!(opt.tol > 0)) throw ConfigError("rk_flow needs tol > 0");
  // Dormand-Prince 5(4) tableau.
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  (void)c2, (void)c3, (void)c4, (void)c5;

  RkResult res;
  res.position = z;
  res.trajectory.method = "dopri5";
  res.trajectory.tolerance = opt.tol;
  if (opt.record) res.trajectory.samples.push_back({0.0, z});
  if (t == 0) return res;

  Point y = z;
  double time = 0.0;
  Vec2 k1 = b(y);
  double speed = norm(k1);
  double h = std::min({t, opt.max_step, 0.01 * (1.0 + norm(y)) / std::max(speed, 1e-10)});
  double err_prev = 1e-4;
  const double h_floor = opt.min_step * std::max(1.0, t);

  while (time < t) {
    if (res.steps + res.rejected >= opt.max_steps)
      throw NumericalError("rk_flow: step budget exhausted");
    double cap = opt.max_step;
    if (opt.local_max_step) cap = std::min(cap, opt.local_max_step(y));
    h = std::min({h, cap, t - time});
    bool forced = false;
    if (h <= h_floor) {
      h = std::min(h_floor, t - time);
      forced = true;
    }
    Vec2 k2 = b(y + h * (a21 * k1));
    Vec2 k3 = b(y + h * (a31 * k1 + a32 * k2));
    Vec2 k4 = b(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Vec2 k5 = b(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Vec2 k6 = b(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    // The weights sum to one; written relative to k1 so that constant
    // fields advance by exactly h b.
    Point yn = y + h * (k1 + (b3 * (k3 - k1) + b4 * (k4 - k1) + b5 * (k5 - k1) + b6 * (k6 - k1)));
    Vec2 k7 = b(yn);
    Vec2 ev = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double sx = opt.tol * (1.0 + std::max(std::abs(y.x), std::abs(yn.x)));
    double sy = opt.tol * (1.0 + std::max(std::abs(y.y), std::abs(yn.y)));
    double err = std::max(std::abs(ev.x) / sx, std::abs(ev.y) / sy);
    if (err <= 1.0 || forced) {
      if (forced && err > 1.0) {
        res.underflow = true;
        res.uncertainty += norm(ev);
      }
      time = (t - time <= h) ? t : time + h;
      y = yn;
      k1 = k7;
      ++res.steps;
      if (opt.record) res.trajectory.samples.push_back({time, y});
      double fac = err == 0 ? 5.0 : 0.9 * std::pow(err, -0.14) * std::pow(err_prev, 0.08);
      h *= std::clamp(fac, 0.2, 5.0);
      err_prev = std::max(err, 1e-4);
    } else {
      ++res.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
  }
  res.position = y;
  return res;
}

const char* to_string(FlowMethod m) { return m == FlowMethod::levelset ? "levelset" : "rk"; }

FlowMap flow_map(const PlanarField& b, double t, const NodeGrid& grid, const FlowMapOptions& opt) {
  grid.validate();
  FlowMap fm;
  fm.grid = grid;
  fm.t = t;
  fm.method = to_string(opt.method);
  fm.tolerance = opt.method == FlowMethod::rk ? opt.rk.tol : opt.chart.quadrature.rel_tol;
  fm.image.assign(grid.size(), Point{});
  fm.flags.assign(grid.size(), NodeFlag::ok);

  parallel_chunks(grid.size(), opt.threads, [&](std::size_t lo, std::size_t hi) {
    // Curves depend on the level only, so a per-chunk cache is deterministic.
    std::map<double, LevelCurve> cache;
    for (std::size_t k = lo; k < hi; ++k) {
      int i = static_cast<int>(k % grid.nx), j = static_cast<int>(k / grid.nx);
      Point z = grid.node(i, j);
      try {
        if (opt.method == FlowMethod::rk) {
          auto r = rk_flow(b, z, t, opt.rk);
          fm.image[k] = r.position;
          if (r.underflow) fm.flags[k] = NodeFlag::underflow;
          continue;
        }
        FlowPoint p;
        if (t == 0) {
          p.position = z;
        } else if (opt.chart.kind == ChartPolicy::Kind::fixed) {
          if (!opt.chart.chart.window.contains(opt.chart.chart.local(z))) {
            p.position = z;
            p.exited = true;
          } else {
            double h = b.H().value(z);
            auto it = cache.find(h);
            if (it == cache.end())
              it = cache
                       .emplace(h, level_curve(b.H_ptr(), h, opt.chart.chart, opt.chart.delta,
                                               opt.chart.resolution))
                       .first;
            p = flow_fixed(b, it->second, z, t, opt.chart);
          }
        } else {
          p = levelset_flow(b, z, t, opt.chart);
        }
        fm.image[k] = p.position;
        if (p.critical)
          fm.flags[k] = NodeFlag::critical;
        else if (p.exited)
          fm.flags[k] = NodeFlag::exited;
      } catch (const std::exception&) {
        fm.image[k] = {kNaN, kNaN};
        fm.flags[k] = NodeFlag::failed;
      }
    }
  });
  return fm;
}

namespace {

// Area between the image curve of the grid edge from node a to node b and its
// chord, signed for the a -> b direction. prev and next are the nodes before a
// and after b on the same grid line, null when missing or flagged.
double edge_bulge(Point a, Point b, const Point* prev, const Point* next) {
  double sum = 0.0;
  int terms = 0;
  if (prev) {
    Vec2 u = 0.5 * (b - *prev), w = 0.5 * ((*prev - a) + (b - a));
    sum += cross(u, w) / 6.0;
    ++terms;
  }
  if (next) {
    Vec2 u = 0.5 * (*next - a), w = 0.5 * ((a - b) + (*next - b));
    sum += cross(u, w) / 6.0;
    ++terms;
  }
  return terms ? sum / terms : 0.0;
}

}  // namespace

DensityReport compressibility_check(const FlowMap& fm, double degeneracy_tol, bool curved_edges) {
  const NodeGrid& g = fm.grid;
  DensityReport rep;
  rep.max_ratio = 0.0;
  rep.min_ratio = kInf;
  double cell = g.spacing.x * g.spacing.y;
  auto node = [&](int i, int j) -> const Point* {
    if (i < 0 || j < 0 || i >= g.nx || j >= g.ny || !fm.ok(i, j)) return nullptr;
    return &fm.image[g.index(i, j)];
  };
  // Bulge of the edge (i, j) -> (i + di, j + dj) along its grid line.
  auto bulge = [&](int i, int j, int di, int dj) {
    return edge_bulge(fm.at(i, j), fm.at(i + di, j + dj), node(i - di, j - dj), node(i + 2 * di, j + 2 * dj));
  };
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      if (!fm.ok(i, j) || !fm.ok(i + 1, j) || !fm.ok(i, j + 1) || !fm.ok(i + 1, j + 1)) {
        rep.flagged_cells.push_back({i, j});
        continue;
      }
      std::array<Point, 4> q{fm.at(i, j), fm.at(i + 1, j), fm.at(i + 1, j + 1), fm.at(i, j + 1)};
      double area = 0.0;
      for (int k = 0; k < 4; ++k) area += cross(q[k], q[(k + 1) % 4]);
      area *= 0.5;
      if (curved_edges)
        area += bulge(i, j, 1, 0) + bulge(i + 1, j, 0, 1) - bulge(i, j + 1, 1, 0) - bulge(i, j, 0, 1);
      if (!(area > degeneracy_tol * cell)) {
        rep.flagged_cells.push_back({i, j});
        continue;
      }
      double r = cell / area;
      rep.max_ratio = std::max(rep.max_ratio, r);
      rep.min_ratio = std::min(rep.min_ratio, r);
      ++rep.cells;
    }
  if (rep.cells == 0) rep.min_ratio = 0.0;
  return rep;
}

std::vector<CrossingTimes> crossing_times(const PlanarField& b, std::span<const double> ys,
                                          const CrossingOptions& opt) {
  if (!b.is_hamiltonian()) throw ConfigError("crossing_times needs a Hamiltonian field");
  if (!(opt.x_start < opt.x_entry && opt.x_entry < opt.x_exit))
    throw ConfigError("crossing_times needs x_start < x_entry < x_exit");
  double delta = b.transversality() ? b.transversality()->delta : 0.0;
  Chart chart;
  chart.e = {1.0, 0.0};
  chart.window = AxisRect::checked(opt.x_start, opt.x_exit, opt.y_lo, opt.y_hi);
  std::vector<CrossingTimes> out(ys.size());
  parallel_for(ys.size(), opt.threads, [&](std::size_t k) {
    double y = ys[k];
    double h = b.H().value({opt.x_start, y});
    auto curve = level_curve(b.H_ptr(), h, chart, delta, opt.resolution);
    const auto* run = curve.run_at(opt.x_start);
    if (!run || run->second < opt.x_exit)
      throw NumericalError("crossing_times: trajectory from y = " + fmt(y) +
                           " does not reach x = " + fmt(opt.x_exit));
    CrossingTimes c;
    c.y = y;
    c.t1 = time_along_level(curve, b, opt.x_start, opt.x_entry, opt.quadrature);
    c.t2 = c.t1 + time_along_level(curve, b, opt.x_entry, opt.x_exit, opt.quadrature);
    c.T = c.t2 - c.t1;
    out[k] = c;
  });
  return out;
}

void write_flow_map_csv(std::ostream& os, const FlowMap& fm, const std::string& preamble) {
  os << preamble << "ix,iy,x0,y0,x1,y1,flag\n";
  for (int j = 0; j < fm.grid.ny; ++j)
    for (int i = 0; i < fm.grid.nx; ++i) {
      Point z = fm.grid.node(i, j), x = fm.at(i, j);
      os << i << ',' << j << ',' << fmt(z.x) << ',' << fmt(z.y) << ',' << fmt(x.x) << ','
         << fmt(x.y) << ',' << static_cast<int>(fm.flags[fm.grid.index(i, j)]) << '\n';
    }
}

void write_crossing_times_csv(std::ostream& os, const std::vector<CrossingTimes>& ct,
                              const std::string& preamble) {
  os << preamble << "y,t1,t2,T\n";
  for (const auto& c : ct)
    os << fmt(c.y) << ',' << fmt(c.t1) << ',' << fmt(c.t2) << ',' << fmt(c.T) << '\n';
}

}  // namespace hamflow
