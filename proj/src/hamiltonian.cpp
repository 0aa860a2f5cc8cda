#include "hamflow/hamiltonian.hpp"

#include <algorithm>
#include <limits>
#include <ostream>

#include "hamflow/text.hpp"

namespace hamflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Section {
  const ScalarField& H;
  const Chart& chart;
  double h;
  double u;
  double operator()(double w) const { return H.value(chart.world(u, w)) - h; }
};

}  // namespace

const std::pair<double, double>* LevelCurve::run_at(double u) const {
  for (const auto& r : runs)
    if (u >= r.first && u <= r.second) return &r;
  return nullptr;
}

double LevelCurve::w_solve(double u) const {
  Section f{*H, chart, h, u};
  return bisect_decreasing(f, chart.window.y_lo, chart.window.y_hi);
}

double LevelCurve::w_at(double u) const {
  if (breakpoints.size() < 2 || u < breakpoints.front().x || u > breakpoints.back().x)
    return w_solve(u);
  auto it = std::lower_bound(breakpoints.begin(), breakpoints.end(), u,
                             [](const Vec2& p, double v) { return p.x < v; });
  if (it->x == u) return it->y;
  const Vec2& b = *it;
  const Vec2& a = *std::prev(it);
  double guess = a.y + (b.y - a.y) * (u - a.x) / (b.x - a.x);
  if (polyline_exact) return guess;
  // Bracket the root near the interpolated guess, widening as needed.
  Section f{*H, chart, h, u};
  const AxisRect& W = chart.window;
  for (double d = 1e-6 * W.height(); d < W.height(); d *= 64) {
    double lo = std::max(W.y_lo, guess - d), hi = std::min(W.y_hi, guess + d);
    if (f(lo) >= 0 && f(hi) <= 0) return bisect_decreasing(f, lo, hi);
  }
  return w_solve(u);
}

std::vector<double> LevelCurve::breaks_between(double u0, double u1) const {
  if (u0 > u1) std::swap(u0, u1);
  auto lo = std::upper_bound(breakpoints.begin(), breakpoints.end(), u0,
                             [](double v, const Vec2& p) { return v < p.x; });
  std::vector<double> out;
  for (auto it = lo; it != breakpoints.end() && it->x < u1; ++it) out.push_back(it->x);
  return out;
}

LevelCurve level_curve(ScalarFieldPtr H, double h, const Chart& chart_in, double delta,
                       double resolution, const LevelCurveOptions& opt) {
  if (!H) throw ConfigError("level_curve needs a Hamiltonian");
  if (!(resolution > 0)) throw ConfigError("level_curve resolution must be positive");
  if (!chart_in.window.valid() || !std::isfinite(chart_in.window.area()))
    throw ConfigError("level_curve needs a bounded window");
  Chart chart = chart_in;
  double en = norm(chart.e);
  if (!(en > 0)) throw ConfigError("chart direction must be nonzero");
  chart.e = chart.e / en;

  const AxisRect& W = chart.window;
  int n = std::max(1, static_cast<int>(std::ceil(W.width() / resolution)));
  std::vector<double> cols;
  cols.reserve(n + 1);
  for (int i = 0; i <= n; ++i) cols.push_back(i == n ? W.x_hi : W.x_lo + W.width() * i / n);
  if (chart.e.y == 0.0) {
    double sgn = chart.e.x > 0 ? 1.0 : -1.0;
    double xa = sgn > 0 ? W.x_lo : -W.x_hi, xb = sgn > 0 ? W.x_hi : -W.x_lo;
    for (double x : H->vertical_breaks(h, xa, xb)) cols.push_back(sgn * x);
  }
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());

  LevelCurve curve;
  curve.h = h;
  curve.chart = chart;
  curve.delta = delta;
  curve.H = H;
  curve.polyline_exact = H->backend() == Backend::piecewise && chart.e.y == 0.0;

  bool in_run = false;
  double height = W.height();
  for (double u : cols) {
    Section f{*H, chart, h, u};
    double f_lo = f(W.y_lo), f_hi = f(W.y_hi);
    double tol = 1e-12 * (1.0 + std::abs(f_lo) + std::abs(f_hi));
    if (f_lo < f_hi - tol)
      throw TransversalityError("level_curve: section increases along e_perp at u = " + fmt(u));
    double prev = f_lo;
    for (int k = 1; k <= opt.section_probes; ++k) {
      double v = f(W.y_lo + height * k / (opt.section_probes + 1));
      if (v > prev + tol)
        throw TransversalityError("level_curve: non-monotone section at u = " + fmt(u));
      prev = v;
    }
    if (f_lo < 0 || f_hi > 0) {
      in_run = false;
      continue;
    }
    double w = bisect_decreasing(f, W.y_lo, W.y_hi);
    Point z = chart.world(u, w);
    Vec2 b = perp_gradient(*H, z);
    double be = dot(b, chart.e);
    if (be < delta * (1.0 - opt.delta_slack) - 1e-300)
      throw TransversalityError("level_curve: b.e = " + fmt(be) + " below delta = " + fmt(delta) +
                                " at (" + fmt(z.x) + ", " + fmt(z.y) + ")");
    if (!in_run) {
      curve.runs.push_back({u, u});
      in_run = true;
    } else {
      Vec2 last = curve.breakpoints.back();
      curve.graph_lipschitz_L =
          std::max(curve.graph_lipschitz_L, std::abs(w - last.y) / (u - last.x));
    }
    curve.runs.back().second = u;
    curve.breakpoints.push_back({u, w});
  }
  // A run of a single column carries no interval.
  curve.runs.erase(std::remove_if(curve.runs.begin(), curve.runs.end(),
                                  [](const auto& r) { return !(r.second > r.first); }),
                   curve.runs.end());
  return curve;
}

std::vector<Point> level_set_samples(const ScalarField& H, double h, const AxisRect& window,
                                     int n) {
  if (n < 1) throw ConfigError("level_set_samples needs n >= 1");
  std::vector<double> v(static_cast<std::size_t>(n + 1) * (n + 1));
  auto node = [&](int i, int j) {
    return Point{window.x_lo + window.width() * i / n, window.y_lo + window.height() * j / n};
  };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) v[j * (n + 1) + i] = H.value(node(i, j)) - h;
  std::vector<Point> out;
  auto edge = [&](Point a, double fa, Point b, double fb) {
    if ((fa >= 0) == (fb >= 0)) return;
    // fa and fb have opposite signs; keep the sign of a at the lo end.
    double lo = 0, hi = 1;
    bool a_pos = fa >= 0;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      double fm = H.value(a + mid * (b - a)) - h;
      if ((fm >= 0) == a_pos)
        lo = mid;
      else
        hi = mid;
    }
    out.push_back(a + (0.5 * (lo + hi)) * (b - a));
  };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      double f0 = v[j * (n + 1) + i];
      if (i < n) edge(node(i, j), f0, node(i + 1, j), v[j * (n + 1) + i + 1]);
      if (j < n) edge(node(i, j), f0, node(i, j + 1), v[(j + 1) * (n + 1) + i]);
      if (f0 == 0) out.push_back(node(i, j));
    }
  return out;
}

StreamfunctionResult streamfunction(const PlanarField& b, const NodeGrid& grid, Point base,
                                    double div_tol) {
  grid.validate();
  const int nx = grid.nx, ny = grid.ny;
  const double hx = grid.spacing.x, hy = grid.spacing.y;
  std::vector<Vec2> B(grid.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) B[grid.index(i, j)] = b(grid.node(i, j));
  auto at = [&](int i, int j) { return B[grid.index(i, j)]; };

  double scale = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (i + 1 < nx) scale = std::max(scale, norm(at(i + 1, j) - at(i, j)) / hx);
      if (j + 1 < ny) scale = std::max(scale, norm(at(i, j + 1) - at(i, j)) / hy);
    }
  StreamfunctionResult res;
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      double div = (at(i + 1, j).x + at(i + 1, j + 1).x - at(i, j).x - at(i, j + 1).x) / (2 * hx) +
                   (at(i, j + 1).y + at(i + 1, j + 1).y - at(i, j).y - at(i + 1, j).y) / (2 * hy);
      res.max_divergence = std::max(res.max_divergence, std::abs(div));
      if (std::abs(div) > div_tol * scale)
        throw DivergenceError("streamfunction: divergence " + fmt(div) + " in cell (" +
                                  std::to_string(i) + ", " + std::to_string(j) + ")",
                              i, j, div);
    }

  int ib = std::clamp(static_cast<int>(std::lround((base.x - grid.origin.x) / hx)), 0, nx - 1);
  int jb = std::clamp(static_cast<int>(std::lround((base.y - grid.origin.y) / hy)), 0, ny - 1);

  // Path A: along the base row in x, then columns in y. Path B: the transpose.
  std::vector<double> A(grid.size()), Bv(grid.size());
  auto dx_step = [&](int i, int j) { return 0.5 * hx * (at(i, j).y + at(i + 1, j).y); };
  auto dy_step = [&](int i, int j) { return -0.5 * hy * (at(i, j).x + at(i, j + 1).x); };

  A[grid.index(ib, jb)] = 0.0;
  for (int i = ib + 1; i < nx; ++i) A[grid.index(i, jb)] = A[grid.index(i - 1, jb)] + dx_step(i - 1, jb);
  for (int i = ib - 1; i >= 0; --i) A[grid.index(i, jb)] = A[grid.index(i + 1, jb)] - dx_step(i, jb);
  for (int i = 0; i < nx; ++i) {
    for (int j = jb + 1; j < ny; ++j) A[grid.index(i, j)] = A[grid.index(i, j - 1)] + dy_step(i, j - 1);
    for (int j = jb - 1; j >= 0; --j) A[grid.index(i, j)] = A[grid.index(i, j + 1)] - dy_step(i, j);
  }

  Bv[grid.index(ib, jb)] = 0.0;
  for (int j = jb + 1; j < ny; ++j) Bv[grid.index(ib, j)] = Bv[grid.index(ib, j - 1)] + dy_step(ib, j - 1);
  for (int j = jb - 1; j >= 0; --j) Bv[grid.index(ib, j)] = Bv[grid.index(ib, j + 1)] - dy_step(ib, j);
  for (int j = 0; j < ny; ++j) {
    for (int i = ib + 1; i < nx; ++i) Bv[grid.index(i, j)] = Bv[grid.index(i - 1, j)] + dx_step(i - 1, j);
    for (int i = ib - 1; i >= 0; --i) Bv[grid.index(i, j)] = Bv[grid.index(i + 1, j)] - dx_step(i, j);
  }
  for (std::size_t k = 0; k < A.size(); ++k)
    res.path_residual = std::max(res.path_residual, std::abs(A[k] - Bv[k]));
  res.H = std::make_shared<GridField>(grid, std::move(A));
  return res;
}

int RegularDecomposition::k_of(double h) const {
  if (records.empty()) return 0;
  auto it = std::lower_bound(records.begin(), records.end(), h,
                             [](const LevelRecord& r, double v) { return r.h < v; });
  if (it == records.end()) return records.back().k;
  if (it != records.begin() && std::abs(std::prev(it)->h - h) < std::abs(it->h - h)) --it;
  return it->k;
}

RegularDecomposition regular_decomposition(const ScalarField& H, const PlanarField& b,
                                           const AxisRect& window, int k_max,
                                           double h_resolution, const DecompositionOptions& opt) {
  if (k_max < 1) throw ConfigError("regular_decomposition needs k_max >= 1");
  if (!(h_resolution > 0)) throw ConfigError("h_resolution must be positive");
  const int n = opt.lattice;
  RegularDecomposition dec;
  dec.k_max = k_max;

  double hmin = kInf, hmax = -kInf;
  double crit_scale = opt.critical_tol * std::max(1.0, std::isfinite(b.sup_norm()) ? b.sup_norm() : 1.0);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      Point z{window.x_lo + window.width() * i / n, window.y_lo + window.height() * j / n};
      double v = H.value(z);
      hmin = std::min(hmin, v);
      hmax = std::max(hmax, v);
      if (norm(b(z)) <= crit_scale) dec.critical_values.push_back(v);
    }

  std::vector<double> levels;
  for (double h = hmin + 0.5 * h_resolution; h < hmax; h += h_resolution) levels.push_back(h);
  for (double h : opt.extra_levels)
    if (h > hmin && h < hmax) levels.push_back(h);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  std::vector<AxisRect> boxes;
  for (double h : levels) {
    auto pts = level_set_samples(H, h, window, n);
    if (pts.empty()) continue;
    LevelRecord rec;
    rec.h = h;
    rec.samples = pts.size();
    rec.min_b = kInf;
    AxisRect box{kInf, -kInf, kInf, -kInf};
    for (Point p : pts) {
      rec.min_b = std::min(rec.min_b, norm(b(p)));
      box.x_lo = std::min(box.x_lo, p.x);
      box.x_hi = std::max(box.x_hi, p.x);
      box.y_lo = std::min(box.y_lo, p.y);
      box.y_hi = std::max(box.y_hi, p.y);
    }
    for (int k = 1; k <= k_max; ++k)
      if (rec.min_b > 1.0 / k) {
        rec.k = k;
        break;
      }
    if (rec.min_b <= crit_scale) dec.critical_values.push_back(h);
    dec.records.push_back(rec);
    boxes.push_back(box);
  }
  std::sort(dec.critical_values.begin(), dec.critical_values.end());
  dec.critical_values.erase(std::unique(dec.critical_values.begin(), dec.critical_values.end()),
                            dec.critical_values.end());

  for (int k = 1; k <= k_max; ++k) {
    OmegaBand band;
    band.k = k;
    for (std::size_t r = 0; r < dec.records.size(); ++r) {
      const auto& rec = dec.records[r];
      if (rec.k == 0 || rec.k > k) continue;
      double lo = std::max(hmin, rec.h - 0.5 * h_resolution);
      double hi = std::min(hmax, rec.h + 0.5 * h_resolution);
      if (!band.h_bands.empty() && lo <= band.h_bands.back().second) {
        band.h_bands.back().second = hi;
        AxisRect& c = band.covers.back();
        c.x_lo = std::min(c.x_lo, boxes[r].x_lo);
        c.x_hi = std::max(c.x_hi, boxes[r].x_hi);
        c.y_lo = std::min(c.y_lo, boxes[r].y_lo);
        c.y_hi = std::max(c.y_hi, boxes[r].y_hi);
      } else {
        band.h_bands.push_back({lo, hi});
        band.covers.push_back(boxes[r]);
      }
    }
    dec.omega.push_back(std::move(band));
  }
  return dec;
}

void write_level_curve_csv(std::ostream& os, const LevelCurve& c, const std::string& preamble) {
  os << preamble << "x,y,h\n";
  for (const auto& p : c.breakpoints) {
    Point z = c.chart.world(p.x, p.y);
    os << fmt(z.x) << ',' << fmt(z.y) << ',' << fmt(c.h) << '\n';
  }
}

}  // namespace hamflow
