#include "hamflow/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "json.hpp"

#include "hamflow/parallel.hpp"
#include "hamflow/text.hpp"

namespace hamflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Area fraction of a triangle where a linear function with vertex values
// (v0, v1, v2) is <= h.
double triangle_fraction(double v0, double v1, double v2, double h) {
  if (v0 > v1) std::swap(v0, v1);
  if (v1 > v2) std::swap(v1, v2);
  if (v0 > v1) std::swap(v0, v1);
  if (h <= v0) return 0.0;
  if (h >= v2) return 1.0;
  if (h < v1) return (h - v0) * (h - v0) / ((v1 - v0) * (v2 - v0));
  return 1.0 - (v2 - h) * (v2 - h) / ((v2 - v0) * (v2 - v1));
}

// Length fraction of a segment with endpoint values (a, b) where the linear
// interpolant is <= h.
double segment_fraction(double a, double b, double h) {
  if (a > b) std::swap(a, b);
  if (h <= a) return a == b && h == a ? 1.0 : 0.0;
  if (h >= b) return 1.0;
  return (h - a) / (b - a);
}

// Clip segment ab to the rectangle (Liang-Barsky); false when disjoint.
bool clip(Point& a, Point& b, const AxisRect& r) {
  double t0 = 0, t1 = 1;
  Vec2 d = b - a;
  const double p[4] = {-d.x, d.x, -d.y, d.y};
  const double q[4] = {a.x - r.x_lo, r.x_hi - a.x, a.y - r.y_lo, r.y_hi - a.y};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0) {
      if (q[i] < 0) return false;
      continue;
    }
    double t = q[i] / p[i];
    if (p[i] < 0)
      t0 = std::max(t0, t);
    else
      t1 = std::min(t1, t);
    if (t0 > t1) return false;
  }
  Point a2 = a + t0 * d, b2 = a + t1 * d;
  a = a2;
  b = b2;
  return true;
}

double frobenius(const std::array<double, 4>& m) {
  return std::sqrt(m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3]);
}

}  // namespace

double VariationProfile::at(double level) const {
  if (h.empty()) return 0.0;
  if (level <= h.front()) return g.front();
  if (level >= h.back()) return g.back();
  auto it = std::upper_bound(h.begin(), h.end(), level);
  std::size_t i = static_cast<std::size_t>(it - h.begin());
  double w = (level - h[i - 1]) / (h[i] - h[i - 1]);
  return g[i - 1] + w * (g[i] - g[i - 1]);
}

std::vector<double> level_grid(const ScalarField& H, const AxisRect& window, int levels, int lattice) {
  if (levels < 2 || lattice < 1) throw ConfigError("level_grid needs levels >= 2");
  double lo = kInf, hi = -kInf;
  for (int j = 0; j <= lattice; ++j)
    for (int i = 0; i <= lattice; ++i) {
      double v = H.value({window.x_lo + window.width() * i / lattice,
                          window.y_lo + window.height() * j / lattice});
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  std::vector<double> out(levels);
  for (int i = 0; i < levels; ++i) out[i] = lo + (hi - lo) * i / (levels - 1);
  return out;
}

VariationProfile variation_profile(const PlanarField& b, const AxisRect& window,
                                   const std::vector<double>& h_grid, Variant variant, double p,
                                   const VariationOptions& opt) {
  if (!window.valid()) throw ConfigError("empty window");
  if (!b.is_hamiltonian()) throw ConfigError("variation_profile needs a Hamiltonian field");
  if (!std::is_sorted(h_grid.begin(), h_grid.end())) throw ConfigError("h grid must be sorted");
  const ScalarField& H = b.H();
  VariationProfile vp;
  vp.h = h_grid;
  vp.g.assign(h_grid.size(), 0.0);
  vp.variant = variant;
  vp.p = p;

  if (H.backend() == Backend::piecewise) {
    if (variant == Variant::bv) {
      for (const auto& e : H.gradient_jumps()) {
        Point a = e.a, c = e.b;
        if (!clip(a, c, window)) continue;
        double mass = norm(c - a) * e.jump;
        if (mass == 0) continue;
        double ha = H.value(a), hc = H.value(c);
        vp.jump_mass += mass;
        for (std::size_t k = 0; k < h_grid.size(); ++k) vp.g[k] += mass * segment_fraction(ha, hc, h_grid[k]);
      }
    }
    vp.total = vp.jump_mass;
    return vp;
  }

  const int n = opt.cells;
  const double hx = window.width() / n, hy = window.height() / n;
  const double eps = opt.fd_step * std::max(window.width(), window.height());
  std::vector<double> corner((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      corner[j * (n + 1) + i] = H.value({window.x_lo + i * hx, window.y_lo + j * hy});
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      Point c{window.x_lo + (i + 0.5) * hx, window.y_lo + (j + 0.5) * hy};
      Vec2 dxp = b(c + Vec2{eps, 0}), dxm = b(c - Vec2{eps, 0});
      Vec2 dyp = b(c + Vec2{0, eps}), dym = b(c - Vec2{0, eps});
      std::array<double, 4> D{(dxp.x - dxm.x) / (2 * eps), (dyp.x - dym.x) / (2 * eps),
                              (dxp.y - dxm.y) / (2 * eps), (dyp.y - dym.y) / (2 * eps)};
      double dens = frobenius(D);
      double mass = dens * hx * hy;
      vp.lp_mass += std::pow(dens, p) * hx * hy;
      if (mass == 0) continue;
      vp.total += mass;
      double v00 = corner[j * (n + 1) + i], v10 = corner[j * (n + 1) + i + 1];
      double v01 = corner[(j + 1) * (n + 1) + i], v11 = corner[(j + 1) * (n + 1) + i + 1];
      for (std::size_t k = 0; k < h_grid.size(); ++k) {
        double h = h_grid[k];
        double f = 0.5 * (triangle_fraction(v00, v10, v11, h) + triangle_fraction(v00, v11, v01, h));
        vp.g[k] += mass * f;
      }
    }
  return vp;
}

std::vector<double> coarea_density(ScalarFieldPtr H, const Chart& chart, double delta,
                                   const std::vector<double>& h_grid, double resolution) {
  static constexpr double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                   0.9061798459386640};
  static constexpr double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                   0.4786286704993665, 0.2369268850561891};
  std::vector<double> out(h_grid.size(), 0.0);
  const double piece = chart.window.width() / 64;
  for (std::size_t k = 0; k < h_grid.size(); ++k) {
    auto curve = level_curve(H, h_grid[k], chart, delta, resolution);
    double acc = 0;
    for (auto [u0, u1] : curve.runs) {
      std::vector<double> knots{u0};
      for (double u : curve.breaks_between(u0, u1)) knots.push_back(u);
      knots.push_back(u1);
      for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        double a = knots[i], c = knots[i + 1];
        int m = std::max(1, static_cast<int>(std::ceil((c - a) / piece)));
        for (int s = 0; s < m; ++s) {
          double lo = a + (c - a) * s / m, hi = a + (c - a) * (s + 1) / m;
          double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
          for (int g = 0; g < 5; ++g) {
            double u = mid + half * gx[g];
            Point z = curve.point_at(u);
            Vec2 gH = H->gradient(z);
            double gu = dot(gH, chart.e), gw2 = dot(gH, chart.normal());
            double slope = -gu / gw2;
            acc += gw[g] * half * std::sqrt(1 + slope * slope) / norm(gH);
          }
        }
      }
    }
    out[k] = acc;
  }
  return out;
}

double lipschitz_constant_Cprime(double C, double sup_norm, double delta) {
  if (!(delta > 0)) throw ConfigError("delta must be positive");
  if (!(C >= 1)) throw ConfigError("compressibility constant must be >= 1");
  double B = sup_norm;
  return C * C * B / (delta * delta) * (1 + 2 * B / delta + B / (delta * delta));
}

namespace {

struct PairResult {
  bool skipped = false;
  bool violation = false;
  double ratio = 0.0;
  EstimatePair pair;
  bool v1 = false, v2 = false, v3 = false;
};

bool exceeds(double lhs, double rhs) { return lhs > rhs + 1e-8 * (rhs + 1.0); }

double ratio_of(double lhs, double rhs) { return rhs > 0 ? lhs / rhs : (lhs > 0 ? kInf : 0.0); }

}  // namespace

namespace {

// Declared bound when finite. Otherwise the sampled bound over the window,
// which only sees trajectories that stay inside it.
double effective_sup(const PlanarField& b, const AxisRect& window) {
  double s = b.sup_norm();
  if (std::isfinite(s)) return s;
  return 1.001 * field_stats(b, window, 4096).sup_norm;
}

}  // namespace

EstimateReport verify_local_estimate(const PlanarField& b, const AxisRect& window, double t,
                                     const LocalEstimateOptions& opt) {
  if (!window.valid()) throw ConfigError("empty window");
  if (!(t >= 0)) throw ConfigError("t must be nonnegative");
  const auto& tr = b.transversality();
  if (!tr) throw ConfigError("local estimate needs declared transversality");
  if (!b.is_hamiltonian()) throw ConfigError("local estimate needs a Hamiltonian field");
  EstimateReport rep;
  rep.kind = "local";
  const double sup = effective_sup(b, window);
  rep.sup_norm = sup;
  rep.Cprime = lipschitz_constant_Cprime(b.compressibility_L(), sup, tr->delta);
  const ScalarField& H = b.H();
  auto prof = variation_profile(b, window, level_grid(H, window, opt.levels), Variant::bv, 1.0,
                                opt.variation);

  const double margin = sup * t;
  const double scale = std::min(window.width(), window.height());
  std::mt19937_64 rng(opt.seed);
  std::vector<std::pair<Point, Point>> draws(opt.pairs);
  for (auto& d : draws) {
    Point z{window.x_lo + window.width() * uniform01(rng), window.y_lo + window.height() * uniform01(rng)};
    double rho = 0.25 * scale * std::pow(10.0, -4.0 * uniform01(rng));
    double th = 2 * std::numbers::pi * uniform01(rng);
    d = {z, z + rho * Vec2{std::cos(th), std::sin(th)}};
  }

  auto X = [&](Point z) {
    if (opt.method == FlowMethod::rk) return rk_flow(b, z, t, opt.rk).position;
    auto fp = levelset_flow(b, z, t, opt.chart);
    if (fp.exited || fp.critical) throw NumericalError("level-set flow did not reach t");
    return fp.position;
  };

  std::vector<PairResult> res(draws.size());
  parallel_for(draws.size(), opt.threads, [&](std::size_t i) {
    auto [z, z2] = draws[i];
    PairResult& r = res[i];
    if (window.depth(z) <= margin || window.depth(z2) <= margin) {
      r.skipped = true;
      return;
    }
    double lhs = norm(X(z) - X(z2));
    double rhs = rep.Cprime * (norm(z - z2) + std::abs(prof.at(H.value(z)) - prof.at(H.value(z2))));
    r.pair = {z, z2, lhs, rhs};
    r.violation = exceeds(lhs, rhs);
    r.ratio = ratio_of(lhs, rhs);
  });
  for (const auto& r : res) {
    if (r.skipped) {
      ++rep.skipped;
      continue;
    }
    ++rep.pairs_tested;
    if (r.violation) ++rep.violations;
    if (!rep.worst || r.ratio > rep.worst_ratio) {
      rep.worst_ratio = r.ratio;
      rep.worst = r.pair;
    }
  }
  return rep;
}

EstimateReport verify_global_estimate(const PlanarField& b, const AxisRect& window, int k, double t,
                                      const GlobalEstimateOptions& opt) {
  if (!window.valid()) throw ConfigError("empty window");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (!(t > 0)) throw ConfigError("t must be positive");
  if (!b.is_hamiltonian()) throw ConfigError("global estimate needs a Hamiltonian field");
  const ScalarField& H = b.H();
  const double sup = effective_sup(b, window);
  EstimateReport rep;
  rep.kind = "global";
  rep.sup_norm = sup;
  rep.k = k;

  auto levels = level_grid(H, window, opt.levels, opt.lattice);
  double h_res = (levels.back() - levels.front()) / 256;
  if (!(h_res > 0)) throw ConfigError("H is constant on the window");
  DecompositionOptions dopt;
  dopt.lattice = opt.lattice;
  auto dec = regular_decomposition(H, b, window, k + 1, h_res, dopt);
  auto in_omega = [&](Point z, int kk) {
    int j = dec.k_of(H.value(z));
    return j >= 1 && j <= kk;
  };

  std::vector<Point> samples;
  const int n = opt.lattice;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      Point z{window.x_lo + window.width() * i / n, window.y_lo + window.height() * j / n};
      if (in_omega(z, k)) samples.push_back(z);
    }
  if (samples.empty()) throw ConfigError("Omega_k has no samples in the window");

  // Covering of Omega_k by balls B_rbar(z_i) with B_4rbar(z_i) in Omega_{k+1}
  // and b . e_i >= |b| cos(atan L) there.
  const double cos_min = std::cos(std::atan(opt.flat_L));
  double rbar = std::min(window.width(), window.height()) / 8;
  bool found = false;
  Point failing{};
  for (int attempt = 0; attempt < opt.covering_attempts && !found; ++attempt, rbar *= 0.5) {
    double side = rbar * std::numbers::sqrt2;
    std::vector<std::pair<long, long>> cells;
    for (Point z : samples)
      cells.emplace_back(static_cast<long>(std::floor((z.x - window.x_lo) / side)),
                         static_cast<long>(std::floor((z.y - window.y_lo) / side)));
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    bool ok = true;
    for (auto [ci, cj] : cells) {
      Point c{window.x_lo + (ci + 0.5) * side, window.y_lo + (cj + 0.5) * side};
      Vec2 bc = b(c);
      if (norm(bc) == 0) {
        ok = false;
        failing = c;
        break;
      }
      Vec2 e = bc / norm(bc);
      const int m = 8;
      for (int a = -m; a <= m && ok; ++a)
        for (int q = -m; q <= m && ok; ++q) {
          Vec2 d{4 * rbar * a / m, 4 * rbar * q / m};
          if (norm(d) > 4 * rbar) continue;
          Point z = c + d;
          Vec2 bz = b(z);
          if (!in_omega(z, k + 1) || dot(bz, e) < norm(bz) * cos_min) ok = false;
        }
      if (!ok) {
        failing = c;
        break;
      }
    }
    if (ok) {
      found = true;
      rep.r_bar = rbar;
      rep.covering_balls = cells.size();
    }
  }
  if (!found)
    throw NumericalError("no covering radius found; last failing ball at (" + fmt(failing.x) + ", " +
                         fmt(failing.y) + ")");

  rep.N_tilde = static_cast<long>(std::ceil(t * sup / rep.r_bar));
  rep.N_tilde = std::max(1L, rep.N_tilde);
  double kk = k + 1.0;
  rep.r = std::min({rep.r_bar, rep.r_bar / (2 * kk * sup), t / (2 * rep.N_tilde * kk)});
  rep.c1 = 2 * kk;
  rep.c2 = rep.N_tilde * kk * kk * (1 + 2 * sup) + 2 * kk;

  auto prof = variation_profile(b, window, levels, Variant::bv, 1.0, opt.variation);

  std::mt19937_64 rng(opt.seed);
  std::vector<std::pair<Point, Point>> draws(opt.pairs);
  for (auto& d : draws) {
    std::size_t idx = std::min(samples.size() - 1, static_cast<std::size_t>(uniform01(rng) * samples.size()));
    double rho = rep.r * std::sqrt(uniform01(rng));
    double th = 2 * std::numbers::pi * uniform01(rng);
    d = {samples[idx], samples[idx] + rho * Vec2{std::cos(th), std::sin(th)}};
  }

  std::vector<PairResult> res(draws.size());
  parallel_for(draws.size(), opt.threads, [&](std::size_t i) {
    auto [zb, z] = draws[i];
    PairResult& r = res[i];
    Point Xb = rk_flow(b, zb, t, opt.rk).position;
    double dH = std::abs(H.value(zb) - H.value(z));
    double dg = std::abs(prof.at(H.value(zb)) - prof.at(H.value(z)));
    double dz = norm(zb - z);
    double bound = dg + dz;
    double lo = std::max(0.0, t - rep.c2 * bound), hi = t + rep.c2 * bound;
    double s = t;
    double dist = 0;
    if (hi - lo > opt.s_tol) {
      // Any s in [lo, hi] is a witness; scan a neighbourhood of t with steps
      // short against r_bar so that the nearest passage is bracketed.
      const int m = std::max(2, opt.scan);
      double step = std::min((hi - lo) / m, 0.25 * rep.r_bar / sup);
      lo = std::max(lo, t - 0.5 * m * step);
      hi = std::min(hi, lo + m * step);
      std::vector<Point> P(m + 1);
      std::vector<double> S(m + 1);
      P[0] = rk_flow(b, z, lo, opt.rk).position;
      S[0] = lo;
      for (int q = 1; q <= m; ++q) {
        S[q] = lo + (hi - lo) * q / m;
        P[q] = rk_flow(b, P[q - 1], S[q] - S[q - 1], opt.rk).position;
      }
      int best = 0;
      for (int q = 1; q <= m; ++q)
        if (norm(P[q] - Xb) < norm(P[best] - Xb)) best = q;
      int qa = std::max(0, best - 1), qb = std::min(m, best + 1);
      Point base = P[qa];
      double sa = S[qa];
      auto D = [&](double x) { return norm(rk_flow(b, base, x - sa, opt.rk).position - Xb); };
      const double gr = (std::sqrt(5.0) - 1) / 2;
      double a = S[qa], c = S[qb];
      double x1 = c - gr * (c - a), x2 = a + gr * (c - a);
      double f1 = D(x1), f2 = D(x2);
      while (c - a > opt.s_tol) {
        if (f1 <= f2) {
          c = x2;
          x2 = x1;
          f2 = f1;
          x1 = c - gr * (c - a);
          f1 = D(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + gr * (c - a);
          f2 = D(x2);
        }
      }
      s = 0.5 * (a + c);
      dist = D(s);
      if (norm(P[best] - Xb) < dist) {
        s = S[best];
        dist = norm(P[best] - Xb);
      }
    } else {
      dist = norm(rk_flow(b, z, s, opt.rk).position - Xb);
    }
    double rhs1 = rep.c1 * dH;
    double lhs2 = std::abs(t - s), rhs2 = rep.c2 * bound;
    double lhs3 = dz == 0 ? 0.0 : norm(Xb - rk_flow(b, z, t, opt.rk).position);
    double rhs3 = sup * (rep.c1 + rep.c2) * dz + rep.c2 * sup * dg;
    r.v1 = exceeds(dist, rhs1);
    r.v2 = exceeds(lhs2, rhs2);
    r.v3 = exceeds(lhs3, rhs3);
    r.violation = r.v1 || r.v2 || r.v3;
    double q1 = ratio_of(dist, rhs1), q2 = ratio_of(lhs2, rhs2), q3 = ratio_of(lhs3, rhs3);
    r.ratio = std::max({q1, q2, q3});
    if (r.ratio == q1)
      r.pair = {zb, z, dist, rhs1};
    else if (r.ratio == q2)
      r.pair = {zb, z, lhs2, rhs2};
    else
      r.pair = {zb, z, lhs3, rhs3};
  });
  for (const auto& r : res) {
    ++rep.pairs_tested;
    if (r.violation) ++rep.violations;
    rep.item1_violations += r.v1;
    rep.item2_violations += r.v2;
    rep.chain_violations += r.v3;
    if (!rep.worst || r.ratio > rep.worst_ratio) {
      rep.worst_ratio = r.ratio;
      rep.worst = r.pair;
    }
  }
  return rep;
}

namespace {

template <class CellFn>
DiscreteNorm over_cells(const FlowMap& fm, const std::optional<AxisRect>& region, CellFn&& fn) {
  DiscreteNorm out;
  const auto& g = fm.grid;
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i + 1 < g.nx; ++i) {
      if (region) {
        Point a = g.node(i, j), c = g.node(i + 1, j + 1);
        if (!(region->contains(a, 1e-12 * g.spacing.x) && region->contains(c, 1e-12 * g.spacing.x))) continue;
      }
      if (!(fm.ok(i, j) && fm.ok(i + 1, j) && fm.ok(i, j + 1) && fm.ok(i + 1, j + 1))) {
        ++out.excluded_cells;
        continue;
      }
      ++out.cells;
      fn(i, j, out.value);
    }
  return out;
}

double comp(Point p, int c) { return c == 0 ? p.x : p.y; }

void cell_gradient(const FlowMap& fm, int component, int i, int j, double& gx, double& gy) {
  const auto& g = fm.grid;
  double u00 = comp(fm.at(i, j), component), u10 = comp(fm.at(i + 1, j), component);
  double u01 = comp(fm.at(i, j + 1), component), u11 = comp(fm.at(i + 1, j + 1), component);
  gx = 0.5 * ((u10 - u00) + (u11 - u01)) / g.spacing.x;
  gy = 0.5 * ((u01 - u00) + (u11 - u10)) / g.spacing.y;
}

}  // namespace

DiscreteNorm discrete_tv(const FlowMap& fm, int component, const std::optional<AxisRect>& region) {
  if (component != 0 && component != 1) throw ConfigError("component must be 0 or 1");
  double area = fm.grid.spacing.x * fm.grid.spacing.y;
  return over_cells(fm, region, [&](int i, int j, double& acc) {
    double gx, gy;
    cell_gradient(fm, component, i, j, gx, gy);
    acc += (std::abs(gx) + std::abs(gy)) * area;
  });
}

DiscreteNorm discrete_sobolev(const FlowMap& fm, int component, double p,
                              const std::optional<AxisRect>& region) {
  if (component != 0 && component != 1) throw ConfigError("component must be 0 or 1");
  if (!(p >= 1)) throw ConfigError("Sobolev exponent must be >= 1");
  double area = fm.grid.spacing.x * fm.grid.spacing.y;
  auto out = over_cells(fm, region, [&](int i, int j, double& acc) {
    double gx, gy;
    cell_gradient(fm, component, i, j, gx, gy);
    acc += std::pow(std::hypot(gx, gy), p) * area;
  });
  out.value = std::pow(out.value, 1.0 / p);
  return out;
}

void write_variation_csv(std::ostream& os, const VariationProfile& vp, const std::string& preamble) {
  os << preamble << "h,g\n";
  for (std::size_t k = 0; k < vp.h.size(); ++k) os << fmt(vp.h[k]) << ',' << fmt(vp.g[k]) << '\n';
}

std::string report_json(const EstimateReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = r.kind;
  j["pairs_tested"] = r.pairs_tested;
  j["skipped"] = r.skipped;
  j["violations"] = r.violations;
  j["worst_ratio"] = r.worst_ratio;
  j["sup_norm"] = r.sup_norm;
  if (r.kind == "local") {
    j["constants"] = {{"Cprime", r.Cprime}};
  } else {
    j["constants"] = {{"k", r.k}, {"c1", r.c1}, {"c2", r.c2}, {"r_bar", r.r_bar}, {"r", r.r},
                      {"N_tilde", r.N_tilde}, {"covering_balls", r.covering_balls}};
    j["item1_violations"] = r.item1_violations;
    j["item2_violations"] = r.item2_violations;
    j["chain_violations"] = r.chain_violations;
  }
  if (r.worst)
    j["worst_pair"] = {{"z", {r.worst->z.x, r.worst->z.y}},
                       {"z2", {r.worst->z2.x, r.worst->z2.y}},
                       {"lhs", r.worst->lhs},
                       {"rhs", r.worst->rhs}};
  return j.dump(2);
}

}  // namespace hamflow
