#include "hamflow/counterexample.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "hamflow/parallel.hpp"
#include "hamflow/text.hpp"

namespace hamflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Rational c_of(int n) {
  boost::multiprecision::cpp_int den = boost::multiprecision::cpp_int(n) * n;
  den <<= n;
  return Rational(1) / Rational(den);
}

void require(bool ok, const std::string& what, int n) {
  if (!ok) throw NumericalError("construction identity failed at level " + std::to_string(n) + ": " + what);
}

AffineCell affine_triangle(Point p0, double v0, Point p1, double v1, Point p2, double v2) {
  double det = cross(p1 - p0, p2 - p0);
  AffineCell c;
  c.polygon = {p0, p1, p2};
  c.cx = ((v1 - v0) * (p2.y - p0.y) - (v2 - v0) * (p1.y - p0.y)) / det;
  c.cy = ((v2 - v0) * (p1.x - p0.x) - (v1 - v0) * (p2.x - p0.x)) / det;
  c.c0 = v0 - c.cx * p0.x - c.cy * p0.y;
  return c;
}

AffineCell affine_rect(double x0, double x1, double y0, double y1, double c0, double cy) {
  AffineCell c;
  c.polygon = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  c.c0 = c0;
  c.cy = cy;
  return c;
}

}  // namespace

std::string to_string(const Rational& q) { return q.str(); }

LevelParams level_params(int n) {
  if (n < 1 || n > kMaxLevel + 1) throw ConfigError("level index out of range: " + std::to_string(n));
  LevelParams p;
  p.n = n;
  p.c = c_of(n);
  Rational gap = p.c / 2 - c_of(n + 1);
  p.a = Rational(n - 1, 2 * n) * gap;
  p.r = Rational(1, 2 * n) * gap;
  return p;
}

LevelParams layout_params(int n) {
  LevelParams p = level_params(n);
  if (n == 1) {
    Rational gap = p.c / 2 - c_of(2);
    p.a = gap / 4;
    p.r = gap / 4;
  }
  return p;
}

std::uint64_t CantorTree::component_count(int n) const {
  if (n < 1 || n > n_max) throw ConfigError("level outside the tree");
  std::uint64_t count = 1;
  for (int l = 1; l < n; ++l) count *= level(l).y_child.size();
  return count;
}

CantorTree build_tree(int n_max, int materialize_depth) {
  if (n_max < 1 || n_max > kMaxLevel)
    throw ConfigError("tree depth must be in [1, " + std::to_string(kMaxLevel) + "]");
  CantorTree t;
  t.n_max = n_max;
  Rational v_prev = 1;
  Rational s = c_of(1);
  Rational sigma = 1;
  for (int n = 1; n <= n_max; ++n) {
    LevelGeometry g;
    g.n = n;
    g.p = layout_params(n);
    const Rational &c = g.p.c, &a = g.p.a, &r = g.p.r;
    g.c_next = c_of(n + 1);
    g.d = g.c_next + 2 * r;
    g.s = s;
    g.v_prev = v_prev;
    g.v = (s / 4) / g.d;
    g.v_prime = (s / 8) / a;
    g.x_child = c / 4 + a + r;
    g.y_child = {a + r, 3 * a + g.d + r};
    g.f_child = {s / 8 + g.v * r, 5 * s / 8 + g.v * r};
    g.core_y = {Rational(0), a, a + g.d, 2 * a + g.d, 3 * a + g.d, 3 * a + 2 * g.d, 4 * a + 2 * g.d};
    g.phi = {Rational(0), s / 8, 3 * s / 8, s / 2, 5 * s / 8, 7 * s / 8, s};
    for (int k = 0; k < 7; ++k) g.side_y[k] = g.phi[k] * c / s;

    require(c == 2 * g.c_next + 4 * (a + r), "packing c = 2 c_next + 4(a + r)", n);
    require(g.core_y[6] == c, "vertical stack fills the component", n);
    require(c / 2 - 2 * a == g.d, "D-blocks are squares", n);
    require(2 * (s / 4) + 4 * (s / 8) == s, "oscillation budget", n);
    Rational s_next = g.v * g.c_next;
    require(4 * s_next == g.c_next / (g.c_next + 2 * r) * s, "s recursion", n);
    require(g.y_child[0] + g.c_next + r == g.core_y[2] && g.y_child[1] + g.c_next + r == g.core_y[5],
            "children sit in the D-blocks with margin r", n);
    require(g.v_prime > g.v_prev && g.v_prev > g.v, "speed ordering v' > v_prev > v", n);
    if (n >= 2) sigma *= g.p.c / (g.p.c + 2 * t.levels.back().p.r);
    t.sigma_layout.push_back(sigma);
    t.levels.push_back(g);
    v_prev = g.v;
    s = s_next;
  }

  int depth = std::min(n_max, materialize_depth);
  if (depth >= 1) t.components.push_back({ComponentRect{0, 0, 0}});
  for (int n = 1; n < depth; ++n) {
    const auto& g = t.levels[n - 1];
    std::vector<ComponentRect> next;
    next.reserve(t.components.back().size() * 2);
    for (const auto& comp : t.components.back())
      for (int j = 0; j < 2; ++j)
        next.push_back({comp.x0 + g.x_child, comp.y0 + g.y_child[j], comp.f0 + g.f_child[j]});
    t.components.push_back(std::move(next));
  }
  return t;
}

double sigma(int n_terms) {
  if (n_terms < 2) throw ConfigError("sigma needs n_terms >= 2");
  double prod = 1.0;
  for (int l = 2; l <= n_terms; ++l) {
    double c = std::ldexp(1.0 / (double(l) * l), -l);
    double cp = std::ldexp(1.0 / (double(l - 1) * (l - 1)), -(l - 1));
    double r = (cp / 2 - c) / (2.0 * (l - 1));
    prod *= c / (c + 2 * r);
  }
  return prod;
}

double sigma_limit(long M) {
  // -log sigma = sum_{m>=1} log(1 + 2 r_m / c_{m+1}), 2 r_m / c_{m+1} = (2m+1)/m^3.
  auto g = [](long double m) { return std::log1p((2 * m + 1) / (m * m * m)); };
  long double s = 0;
  for (long m = M - 1; m >= 1; --m) s += g(static_cast<long double>(m));
  // Tail by Euler-Maclaurin; g(x) = 2/x^2 + 1/x^3 - 2/x^4 - 2/x^5 + O(x^-6).
  long double x = static_cast<long double>(M);
  long double integral = 2 / x + 1 / (2 * x * x) - 2 / (3 * x * x * x) - 1 / (2 * x * x * x * x);
  long double dg = -4 / (x * x * x) - 3 / (x * x * x * x);
  long double tail = integral + g(x) / 2 - dg / 12;
  return static_cast<double>(std::exp(-(s + tail)));
}

std::vector<AffineCell> component_cells(const LevelGeometry& g, bool frame) {
  double c = to_double(g.p.c), a = to_double(g.p.a), vp = to_double(g.v_prev);
  std::array<double, 7> P, L, phi;
  for (int k = 0; k < 7; ++k) {
    P[k] = to_double(g.core_y[k]);
    L[k] = to_double(g.side_y[k]);
    phi[k] = to_double(g.phi[k]);
  }
  double x1 = c / 4, x2 = c / 4 + a, x3 = 3 * c / 4 - a, x4 = 3 * c / 4;
  std::vector<AffineCell> cells;
  cells.push_back(affine_rect(0, x1, 0, c, 0, vp));
  for (int k = 0; k < 6; ++k) {
    Point Fk{x1, L[k]}, Fk1{x1, L[k + 1]}, Ck{x2, P[k]}, Ck1{x2, P[k + 1]};
    cells.push_back(affine_triangle(Fk, phi[k], Ck1, phi[k + 1], Fk1, phi[k + 1]));
    cells.push_back(affine_triangle(Fk, phi[k], Ck, phi[k], Ck1, phi[k + 1]));
  }
  for (int k = 0; k < 6; ++k) {
    double slope = (phi[k + 1] - phi[k]) / (P[k + 1] - P[k]);
    cells.push_back(affine_rect(x2, x3, P[k], P[k + 1], phi[k] - slope * P[k], slope));
  }
  for (int k = 0; k < 6; ++k) {
    Point Ck{x3, P[k]}, Ck1{x3, P[k + 1]}, Fk{x4, L[k]}, Fk1{x4, L[k + 1]};
    cells.push_back(affine_triangle(Ck, phi[k], Fk1, phi[k + 1], Ck1, phi[k + 1]));
    cells.push_back(affine_triangle(Ck, phi[k], Fk, phi[k], Fk1, phi[k + 1]));
  }
  cells.push_back(affine_rect(x4, c, 0, c, 0, vp));
  if (frame) {
    double W = c;
    cells.push_back(affine_rect(-W, c + W, -W, 0, 0, vp));
    cells.push_back(affine_rect(-W, c + W, c, c + W, 0, vp));
    cells.push_back(affine_rect(-W, 0, 0, c, 0, vp));
    cells.push_back(affine_rect(c, c + W, 0, c, 0, vp));
  }
  return cells;
}

// ---------------------------------------------------------------- field

CantorField::CantorField(std::shared_ptr<const CantorTree> tree, int depth)
    : tree_(std::move(tree)), depth_(depth) {
  if (!tree_) throw ConfigError("CantorField needs a tree");
  if (depth_ < 0 || depth_ > tree_->n_max)
    throw ConfigError("CantorField depth " + std::to_string(depth_) + " exceeds tree depth " +
                      std::to_string(tree_->n_max));
  for (int n = 1; n <= depth_; ++n) {
    const auto& g = tree_->level(n);
    Level L;
    L.c = to_double(g.p.c);
    L.a = to_double(g.p.a);
    L.r = to_double(g.p.r);
    L.d = to_double(g.d);
    L.s = to_double(g.s);
    L.vp = to_double(g.v_prev);
    L.v = to_double(g.v);
    L.vq = to_double(g.v_prime);
    L.xb = {0.0, to_double(g.p.c / 4), to_double(g.p.c / 4 + g.p.a),
            to_double(3 * g.p.c / 4 - g.p.a), to_double(3 * g.p.c / 4), L.c};
    for (int k = 0; k < 7; ++k) {
      L.P[k] = to_double(g.core_y[k]);
      L.L[k] = to_double(g.side_y[k]);
      L.phi[k] = to_double(g.phi[k]);
    }
    L.x_child = to_double(g.x_child);
    L.y_child = {to_double(g.y_child[0]), to_double(g.y_child[1])};
    L.f_child = {to_double(g.f_child[0]), to_double(g.f_child[1])};
    auto cells = component_cells(g);
    // cells: [0] F left, [1..12] left fan, [13..18] core, [19..30] right fan, [31] F right
    for (int k = 0; k < 6; ++k) {
      L.left[k] = {cells[1 + 2 * k], cells[2 + 2 * k]};
      L.right[k] = {cells[19 + 2 * k], cells[20 + 2 * k]};
    }
    for (const auto& cell : cells) {
      lipschitz_ = std::max(lipschitz_, norm(cell.grad()));
      bool in_d = n < depth_ && (&cell == &cells[14] || &cell == &cells[17]);
      if (!in_d) {
        min_speed_ = std::min(min_speed_, cell.cy);
        max_speed_ = std::max(max_speed_, cell.cy);
      }
    }
    // D-block margins keep speed v even when children are present.
    min_speed_ = std::min(min_speed_, L.v);
    lv_.push_back(L);
  }
}

void CantorField::local_eval(const Level& L, double X, double Y, double& phi, Vec2& grad) const {
  auto use = [&](const AffineCell& c) {
    phi = c.c0 + c.cx * X + c.cy * Y;
    grad = c.grad();
  };
  if (X < L.xb[1] || X >= L.xb[4]) {
    phi = L.vp * Y;
    grad = {0.0, L.vp};
    return;
  }
  if (X < L.xb[2] || X >= L.xb[3]) {
    bool left = X < L.xb[2];
    double lam = left ? (X - L.xb[1]) / L.a : (X - L.xb[3]) / L.a;
    const auto& from = left ? L.L : L.P;
    const auto& to = left ? L.P : L.L;
    int k = 0;
    for (int m = 5; m >= 1; --m) {
      double yb = from[m] + lam * (to[m] - from[m]);
      if (Y > yb || (Y == yb && !(to[m] > from[m]))) {
        k = m;
        break;
      }
      if (Y == yb) {  // boundary rising to the right: the right-hand cell is below
        k = m - 1;
        break;
      }
    }
    double diag = left ? L.L[k] + lam * (L.P[k + 1] - L.L[k]) : L.P[k] + lam * (L.L[k + 1] - L.P[k]);
    const auto& tri = left ? L.left[k] : L.right[k];
    use(Y > diag ? tri[0] : tri[1]);
    return;
  }
  int k = 0;
  for (int m = 5; m >= 1; --m)
    if (Y >= L.P[m]) {
      k = m;
      break;
    }
  double slope = (L.phi[k + 1] - L.phi[k]) / (L.P[k + 1] - L.P[k]);
  phi = L.phi[k] + slope * (Y - L.P[k]);
  grad = {0.0, slope};
}

namespace {
struct Hit {
  double value;
  Vec2 grad;
  int level;
};
}  // namespace

template <class Visit>
void CantorField::descend(Point z, Visit&& visit) const {
  double X0 = 0, Y0 = 0, F0 = 0;
  if (!(std::isfinite(z.x) && std::isfinite(z.y))) throw DomainError("non-finite point");
  for (int n = 1; n <= depth_; ++n) {
    const Level& L = lv_[n - 1];
    double X = z.x - X0, Y = z.y - Y0;
    if (!(X >= 0 && X < L.c && Y >= 0 && Y < L.c)) {
      // Only reachable at n = 1: children are entered only when inside.
      visit(Hit{z.y, {0.0, 1.0}, 0});
      return;
    }
    if (n < depth_ && X >= L.xb[2] && X < L.xb[3]) {
      double cn = lv_[n].c;
      double Xc = X - L.x_child;
      int j = -1;
      if (Y >= L.P[1] && Y < L.P[2]) j = 0;
      if (Y >= L.P[4] && Y < L.P[5]) j = 1;
      if (j >= 0) {
        double Yc = Y - L.y_child[j];
        if (Xc >= 0 && Xc < cn && Yc >= 0 && Yc < cn) {
          X0 += L.x_child;
          Y0 += L.y_child[j];
          F0 += L.f_child[j];
          continue;
        }
      }
    }
    double phi;
    Vec2 g;
    local_eval(L, X, Y, phi, g);
    visit(Hit{F0 + phi, g, n});
    return;
  }
  visit(Hit{z.y, {0.0, 1.0}, 0});
}

double CantorField::value(Point z) const {
  double v = 0;
  descend(z, [&](const Hit& h) { v = h.value; });
  return v;
}

Vec2 CantorField::gradient(Point z) const {
  Vec2 g;
  descend(z, [&](const Hit& h) { g = h.grad; });
  return g;
}

int CantorField::level_at(Point z) const {
  double X0 = 0, Y0 = 0;
  int deepest = 0;
  for (int n = 1; n <= depth_; ++n) {
    const Level& L = lv_[n - 1];
    double X = z.x - X0, Y = z.y - Y0;
    if (!(X >= 0 && X < L.c && Y >= 0 && Y < L.c)) break;
    deepest = n;
    if (n == depth_) break;
    double cn = lv_[n].c;
    int j = -1;
    for (int m = 0; m < 2; ++m) {
      double Xc = X - L.x_child, Yc = Y - L.y_child[m];
      if (Xc >= 0 && Xc < cn && Yc >= 0 && Yc < cn) j = m;
    }
    if (j < 0) break;
    X0 += L.x_child;
    Y0 += L.y_child[j];
  }
  return deepest;
}

double CantorField::feature_scale(Point z) const {
  int l = level_at(z);
  return l == 0 ? kInf : lv_[l - 1].r;
}

void CantorField::breaks_rec(int n, double x0, double f0, double level, double x_lo, double x_hi,
                             std::vector<double>& out) const {
  const Level& L = lv_[n - 1];
  double t = level - f0;
  if (t < 0 || t > L.s) return;
  for (double xb : L.xb) out.push_back(x0 + xb);
  int k = 0;
  while (k < 5 && t >= L.phi[k + 1]) ++k;
  double lam = (t - L.phi[k]) / (L.phi[k + 1] - L.phi[k]);
  out.push_back(x0 + L.xb[1] + lam * L.a);
  out.push_back(x0 + L.xb[3] + lam * L.a);
  if (n < depth_)
    for (int j = 0; j < 2; ++j) breaks_rec(n + 1, x0 + L.x_child, f0 + L.f_child[j], level, x_lo, x_hi, out);
}

std::vector<double> CantorField::vertical_breaks(double level, double x_lo, double x_hi) const {
  std::vector<double> out;
  if (depth_ >= 1) breaks_rec(1, 0.0, 0.0, level, x_lo, x_hi, out);
  out.erase(std::remove_if(out.begin(), out.end(), [&](double x) { return !(x > x_lo && x < x_hi); }),
            out.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<GradientJump> CantorField::gradient_jumps() const {
  std::vector<GradientJump> out;
  // Component origins per level, recomputed from the offsets.
  std::vector<Point> origins{{0.0, 0.0}};
  for (int n = 1; n <= depth_; ++n) {
    const Level& L = lv_[n - 1];
    PiecewiseAffineField tmpl(component_cells(tree_->level(n), true));
    auto edges = tmpl.gradient_jumps();
    for (Point o : origins)
      for (const auto& e : edges) out.push_back({e.a + o, e.b + o, e.jump});
    if (n < depth_) {
      std::vector<Point> next;
      next.reserve(origins.size() * 2);
      for (Point o : origins)
        for (int j = 0; j < 2; ++j) next.push_back(o + Vec2{L.x_child, L.y_child[j]});
      origins = std::move(next);
    }
  }
  return out;
}

PlanarField cantor_planar_field(std::shared_ptr<const ScalarField> f, double min_speed,
                                double max_speed, double lipschitz) {
  auto H = std::make_shared<ScaledField>(std::move(f), -1.0);
  (void)max_speed;
  return PlanarField::hamiltonian(H)
      .with_sup_norm(lipschitz)
      .with_transversality({{1.0, 0.0}, min_speed, AxisRect::everywhere()});
}

PlanarField cantor_planar_field(std::shared_ptr<const CantorField> f) {
  double lo = f->min_speed(), hi = f->max_speed(), lip = f->lipschitz();
  return cantor_planar_field(std::static_pointer_cast<const ScalarField>(f), lo, hi, lip);
}

// ---------------------------------------------------------------- ladders

CrossingLadder crossing_ladder(const CantorTree& tree, int n_max) {
  if (n_max < 1 || n_max > tree.n_max) throw ConfigError("ladder depth outside the tree");
  CrossingLadder L;
  L.method = "analytic";
  Rational T1_first = 0, sum = 0;
  for (int n = 1; n <= n_max; ++n) {
    const auto& g = tree.level(n);
    const Rational &c = g.p.c, &a = g.p.a;
    Rational T1 = c / g.v_prev;
    Rational Ts = (c / 2 + a) / g.v_prev + (c / 2 - a) / g.v;
    Rational Tf = (c / 2 + a) / g.v_prev + (c / 2 - a) / g.v_prime;
    Rational T;
    if (n == 1) {
      T1_first = (1 - c) + Ts;
      T = T1_first;
    } else {
      T = T1_first + sum + Tf - T1;
      sum += Ts - T1;
    }
    L.n.push_back(n);
    L.T1_exact.push_back(T1);
    L.Ts_exact.push_back(Ts);
    L.Tf_exact.push_back(Tf);
    L.T_exact.push_back(T);
    L.T1.push_back(to_double(T1));
    L.Ts.push_back(to_double(Ts));
    L.Tf.push_back(to_double(Tf));
    L.T.push_back(to_double(T));
    L.sigma_partial.push_back(n >= 2 ? sigma(n) : 1.0);
  }
  return L;
}

namespace {

struct LowestComponent {
  double x0 = 0, y0 = 0, f0 = 0;
};

LowestComponent lowest(const CantorTree& tree, int n) {
  LowestComponent c;
  for (int l = 1; l < n; ++l) {
    const auto& g = tree.level(l);
    c.x0 += to_double(g.x_child);
    c.y0 += to_double(g.y_child[0]);
    c.f0 += to_double(g.f_child[0]);
  }
  return c;
}

// Time to cross [x0, x0 + c] on the level f = phi of the given field.
double transit(const PlanarField& b, double phi, double x0, double y0, double c) {
  Chart chart;
  chart.window = {x0, x0 + c, y0 - c, y0 + 2 * c};
  double delta = b.transversality()->delta;
  auto curve = level_curve(b.H_ptr(), -phi, chart, delta, c / 8);
  return time_along_level(curve, b, x0, x0 + c);
}

}  // namespace

double fast_height(const CantorTree& tree, int n) {
  auto c = lowest(tree, n);
  return c.f0 + to_double(tree.level(n).s) / 16;
}

double slow_height(const CantorTree& tree, int n) {
  auto c = lowest(tree, n);
  const auto& g = tree.level(n);
  return c.f0 + to_double(g.s / 8 + g.v * g.p.r / 2);
}

CrossingLadder crossing_ladder_trajectory(std::shared_ptr<const CantorTree> tree, int n_max,
                                          unsigned threads) {
  if (!tree || n_max < 1 || n_max > tree->n_max) throw ConfigError("ladder depth outside the tree");
  CrossingLadder L;
  L.method = "trajectory";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::size_t N = static_cast<std::size_t>(n_max);
  L.n.resize(N);
  L.T1.assign(N, nan);
  L.Ts.assign(N, nan);
  L.Tf.assign(N, nan);
  L.T.assign(N, nan);
  L.sigma_partial.resize(N);
  L.ok.assign(N, false);
  parallel_for(N, threads, [&](std::size_t k) {
    int n = static_cast<int>(k) + 1;
    L.n[k] = n;
    L.sigma_partial[k] = n >= 2 ? sigma(n) : 1.0;
    try {
      auto fn = std::make_shared<CantorField>(tree, n);
      auto fp = std::make_shared<CantorField>(tree, n - 1);
      auto bn = cantor_planar_field(fn), bp = cantor_planar_field(fp);
      const auto& g = tree->level(n);
      auto comp = lowest(*tree, n);
      double c = to_double(g.p.c), s = to_double(g.s);
      L.T1[k] = transit(bp, comp.f0 + s / 2, comp.x0, comp.y0, c);
      L.Ts[k] = transit(bn, slow_height(*tree, n), comp.x0, comp.y0, c);
      L.Tf[k] = transit(bn, comp.f0 + s / 16, comp.x0, comp.y0, c);
      double y = n == 1 ? slow_height(*tree, 1) : fast_height(*tree, n);
      std::array<double, 1> ys{y};
      L.T[k] = crossing_times(bn, ys).front().T;
      L.ok[k] = true;
    } catch (const Error&) {
      L.ok[k] = false;
    }
  });
  return L;
}

std::vector<double> alternating_heights(const CantorTree& tree, int n) {
  if (n < 1 || n > tree.n_max) throw ConfigError("level outside the tree");
  std::vector<double> ys{0.75};
  struct Item {
    int l;
    Rational f0;
  };
  std::vector<Item> stack{{1, Rational(0)}};
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const auto& g = tree.level(it.l);
    const Rational& s = g.s;
    Rational vr2 = g.v * g.p.r / 2;
    const std::array<Rational, 8> mids{Rational(s / 16),      Rational(7 * s / 16),
                                       Rational(9 * s / 16),  Rational(15 * s / 16),
                                       Rational(s / 8 + vr2), Rational(3 * s / 8 - vr2),
                                       Rational(5 * s / 8 + vr2), Rational(7 * s / 8 - vr2)};
    for (const Rational& m : mids)
      ys.push_back(to_double(it.f0 + m));
    if (it.l == n) {
      ys.push_back(to_double(it.f0 + s / 4));
      ys.push_back(to_double(it.f0 + 3 * s / 4));
    } else {
      for (int j = 0; j < 2; ++j) stack.push_back({it.l + 1, it.f0 + g.f_child[j]});
    }
  }
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  return ys;
}

TvProfile tv_profile(std::shared_ptr<const CantorTree> tree, int n, std::span<const double> y_samples,
                     unsigned threads) {
  if (!tree || n < 2 || n > tree->n_max) throw ConfigError("tv_profile needs 2 <= n <= tree depth");
  TvProfile P;
  P.n = n;
  auto ladder = crossing_ladder(*tree, n);
  for (int l = 2; l <= n; ++l) {
    std::size_t i = l - 1, j = l - 2;
    double B = std::ldexp(ladder.Tf[i] - ladder.T1[i] + ladder.Ts[j] - ladder.Tf[j], l - 1);
    P.levels.push_back(l);
    P.bounds.push_back(B);
    double q = (l - 1.0) / l;
    P.expected.push_back(2 * q * q * q * q);
    P.growth.push_back(P.bounds.size() >= 2 ? B / P.bounds[P.bounds.size() - 2] : std::nan(""));
  }
  P.ys.assign(y_samples.begin(), y_samples.end());
  std::sort(P.ys.begin(), P.ys.end());
  P.ys.erase(std::unique(P.ys.begin(), P.ys.end()), P.ys.end());

  P.required_samples = std::size_t{1} << (n + 2);
  P.resolved = P.ys.size() >= P.required_samples;
  // Every level-n fast channel must contain a sample.
  std::vector<Rational> f0s{Rational(0)};
  for (int l = 1; l < n; ++l) {
    std::vector<Rational> next;
    for (const auto& f : f0s)
      for (int j = 0; j < 2; ++j) next.push_back(f + tree->level(l).f_child[j]);
    f0s = std::move(next);
  }
  const auto& g = tree->level(n);
  for (const auto& f : f0s) {
    for (auto [lo, hi] : {std::pair{g.phi[0], g.phi[1]}, std::pair{g.phi[2], g.phi[3]},
                          std::pair{g.phi[3], g.phi[4]}, std::pair{g.phi[5], g.phi[6]}}) {
      double a = to_double(f + lo), b = to_double(f + hi);
      auto it = std::lower_bound(P.ys.begin(), P.ys.end(), a);
      if (it == P.ys.end() || !(*it < b)) P.resolved = false;
    }
  }

  auto field = std::make_shared<CantorField>(tree, n);
  auto b = cantor_planar_field(field);
  CrossingOptions opt;
  opt.threads = threads;
  opt.resolution = 0.05;
  auto ct = crossing_times(b, P.ys, opt);
  P.T.resize(ct.size());
  for (std::size_t k = 0; k < ct.size(); ++k) P.T[k] = ct[k].T;
  for (std::size_t k = 1; k < P.T.size(); ++k) P.measured_tv += std::abs(P.T[k] - P.T[k - 1]);
  return P;
}

void write_ladder_csv(std::ostream& os, const CrossingLadder& l, const std::string& preamble) {
  os << preamble << "n,T1,Ts,Tf,T,sigma_partial\n";
  for (std::size_t k = 0; k < l.n.size(); ++k)
    os << l.n[k] << ',' << fmt(l.T1[k]) << ',' << fmt(l.Ts[k]) << ',' << fmt(l.Tf[k]) << ','
       << fmt(l.T[k]) << ',' << fmt(l.sigma_partial[k]) << '\n';
}

}  // namespace hamflow
