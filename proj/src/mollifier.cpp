#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "hamflow/counterexample.hpp"
#include "hamflow/parallel.hpp"

namespace hamflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double raw_profile(double q) {
  double s = 1.0 - 4.0 * q * q;
  return s > 0 ? std::exp(-1.0 / s) : 0.0;
}

double raw_derivative(double q) {
  double s = 1.0 - 4.0 * q * q;
  return s > 0 ? std::exp(-1.0 / s) * (-8.0 * q / (s * s)) : 0.0;
}

// Gauss-Legendre nodes and weights on [-1, 1].
void legendre(int m, std::vector<double>& xs, std::vector<double>& ws) {
  xs.assign(m, 0.0);
  ws.assign(m, 2.0);
  if (m == 1) return;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5)), dp = 1;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (x * p1 - p0) / (x * x - 1);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    xs[i] = x;
    ws[i] = 2 / ((1 - x * x) * dp * dp);
  }
}

}  // namespace

BumpKernel::BumpKernel(int table) : n_(table) {
  if (table < 16) throw ConfigError("kernel table too small");
  using boost::math::quadrature::gauss;
  const double h = 0.5 / n_;
  t0_.assign(n_ + 1, 0.0);
  t1_.assign(n_ + 1, 0.0);
  t2_.assign(n_ + 1, 0.0);
  for (int i = 0; i < n_; ++i) {
    double a = i * h, b = a + h;
    t0_[i + 1] = t0_[i] + gauss<double, 10>::integrate([](double q) { return raw_profile(q) * q; }, a, b);
    t1_[i + 1] = t1_[i] + gauss<double, 10>::integrate([](double q) { return raw_profile(q) * q * q; }, a, b);
    t2_[i + 1] = t2_[i] + gauss<double, 10>::integrate([](double q) { return raw_derivative(q) * q; }, a, b);
  }
  amp_ = 1.0 / (kTwoPi * t0_[n_]);
  for (int i = 0; i <= n_; ++i) {
    t0_[i] *= amp_;
    t1_[i] *= amp_;
    t2_[i] *= amp_;
  }

  boost::math::quadrature::tanh_sinh<double> ts;
  double mass = kTwoPi * amp_ * ts.integrate([](double q) { return raw_profile(q) * q; }, 0.0, 0.5);
  mass_error_ = std::abs(mass - 1.0);
  // First moment in Cartesian coordinates over the support square.
  auto inner = [&](double x) {
    return gauss<double, 30>::integrate(
        [&](double y) { return x * amp_ * raw_profile(std::hypot(x, y)); }, -0.5, 0.5);
  };
  first_moment_ = std::abs(gauss<double, 30>::integrate(inner, -0.5, 0.5));
}

double BumpKernel::profile(double q) const { return amp_ * raw_profile(q); }
double BumpKernel::profile_derivative(double q) const { return amp_ * raw_derivative(q); }

double BumpKernel::integrand(double q, int which) const {
  switch (which) {
    case 0: return profile(q) * q;
    case 1: return profile(q) * q * q;
    default: return profile_derivative(q) * q;
  }
}

double BumpKernel::lookup(double q, const std::vector<double>& tab, int which) const {
  if (!(q > 0)) return 0.0;
  if (q >= 0.5) return tab[n_];
  const double h = 0.5 / n_;
  int i = std::min(static_cast<int>(q / h), n_ - 1);
  double t = (q - i * h) / h;
  double y0 = tab[i], y1 = tab[i + 1];
  double d0 = integrand(i * h, which) * h, d1 = integrand((i + 1) * h, which) * h;
  double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * d1;
}

const BumpKernel& default_kernel() {
  static const BumpKernel k(1 << 15);
  return k;
}

Convolution convolve_cells(const std::vector<AffineCell>& cells, Point z, double r,
                           const BumpKernel& kernel, bool hessian, int gauss_per_sector) {
  Convolution out;
  if (!(r > 0)) throw ConfigError("mollifier radius must be positive");
  const double R = 0.5 * r;
  std::vector<const AffineCell*> near;
  for (const auto& c : cells) {
    double xl = std::numeric_limits<double>::infinity(), xh = -xl, yl = xl, yh = -xl;
    for (Point p : c.polygon) {
      xl = std::min(xl, p.x);
      xh = std::max(xh, p.x);
      yl = std::min(yl, p.y);
      yh = std::max(yh, p.y);
    }
    if (xh >= z.x - R && xl <= z.x + R && yh >= z.y - R && yl <= z.y + R) near.push_back(&c);
  }
  if (near.empty()) return out;

  std::vector<double> angles;
  for (int k = 0; k < 8; ++k) angles.push_back(k * kTwoPi / 8);
  auto add_angle = [&](Vec2 d) {
    if (norm(d) > 1e-15 * r) {
      double th = std::atan2(d.y, d.x);
      angles.push_back(th < 0 ? th + kTwoPi : th);
    }
  };
  for (const AffineCell* c : near) {
    const auto& poly = c->polygon;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      Point a = poly[i], b = poly[(i + 1) % poly.size()];
      if (norm(a - z) < R) add_angle(a - z);
      // Edge crossings of the support circle.
      Vec2 e = b - a, w = a - z;
      double A = dot(e, e), B = 2 * dot(e, w), C = dot(w, w) - R * R;
      double disc = B * B - 4 * A * C;
      if (A > 0 && disc > 0) {
        double sq = std::sqrt(disc);
        for (double s : {(-B - sq) / (2 * A), (-B + sq) / (2 * A)})
          if (s > 0 && s < 1) add_angle(w + s * e);
      }
    }
  }
  std::sort(angles.begin(), angles.end());
  std::vector<double> th{angles.front()};
  for (double a : angles)
    if (a - th.back() > 1e-13) th.push_back(a);
  th.push_back(th.front() + kTwoPi);

  std::vector<double> xs, ws;
  legendre(gauss_per_sector, xs, ws);

  std::array<double, 4> H{};
  for (std::size_t s = 0; s + 1 < th.size(); ++s) {
    double lo = th[s], hi = th[s + 1], half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (int q = 0; q < gauss_per_sector; ++q) {
      double theta = mid + half * xs[q], W = half * ws[q];
      Vec2 u{std::cos(theta), std::sin(theta)};
      for (const AffineCell* c : near) {
        const auto& poly = c->polygon;
        double rin = 0, rout = R;
        bool empty = false;
        for (std::size_t i = 0; i < poly.size() && !empty; ++i) {
          Point a = poly[i], b = poly[(i + 1) % poly.size()];
          Vec2 e = b - a;
          double num = cross(e, z - a), den = cross(e, u);
          if (den == 0) {
            if (num < 0) empty = true;
          } else if (den > 0) {
            rin = std::max(rin, -num / den);
          } else {
            rout = std::min(rout, -num / den);
          }
          if (rin >= rout) empty = true;
        }
        if (empty) continue;
        double qa = rin / r, qb = rout / r;
        double dm0 = kernel.m0(qb) - kernel.m0(qa);
        double dm1 = r * (kernel.m1(qb) - kernel.m1(qa));
        double alpha = c->c0 + c->cx * z.x + c->cy * z.y;
        double beta = c->cx * u.x + c->cy * u.y;
        out.value += W * (alpha * dm0 + beta * dm1);
        out.grad.x += W * dm0 * c->cx;
        out.grad.y += W * dm0 * c->cy;
        if (hessian) {
          double dm2 = (kernel.m2(qb) - kernel.m2(qa)) / r;
          H[0] -= W * c->cx * u.x * dm2;
          H[1] -= W * c->cx * u.y * dm2;
          H[2] -= W * c->cy * u.x * dm2;
          H[3] -= W * c->cy * u.y * dm2;
        }
      }
    }
  }
  if (hessian) {
    double off = 0.5 * (H[1] + H[2]);
    out.hess = {H[0], off, off, H[3]};
  }
  return out;
}

std::vector<AffineCell> increment_cells(const LevelGeometry& g) {
  double vp = to_double(g.v_prev);
  std::vector<AffineCell> out;
  for (auto c : component_cells(g)) {
    c.cy -= vp;
    if (c.c0 == 0 && c.cx == 0 && c.cy == 0) continue;
    out.push_back(std::move(c));
  }
  return out;
}

MollifiedCantorField::MollifiedCantorField(std::shared_ptr<const CantorTree> tree, int depth,
                                           const BumpKernel& kernel)
    : tree_(std::move(tree)), depth_(depth), kernel_(kernel) {
  if (!tree_) throw ConfigError("MollifiedCantorField needs a tree");
  if (depth_ < 0 || depth_ > tree_->n_max) throw ConfigError("mollified depth exceeds tree depth");
  for (int l = 1; l <= depth_; ++l) {
    const auto& g = tree_->level(l);
    inc_.push_back(increment_cells(g));
    c_.push_back(to_double(g.p.c));
    r_.push_back(to_double(g.p.r));
    x_child_.push_back(to_double(g.x_child));
    y_child_.push_back({to_double(g.y_child[0]), to_double(g.y_child[1])});
  }
  lipschitz_ = CantorField(tree_, depth_).lipschitz();
}

Convolution MollifiedCantorField::evaluate(Point z, bool hessian) const {
  Convolution total;
  total.value = z.y;
  total.grad = {0.0, 1.0};
  double X0 = 0, Y0 = 0;
  for (int l = 1; l <= depth_; ++l) {
    std::size_t i = l - 1;
    double R = 0.5 * r_[i], c = c_[i];
    Point loc{z.x - X0, z.y - Y0};
    if (!(loc.x >= -R && loc.x <= c + R && loc.y >= -R && loc.y <= c + R)) break;
    auto conv = convolve_cells(inc_[i], loc, r_[i], kernel_, hessian);
    total.value += conv.value;
    total.grad = total.grad + conv.grad;
    for (int k = 0; k < 4; ++k) total.hess[k] += conv.hess[k];
    if (l == depth_) break;
    double Rn = 0.5 * r_[i + 1], cn = c_[i + 1];
    int next = -1;
    for (int j = 0; j < 2; ++j) {
      double X = loc.x - x_child_[i], Y = loc.y - y_child_[i][j];
      if (X >= -Rn && X <= cn + Rn && Y >= -Rn && Y <= cn + Rn) next = j;
    }
    if (next < 0) break;
    X0 += x_child_[i];
    Y0 += y_child_[i][next];
  }
  return total;
}

double MollifiedCantorField::value(Point z) const { return evaluate(z).value; }
Vec2 MollifiedCantorField::gradient(Point z) const { return evaluate(z).grad; }

double MollifiedCantorField::feature_scale(Point z) const {
  double X0 = 0, Y0 = 0, scale = std::numeric_limits<double>::infinity();
  for (int l = 1; l <= depth_; ++l) {
    std::size_t i = l - 1;
    double R = 0.5 * r_[i], c = c_[i];
    Point loc{z.x - X0, z.y - Y0};
    if (!(loc.x >= -R && loc.x <= c + R && loc.y >= -R && loc.y <= c + R)) break;
    scale = r_[i];
    if (l == depth_) break;
    double Rn = 0.5 * r_[i + 1], cn = c_[i + 1];
    int next = -1;
    for (int j = 0; j < 2; ++j) {
      double X = loc.x - x_child_[i], Y = loc.y - y_child_[i][j];
      if (X >= -Rn && X <= cn + Rn && Y >= -Rn && Y <= cn + Rn) next = j;
    }
    if (next < 0) break;
    X0 += x_child_[i];
    Y0 += y_child_[i][next];
  }
  return scale;
}

namespace {

double segment_distance(Point p, Point a, Point b) {
  Vec2 e = b - a;
  double L2 = dot(e, e);
  double t = L2 > 0 ? std::clamp(dot(p - a, e) / L2, 0.0, 1.0) : 0.0;
  return norm(p - (a + t * e));
}

struct Leaf {
  double x0, y0, size;
};

}  // namespace

std::vector<SobolevLevel> sobolev_schedule(std::shared_ptr<const CantorTree> tree, int l_max,
                                           double p, const SobolevOptions& opt) {
  if (!tree || l_max < 1 || l_max > tree->n_max) throw ConfigError("schedule depth outside the tree");
  if (!(p >= 1)) throw ConfigError("Sobolev exponent must be >= 1");
  if (opt.cells_per_r < 1 || opt.gauss < 1) throw ConfigError("invalid Sobolev quadrature options");
  const BumpKernel& K = default_kernel();

  // Gauss nodes on [0, 1].
  std::vector<double> gx, gw;
  legendre(opt.gauss, gx, gw);
  for (int i = 0; i < opt.gauss; ++i) {
    gx[i] = 0.5 * (gx[i] + 1);
    gw[i] *= 0.5;
  }

  std::vector<SobolevLevel> out;
  double partial = 0;
  for (int l = 1; l <= l_max; ++l) {
    const auto& g = tree->level(l);
    double c = to_double(g.p.c), r = to_double(g.p.r), R = 0.5 * r;
    auto cells = increment_cells(g);
    auto edges = PiecewiseAffineField(component_cells(g, true)).gradient_jumps();
    double target = r / opt.cells_per_r;

    std::vector<Leaf> leaves;
    std::vector<Leaf> stack{{-R, -R, c + 2 * R}};
    bool feasible = true;
    while (!stack.empty()) {
      Leaf q = stack.back();
      stack.pop_back();
      Point mid{q.x0 + q.size / 2, q.y0 + q.size / 2};
      double reach = R + q.size * std::numbers::sqrt2 / 2;
      bool near = false;
      for (const auto& e : edges)
        if (segment_distance(mid, e.a, e.b) <= reach) {
          near = true;
          break;
        }
      if (!near) continue;
      if (q.size <= target) {
        leaves.push_back(q);
        if (leaves.size() > opt.max_cells) {
          feasible = false;
          break;
        }
        continue;
      }
      double h = q.size / 2;
      for (int k = 3; k >= 0; --k) stack.push_back({q.x0 + (k & 1) * h, q.y0 + (k >> 1) * h, h});
    }

    SobolevLevel lv;
    lv.l = l;
    lv.cells = leaves.size();
    lv.feasible = feasible;
    if (feasible) {
      std::vector<double> contrib(leaves.size(), 0.0);
      parallel_for(leaves.size(), opt.threads, [&](std::size_t k) {
        const Leaf& q = leaves[k];
        double s = 0;
        for (int i = 0; i < opt.gauss; ++i)
          for (int j = 0; j < opt.gauss; ++j) {
            Point z{q.x0 + gx[i] * q.size, q.y0 + gx[j] * q.size};
            auto conv = convolve_cells(cells, z, r, K, true);
            double fro = std::sqrt(conv.hess[0] * conv.hess[0] + conv.hess[1] * conv.hess[1] +
                                   conv.hess[2] * conv.hess[2] + conv.hess[3] * conv.hess[3]);
            s += gw[i] * gw[j] * std::pow(fro, p);
          }
        contrib[k] = s * q.size * q.size;
      });
      double I = 0;
      for (double v : contrib) I += v;
      lv.norm = std::pow(static_cast<double>(tree->component_count(l)) * I, 1.0 / p);
      partial += lv.norm;
    } else {
      lv.norm = std::numeric_limits<double>::quiet_NaN();
      partial = std::numeric_limits<double>::quiet_NaN();
    }
    lv.partial_sum = partial;
    out.push_back(lv);
  }
  return out;
}

}  // namespace hamflow
