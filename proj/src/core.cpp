#include "hamflow/core.hpp"

#include <algorithm>
#include <limits>

namespace hamflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double radical_inverse(std::size_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

}  // namespace

AxisRect AxisRect::checked(double x_lo, double x_hi, double y_lo, double y_hi) {
  AxisRect r{x_lo, x_hi, y_lo, y_hi};
  if (!r.valid()) throw ConfigError("AxisRect requires x_lo < x_hi and y_lo < y_hi");
  return r;
}

AxisRect AxisRect::everywhere() { return {-kInf, kInf, -kInf, kInf}; }

double AxisRect::depth(Point p) const {
  double d = std::min({p.x - x_lo, x_hi - p.x, p.y - y_lo, y_hi - p.y});
  return std::max(d, 0.0);
}

const char* to_string(Backend b) {
  switch (b) {
    case Backend::analytic: return "analytic";
    case Backend::grid: return "grid";
    case Backend::piecewise: return "piecewise";
  }
  return "?";
}

std::vector<double> ScalarField::vertical_breaks(double, double, double) const { return {}; }
std::vector<GradientJump> ScalarField::gradient_jumps() const { return {}; }
double ScalarField::feature_scale(Point) const { return kInf; }

// ---------------------------------------------------------------- analytic

AnalyticField::AnalyticField(std::string name, std::vector<double> params, ValueFn value,
                             GradFn grad, AxisRect domain, double lipschitz)
    : name_(std::move(name)),
      params_(std::move(params)),
      value_(std::move(value)),
      grad_(std::move(grad)),
      domain_(domain),
      lipschitz_(lipschitz) {}

double AnalyticField::value(Point z) const {
  if (!domain_.contains(z)) throw DomainError("point outside the domain of field '" + name_ + "'");
  return value_(z);
}

Vec2 AnalyticField::gradient(Point z) const {
  if (!domain_.contains(z)) throw DomainError("point outside the domain of field '" + name_ + "'");
  if (grad_) return grad_(z);
  double h = 1e-6 * std::max(1.0, norm(z));
  return {(value_({z.x + h, z.y}) - value_({z.x - h, z.y})) / (2 * h),
          (value_({z.x, z.y + h}) - value_({z.x, z.y - h})) / (2 * h)};
}

std::shared_ptr<AnalyticField> AnalyticField::linear(double p, double q, double c0) {
  return std::make_shared<AnalyticField>(
      "linear", std::vector<double>{p, q, c0},
      [=](Point z) { return p * z.x + q * z.y + c0; }, [=](Point) { return Vec2{p, q}; },
      AxisRect::everywhere(), std::hypot(p, q));
}

std::shared_ptr<AnalyticField> AnalyticField::translation(double vx, double vy) {
  return std::make_shared<AnalyticField>(
      "translation", std::vector<double>{vx, vy},
      [=](Point z) { return vy * z.x - vx * z.y; }, [=](Point) { return Vec2{vy, -vx}; },
      AxisRect::everywhere(), std::hypot(vx, vy));
}

std::shared_ptr<AnalyticField> AnalyticField::rotation(double omega, Point c) {
  return std::make_shared<AnalyticField>(
      "rotation", std::vector<double>{omega, c.x, c.y},
      [=](Point z) {
        Vec2 d = z - c;
        return 0.5 * omega * dot(d, d);
      },
      [=](Point z) { return omega * (z - c); }, AxisRect::everywhere(), kInf);
}

std::shared_ptr<AnalyticField> AnalyticField::shear() {
  return std::make_shared<AnalyticField>(
      "shear", std::vector<double>{},
      [](Point z) { return -(z.y + z.y * z.y * z.y / 3.0); },
      [](Point z) { return Vec2{0.0, -(1.0 + z.y * z.y)}; }, AxisRect::everywhere(), kInf);
}

std::shared_ptr<AnalyticField> AnalyticField::compact_vortex(double A, double R, Point c) {
  if (!(R > 0)) throw ConfigError("compact_vortex radius must be positive");
  double lip = 96.0 * std::abs(A) / (25.0 * std::sqrt(5.0) * R);
  return std::make_shared<AnalyticField>(
      "compact_vortex", std::vector<double>{A, R, c.x, c.y},
      [=](Point z) {
        Vec2 d = z - c;
        double q = dot(d, d) / (R * R);
        if (q >= 1.0) return 0.0;
        double u = 1.0 - q;
        return A * u * u * u;
      },
      [=](Point z) {
        Vec2 d = z - c;
        double q = dot(d, d) / (R * R);
        if (q >= 1.0) return Vec2{};
        double u = 1.0 - q;
        return (-6.0 * A * u * u / (R * R)) * d;
      },
      AxisRect::everywhere(), lip);
}

std::shared_ptr<AnalyticField> AnalyticField::from_name(const std::string& name,
                                                        const std::vector<double>& p) {
  auto need = [&](std::size_t n) {
    if (p.size() != n)
      throw ConfigError("analytic field '" + name + "' expects " + std::to_string(n) +
                        " parameters, got " + std::to_string(p.size()));
  };
  if (name == "linear") {
    need(3);
    return linear(p[0], p[1], p[2]);
  }
  if (name == "translation") {
    need(2);
    return translation(p[0], p[1]);
  }
  if (name == "rotation") {
    need(3);
    return rotation(p[0], {p[1], p[2]});
  }
  if (name == "shear") {
    need(0);
    return shear();
  }
  if (name == "compact_vortex") {
    need(4);
    return compact_vortex(p[0], p[1], {p[2], p[3]});
  }
  throw ConfigError("unknown analytic field '" + name + "'");
}

// ---------------------------------------------------------------- grid

NodeGrid NodeGrid::over(const AxisRect& r, int nx, int ny) {
  if (nx < 2 || ny < 2) throw ConfigError("grid needs at least 2 nodes per axis");
  NodeGrid g;
  g.origin = {r.x_lo, r.y_lo};
  g.spacing = {r.width() / (nx - 1), r.height() / (ny - 1)};
  g.nx = nx;
  g.ny = ny;
  g.validate();
  return g;
}

void NodeGrid::validate() const {
  if (nx < 2 || ny < 2) throw ConfigError("grid needs at least 2 nodes per axis");
  if (!(spacing.x > 0) || !(spacing.y > 0) || !std::isfinite(spacing.x) ||
      !std::isfinite(spacing.y))
    throw ConfigError("grid spacing must be positive and finite");
  if (!finite(origin)) throw ConfigError("grid origin must be finite");
}

GridField::GridField(NodeGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  grid_.validate();
  if (values_.size() != grid_.size())
    throw ConfigError("grid field has " + std::to_string(values_.size()) + " values, expected " +
                      std::to_string(grid_.size()));
  double hx = grid_.spacing.x, hy = grid_.spacing.y;
  for (int j = 0; j + 1 < grid_.ny; ++j)
    for (int i = 0; i + 1 < grid_.nx; ++i) {
      double dx = std::max(std::abs(at(i + 1, j) - at(i, j)), std::abs(at(i + 1, j + 1) - at(i, j + 1)));
      double dy = std::max(std::abs(at(i, j + 1) - at(i, j)), std::abs(at(i + 1, j + 1) - at(i + 1, j)));
      lipschitz_ = std::max(lipschitz_, std::hypot(dx / hx, dy / hy));
    }
}

void GridField::locate(Point z, int& i, int& j, double& fx, double& fy) const {
  AxisRect b = grid_.bounds();
  double tol = 1e-12 * std::max(b.width(), b.height());
  if (!b.contains(z, tol)) throw DomainError("point outside grid field domain");
  double sx = (z.x - grid_.origin.x) / grid_.spacing.x;
  double sy = (z.y - grid_.origin.y) / grid_.spacing.y;
  i = std::clamp(static_cast<int>(std::floor(sx)), 0, grid_.nx - 2);
  j = std::clamp(static_cast<int>(std::floor(sy)), 0, grid_.ny - 2);
  fx = sx - i;
  fy = sy - j;
}

double GridField::value(Point z) const {
  int i, j;
  double fx, fy;
  locate(z, i, j, fx, fy);
  double v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
  return (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 + (1 - fx) * fy * v01 + fx * fy * v11;
}

Vec2 GridField::gradient(Point z) const {
  int i, j;
  double fx, fy;
  locate(z, i, j, fx, fy);
  double v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
  return {((1 - fy) * (v10 - v00) + fy * (v11 - v01)) / grid_.spacing.x,
          ((1 - fx) * (v01 - v00) + fx * (v11 - v10)) / grid_.spacing.y};
}

std::vector<double> GridField::vertical_breaks(double, double x_lo, double x_hi) const {
  std::vector<double> out;
  for (int i = 0; i < grid_.nx; ++i) {
    double x = grid_.origin.x + i * grid_.spacing.x;
    if (x > x_lo && x < x_hi) out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------- piecewise

namespace {

// Smallest signed distance from z to the edges of a counter-clockwise polygon;
// positive inside.
double inside_margin(const std::vector<Point>& poly, Point z) {
  double m = kInf;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    Point a = poly[k], b = poly[(k + 1) % poly.size()];
    Vec2 e = b - a;
    double len = norm(e);
    if (len == 0) continue;
    m = std::min(m, cross(e, z - a) / len);
  }
  return m;
}

AxisRect box_of(const std::vector<Point>& poly) {
  AxisRect r{kInf, -kInf, kInf, -kInf};
  for (Point p : poly) {
    r.x_lo = std::min(r.x_lo, p.x);
    r.x_hi = std::max(r.x_hi, p.x);
    r.y_lo = std::min(r.y_lo, p.y);
    r.y_hi = std::max(r.y_hi, p.y);
  }
  return r;
}

}  // namespace

PiecewiseAffineField::PiecewiseAffineField(std::vector<AffineCell> cells, SideRule rule)
    : cells_(std::move(cells)), rule_(rule) {
  if (cells_.empty()) throw ConfigError("piecewise field needs at least one cell");
  bounds_ = {kInf, -kInf, kInf, -kInf};
  double min_extent = kInf;
  for (auto& c : cells_) {
    if (c.polygon.size() < 3) throw ConfigError("piecewise cell needs at least 3 vertices");
    double area2 = 0;
    for (std::size_t k = 0; k < c.polygon.size(); ++k)
      area2 += cross(c.polygon[k], c.polygon[(k + 1) % c.polygon.size()]);
    if (area2 < 0) std::reverse(c.polygon.begin(), c.polygon.end());
    if (area2 == 0) throw ConfigError("degenerate piecewise cell");
    AxisRect b = box_of(c.polygon);
    boxes_.push_back(b);
    bounds_.x_lo = std::min(bounds_.x_lo, b.x_lo);
    bounds_.x_hi = std::max(bounds_.x_hi, b.x_hi);
    bounds_.y_lo = std::min(bounds_.y_lo, b.y_lo);
    bounds_.y_hi = std::max(bounds_.y_hi, b.y_hi);
    min_extent = std::min({min_extent, b.width(), b.height()});
    lipschitz_ = std::max(lipschitz_, norm(c.grad()));
  }
  scale_ = min_extent;
}

std::size_t PiecewiseAffineField::cell_at(Point z) const {
  double tol = 1e-12 * std::max(bounds_.width(), bounds_.height());
  std::vector<std::size_t> hits;
  for (std::size_t k = 0; k < cells_.size(); ++k) {
    if (!boxes_[k].contains(z, tol)) continue;
    if (inside_margin(cells_[k].polygon, z) >= -tol) hits.push_back(k);
  }
  if (hits.empty()) throw DomainError("point outside piecewise field domain");
  if (hits.size() == 1) return hits.front();
  bool on_line = false;
  for (std::size_t k : hits)
    if (inside_margin(cells_[k].polygon, z) <= tol) on_line = true;
  if (on_line && rule_ == SideRule::strict)
    throw DomainError("evaluation on a breakpoint line without a side-selection rule");
  double eta = 1e-7 * scale_;
  Point probe{z.x + eta, z.y + 1e-6 * eta};
  std::size_t best = hits.front();
  double best_m = -kInf;
  for (std::size_t k : hits) {
    double m = inside_margin(cells_[k].polygon, probe);
    if (m > best_m) {
      best_m = m;
      best = k;
    }
  }
  return best;
}

double PiecewiseAffineField::value(Point z) const { return cells_[cell_at(z)].eval(z); }

Vec2 PiecewiseAffineField::gradient(Point z) const { return cells_[cell_at(z)].grad(); }

std::vector<double> PiecewiseAffineField::vertical_breaks(double level, double x_lo,
                                                          double x_hi) const {
  std::vector<double> out;
  for (const auto& c : cells_)
    for (std::size_t k = 0; k < c.polygon.size(); ++k) {
      Point a = c.polygon[k], b = c.polygon[(k + 1) % c.polygon.size()];
      double va = c.eval(a) - level, vb = c.eval(b) - level;
      if ((va < 0) == (vb < 0) || va == vb) continue;
      double x = a.x + (-va / (vb - va)) * (b.x - a.x);
      if (x > x_lo && x < x_hi) out.push_back(x);
    }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<GradientJump> PiecewiseAffineField::gradient_jumps() const {
  double tol = 1e-12 * std::max(bounds_.width(), bounds_.height());
  std::vector<GradientJump> out;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const auto& poly = cells_[i].polygon;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      Point a = poly[k], b = poly[(k + 1) % poly.size()];
      Vec2 e = b - a;
      double len = norm(e);
      std::vector<double> cuts{0.0, 1.0};
      for (const auto& other : cells_)
        for (Point v : other.polygon) {
          if (std::abs(cross(e, v - a)) / len > tol) continue;
          double s = dot(v - a, e) / (len * len);
          if (s > 0 && s < 1) cuts.push_back(s);
        }
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      Vec2 outward{e.y / len, -e.x / len};
      for (std::size_t m = 0; m + 1 < cuts.size(); ++m) {
        Point p0 = a + cuts[m] * e, p1 = a + cuts[m + 1] * e;
        Point probe = 0.5 * (p0 + p1) + (1e-7 * scale_) * outward;
        for (std::size_t j = i + 1; j < cells_.size(); ++j) {
          if (!boxes_[j].contains(probe)) continue;
          if (inside_margin(cells_[j].polygon, probe) < 0) continue;
          double jump = norm(cells_[i].grad() - cells_[j].grad());
          if (jump > 0) out.push_back({p0, p1, jump});
          break;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- scaled

ScaledField::ScaledField(ScalarFieldPtr inner, double factor)
    : inner_(std::move(inner)), factor_(factor) {
  if (!inner_) throw ConfigError("scaled field needs an inner field");
  if (factor_ == 0 || !std::isfinite(factor_)) throw ConfigError("scale factor must be finite and nonzero");
}

std::vector<double> ScaledField::vertical_breaks(double level, double x_lo, double x_hi) const {
  return inner_->vertical_breaks(level / factor_, x_lo, x_hi);
}

std::vector<GradientJump> ScaledField::gradient_jumps() const {
  auto j = inner_->gradient_jumps();
  for (auto& g : j) g.jump *= std::abs(factor_);
  return j;
}

// ---------------------------------------------------------------- planar field

PlanarField PlanarField::hamiltonian(ScalarFieldPtr H) {
  if (!H) throw ConfigError("Hamiltonian field is null");
  PlanarField b;
  b.sup_norm_ = H->lipschitz();
  b.H_ = std::move(H);
  return b;
}

PlanarField PlanarField::direct(DirectFn fn, AxisRect domain, double sup_norm) {
  if (!fn) throw ConfigError("direct field function is empty");
  PlanarField b;
  b.direct_ = std::move(fn);
  b.direct_domain_ = domain;
  b.sup_norm_ = sup_norm;
  return b;
}

Vec2 PlanarField::operator()(Point z) const {
  if (H_) return perp_gradient(*H_, z);
  if (!direct_domain_.contains(z)) throw DomainError("point outside the vector field domain");
  return direct_(z);
}

const ScalarField& PlanarField::H() const {
  if (!H_) throw ConfigError("vector field has no Hamiltonian");
  return *H_;
}

AxisRect PlanarField::domain() const { return H_ ? H_->domain() : direct_domain_; }

PlanarField PlanarField::with_sup_norm(double s) const {
  PlanarField b = *this;
  b.sup_norm_ = s;
  return b;
}

PlanarField PlanarField::with_transversality(Transversality t) const {
  double n = norm(t.e);
  if (!(n > 0)) throw ConfigError("transversality direction must be nonzero");
  if (!(t.delta > 0)) throw ConfigError("transversality delta must be positive");
  t.e = t.e / n;
  PlanarField b = *this;
  b.transversality_ = t;
  return b;
}

PlanarField PlanarField::with_compressibility(double C) const {
  if (!(C >= 1)) throw ConfigError("compressibility constant must be >= 1");
  PlanarField b = *this;
  b.compressibility_ = C;
  return b;
}

// ---------------------------------------------------------------- operations

Vec2 perp_gradient(const ScalarField& H, Point z) {
  if (!finite(z)) throw DomainError("non-finite evaluation point");
  Vec2 g = H.gradient(z);
  return {-g.y, g.x};
}

Point halton_point(std::size_t i, const AxisRect& r) {
  return {r.x_lo + radical_inverse(i + 1, 2) * r.width(),
          r.y_lo + radical_inverse(i + 1, 3) * r.height()};
}

FieldStats field_stats(const PlanarField& b, const AxisRect& window, std::size_t samples,
                       std::optional<Vec2> e) {
  if (!window.valid() || !std::isfinite(window.area()))
    throw ConfigError("field_stats needs a nonempty bounded window");
  if (samples < 1) throw ConfigError("field_stats needs at least one sample");
  if (!e && b.transversality()) e = b.transversality()->e;
  if (e) *e = *e / norm(*e);
  std::vector<Point> pts{{window.x_lo, window.y_lo}, {window.x_hi, window.y_lo},
                         {window.x_lo, window.y_hi}, {window.x_hi, window.y_hi},
                         window.center()};
  for (std::size_t i = 0; i < samples; ++i) pts.push_back(halton_point(i, window));
  FieldStats st;
  double mn = kInf;
  for (Point p : pts) {
    Vec2 v = b(p);
    st.sup_norm = std::max(st.sup_norm, norm(v));
    if (e) mn = std::min(mn, dot(v, *e));
  }
  if (e) st.min_b_dot_e = mn;
  st.samples = pts.size();
  return st;
}

}  // namespace hamflow
