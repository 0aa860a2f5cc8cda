#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hamflow {

inline constexpr const char* kVersion = "0.1.0";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class TransversalityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;
};

using Point = Vec2;

constexpr Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
/// Counter-clockwise rotation by a quarter turn.
constexpr Vec2 perp(Vec2 v) { return {-v.y, v.x}; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline bool finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Closed axis-aligned rectangle; infinite bounds are allowed.
struct AxisRect {
  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;

  /// Throws ConfigError unless x_lo < x_hi and y_lo < y_hi.
  static AxisRect checked(double x_lo, double x_hi, double y_lo, double y_hi);
  static AxisRect everywhere();

  bool valid() const { return x_lo < x_hi && y_lo < y_hi; }
  bool contains(Point p, double tol = 0.0) const {
    return p.x >= x_lo - tol && p.x <= x_hi + tol && p.y >= y_lo - tol && p.y <= y_hi + tol;
  }
  double width() const { return x_hi - x_lo; }
  double height() const { return y_hi - y_lo; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (x_lo + x_hi), 0.5 * (y_lo + y_hi)}; }
  AxisRect inset(double m) const { return {x_lo + m, x_hi - m, y_lo + m, y_hi - m}; }
  /// Distance from an interior point to the boundary (0 outside).
  double depth(Point p) const;
  bool operator==(const AxisRect&) const = default;
};

enum class Backend { analytic, grid, piecewise };

const char* to_string(Backend b);

/// Straight edge across which the gradient of a piecewise field jumps.
struct GradientJump {
  Point a, b;
  double jump;  // |grad_plus - grad_minus|
};

/// Planar scalar function with a gradient wherever the backend defines one.
class ScalarField {
 public:
  virtual ~ScalarField() = default;

  virtual double value(Point z) const = 0;
  /// Backend gradient. Piecewise backends resolve breakpoint lines from the
  /// cell to the right, ties toward larger y.
  virtual Vec2 gradient(Point z) const = 0;
  virtual AxisRect domain() const = 0;
  virtual Backend backend() const = 0;
  /// Upper bound for |grad|, i.e. a Lipschitz constant.
  virtual double lipschitz() const = 0;

  /// Vertical lines x = const in (x_lo, x_hi) where the section of the level
  /// set {value = level} may have a kink. Empty when unknown or smooth.
  virtual std::vector<double> vertical_breaks(double level, double x_lo, double x_hi) const;
  /// Edges carrying the singular part of the gradient's derivative.
  virtual std::vector<GradientJump> gradient_jumps() const;
  /// Local feature size; integrators cap their steps by a fraction of it.
  virtual double feature_scale(Point z) const;

  bool in_domain(Point z) const { return domain().contains(z); }
};

using ScalarFieldPtr = std::shared_ptr<const ScalarField>;

/// Closed-form field from a small registry of named families.
class AnalyticField final : public ScalarField {
 public:
  using ValueFn = std::function<double(Point)>;
  using GradFn = std::function<Vec2(Point)>;

  /// grad may be empty, in which case central differences are used.
  AnalyticField(std::string name, std::vector<double> params, ValueFn value, GradFn grad,
                AxisRect domain, double lipschitz);

  /// H = p x + q y + c0.
  static std::shared_ptr<AnalyticField> linear(double p, double q, double c0 = 0.0);
  /// b = (vx, vy) constant, H = vy x - vx y.
  static std::shared_ptr<AnalyticField> translation(double vx, double vy);
  /// H = omega |z - center|^2 / 2, rigid rotation with angular speed omega.
  static std::shared_ptr<AnalyticField> rotation(double omega = 1.0, Point center = {});
  /// H = -(y + y^3/3), b = (1 + y^2, 0).
  static std::shared_ptr<AnalyticField> shear();
  /// H = A (1 - |z - center|^2 / R^2)^3 inside the disc, 0 outside.
  static std::shared_ptr<AnalyticField> compact_vortex(double amplitude = 1.0,
                                                       double radius = 1.0,
                                                       Point center = {});
  /// Rebuild a registered family from its name and parameter list.
  static std::shared_ptr<AnalyticField> from_name(const std::string& name,
                                                  const std::vector<double>& params);

  double value(Point z) const override;
  Vec2 gradient(Point z) const override;
  AxisRect domain() const override { return domain_; }
  Backend backend() const override { return Backend::analytic; }
  double lipschitz() const override { return lipschitz_; }

  const std::string& name() const { return name_; }
  const std::vector<double>& params() const { return params_; }
  bool has_closed_form_gradient() const { return static_cast<bool>(grad_); }

 private:
  std::string name_;
  std::vector<double> params_;
  ValueFn value_;
  GradFn grad_;
  AxisRect domain_;
  double lipschitz_;
};

/// Nodes origin + (i*hx, j*hy), i < nx, j < ny.
struct NodeGrid {
  Point origin;
  Vec2 spacing{1.0, 1.0};
  int nx = 2;
  int ny = 2;

  static NodeGrid over(const AxisRect& r, int nx, int ny);
  Point node(int i, int j) const { return {origin.x + i * spacing.x, origin.y + j * spacing.y}; }
  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
  AxisRect bounds() const {
    return {origin.x, origin.x + (nx - 1) * spacing.x, origin.y, origin.y + (ny - 1) * spacing.y};
  }
  void validate() const;
};

/// Bilinear interpolant of node values, stored row-major (x fastest).
class GridField final : public ScalarField {
 public:
  GridField(NodeGrid grid, std::vector<double> values);

  double value(Point z) const override;
  Vec2 gradient(Point z) const override;
  AxisRect domain() const override { return grid_.bounds(); }
  Backend backend() const override { return Backend::grid; }
  double lipschitz() const override { return lipschitz_; }
  std::vector<double> vertical_breaks(double level, double x_lo, double x_hi) const override;
  double feature_scale(Point) const override { return std::min(grid_.spacing.x, grid_.spacing.y); }

  const NodeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double at(int i, int j) const { return values_[grid_.index(i, j)]; }

 private:
  void locate(Point z, int& i, int& j, double& fx, double& fy) const;

  NodeGrid grid_;
  std::vector<double> values_;
  double lipschitz_ = 0.0;
};

/// Affine function over a convex polygon: value = c0 + cx x + cy y.
struct AffineCell {
  std::vector<Point> polygon;  // counter-clockwise
  double c0 = 0.0, cx = 0.0, cy = 0.0;

  double eval(Point z) const { return c0 + cx * z.x + cy * z.y; }
  Vec2 grad() const { return {cx, cy}; }
};

enum class SideRule {
  right_then_up,  // breakpoint lines take the cell to the right, ties upward
  strict          // evaluation on a breakpoint line is an error
};

class PiecewiseAffineField final : public ScalarField {
 public:
  PiecewiseAffineField(std::vector<AffineCell> cells, SideRule rule = SideRule::right_then_up);

  double value(Point z) const override;
  Vec2 gradient(Point z) const override;
  AxisRect domain() const override { return bounds_; }
  Backend backend() const override { return Backend::piecewise; }
  double lipschitz() const override { return lipschitz_; }
  std::vector<double> vertical_breaks(double level, double x_lo, double x_hi) const override;
  std::vector<GradientJump> gradient_jumps() const override;

  const std::vector<AffineCell>& cells() const { return cells_; }
  /// Index of the cell selected by the side rule; throws DomainError.
  std::size_t cell_at(Point z) const;

 private:
  std::vector<AffineCell> cells_;
  std::vector<AxisRect> boxes_;
  SideRule rule_;
  AxisRect bounds_;
  double lipschitz_ = 0.0;
  double scale_ = 1.0;
};

/// value = factor * inner.value.
class ScaledField final : public ScalarField {
 public:
  ScaledField(ScalarFieldPtr inner, double factor);

  double value(Point z) const override { return factor_ * inner_->value(z); }
  Vec2 gradient(Point z) const override { return factor_ * inner_->gradient(z); }
  AxisRect domain() const override { return inner_->domain(); }
  Backend backend() const override { return inner_->backend(); }
  double lipschitz() const override { return std::abs(factor_) * inner_->lipschitz(); }
  std::vector<double> vertical_breaks(double level, double x_lo, double x_hi) const override;
  std::vector<GradientJump> gradient_jumps() const override;
  double feature_scale(Point z) const override { return inner_->feature_scale(z); }

  const ScalarFieldPtr& inner() const { return inner_; }
  double factor() const { return factor_; }

 private:
  ScalarFieldPtr inner_;
  double factor_;
};

/// b . e >= delta on window.
struct Transversality {
  Vec2 e{1.0, 0.0};
  double delta = 0.0;
  AxisRect window;
};

/// Planar vector field b, either b = perp-grad H or given directly.
class PlanarField {
 public:
  using DirectFn = std::function<Vec2(Point)>;

  static PlanarField hamiltonian(ScalarFieldPtr H);
  static PlanarField direct(DirectFn b, AxisRect domain, double sup_norm);

  Vec2 operator()(Point z) const;
  bool is_hamiltonian() const { return static_cast<bool>(H_); }
  /// Throws ConfigError for direct fields.
  const ScalarField& H() const;
  const ScalarFieldPtr& H_ptr() const { return H_; }
  AxisRect domain() const;

  double sup_norm() const { return sup_norm_; }
  const std::optional<Transversality>& transversality() const { return transversality_; }
  /// C >= 1 bounding the transported density; 1 for divergence-free fields.
  double compressibility_L() const { return compressibility_; }

  PlanarField with_sup_norm(double s) const;
  PlanarField with_transversality(Transversality t) const;
  PlanarField with_compressibility(double C) const;

 private:
  ScalarFieldPtr H_;
  DirectFn direct_;
  AxisRect direct_domain_ = AxisRect::everywhere();
  double sup_norm_ = 0.0;
  std::optional<Transversality> transversality_;
  double compressibility_ = 1.0;
};

struct TrajectorySample {
  double t;
  Point position;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::string method;
  double tolerance = 0.0;
};

enum class NodeFlag : std::uint8_t {
  ok = 0,
  exited = 1,      // left all charts before time t
  critical = 2,    // start on a critical level
  underflow = 3,   // integrator step underflow
  failed = 4       // any other numerical failure
};

struct FlowMap {
  NodeGrid grid;
  double t = 0.0;
  std::vector<Point> image;
  std::vector<NodeFlag> flags;
  std::string method;
  double tolerance = 0.0;

  Point at(int i, int j) const { return image[grid.index(i, j)]; }
  bool ok(int i, int j) const { return flags[grid.index(i, j)] == NodeFlag::ok; }
};

/// (-d2 H, d1 H) at z; DomainError outside H's domain.
Vec2 perp_gradient(const ScalarField& H, Point z);

/// i-th point of the 2-3 Halton sequence mapped into r.
Point halton_point(std::size_t i, const AxisRect& r);

struct FieldStats {
  double sup_norm = 0.0;
  std::optional<double> min_b_dot_e;
  std::size_t samples = 0;
};

/// Corners and center of the window followed by Halton points. The minimum
/// of b.e is reported when e is given or the field declares transversality.
FieldStats field_stats(const PlanarField& b, const AxisRect& window, std::size_t samples,
                       std::optional<Vec2> e = std::nullopt);

}  // namespace hamflow
