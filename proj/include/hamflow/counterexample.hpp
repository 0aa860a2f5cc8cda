#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "hamflow/core.hpp"
#include "hamflow/flow.hpp"

namespace hamflow {

using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& q) { return q.convert_to<double>(); }
std::string to_string(const Rational& q);

/// Deepest level for which exact parameters are provided.
inline constexpr int kMaxLevel = 30;

struct LevelParams {
  int n = 1;
  Rational c, a, r;
};

/// c = 1/(n^2 2^n), a = ((n-1)/(2n))(c/2 - c_next), r = (1/(2n))(c/2 - c_next).
/// At n = 1 this gives a = 0.
LevelParams level_params(int n);

/// Parameters used by the geometry: level_params except at n = 1, where
/// a = r = (c1/2 - c2)/4 so that the fast channels have positive height.
LevelParams layout_params(int n);

/// Layout of every component of C_n (all components of a level are
/// translates of each other). Local coordinates have the component's lower
/// left corner at the origin; "phi" is f_n minus its value at that corner.
///
/// Vertically the middle band stacks E a | D d | E a | E a | D d | E a with
/// d = c_next + 2r; F-bands of width c/4 sit at both sides, and fans of width
/// a connect the F-side heights (phi c/s) to the core heights.
struct LevelGeometry {
  int n = 1;
  LevelParams p;
  Rational c_next;
  Rational d;        // D-block side
  Rational s;        // oscillation of f_n over a component
  Rational v_prev;   // v_{n-1}
  Rational v;        // v_n, speed in D-blocks
  Rational v_prime;  // v'_n, speed in E-channels
  Rational x_child;  // child x offset: c/4 + a + r
  std::array<Rational, 2> y_child;  // a + r, 3a + d + r
  std::array<Rational, 2> f_child;  // s/8 + v r, 5s/8 + v r
  std::array<Rational, 7> core_y;   // P_k
  std::array<Rational, 7> side_y;   // L_k = phi_k c / s
  std::array<Rational, 7> phi;      // 0, s/8, 3s/8, s/2, 5s/8, 7s/8, s
};

struct ComponentRect {
  Rational x0, y0;  // lower left corner
  Rational f0;      // f_n at the corner
};

struct CantorTree {
  int n_max = 0;
  std::vector<LevelGeometry> levels;  // levels[n-1]
  /// Components of C_n for n <= materialized depth, bottom to top.
  std::vector<std::vector<ComponentRect>> components;
  /// prod_{l=2}^{n} c_l / (c_l + 2 r_{l-1}) with the layout parameters;
  /// s_n = 4^{1-n} c_1 times this.
  std::vector<Rational> sigma_layout;

  const LevelGeometry& level(int n) const { return levels.at(n - 1); }
  /// 2^{n-1}, counted from the two-children rule.
  std::uint64_t component_count(int n) const;
  int materialized_depth() const { return static_cast<int>(components.size()); }
};

/// Exact tree to n_max (<= kMaxLevel); components are listed up to
/// min(n_max, materialize_depth). Throws NumericalError if an exact identity
/// of the layout fails.
CantorTree build_tree(int n_max, int materialize_depth = 10);

/// prod_{l=2}^{n_terms} c_l/(c_l + 2 r_{l-1}) with the formula parameters.
double sigma(int n_terms);
/// Limit of sigma, from a direct sum of logarithms and an Euler-Maclaurin
/// tail with cutoff M.
double sigma_limit(long M = 100000);

/// Affine cells of phi over one component of C_n in local coordinates,
/// optionally framed by four cells carrying the exterior value v_prev y.
std::vector<AffineCell> component_cells(const LevelGeometry& g, bool frame = false);

/// Piecewise-affine f_n. The field is defined on the whole plane and equals
/// y outside C_1.
class CantorField final : public ScalarField {
 public:
  CantorField(std::shared_ptr<const CantorTree> tree, int depth);

  double value(Point z) const override;
  Vec2 gradient(Point z) const override;
  AxisRect domain() const override { return AxisRect::everywhere(); }
  Backend backend() const override { return Backend::piecewise; }
  double lipschitz() const override { return lipschitz_; }
  std::vector<double> vertical_breaks(double level, double x_lo, double x_hi) const override;
  std::vector<GradientJump> gradient_jumps() const override;
  double feature_scale(Point z) const override;

  int depth() const { return depth_; }
  const CantorTree& tree() const { return *tree_; }
  /// Smallest and largest d f / d y.
  double min_speed() const { return min_speed_; }
  double max_speed() const { return max_speed_; }
  /// Deepest level whose component contains z (0 outside C_1).
  int level_at(Point z) const;

 private:
  struct Level {
    double c, a, d, r, s, vp, v, vq;
    std::array<double, 6> xb;
    std::array<double, 7> P, L, phi;
    double x_child;
    std::array<double, 2> y_child, f_child;
    // Fans: [k][0] upper-left triangle, [k][1] lower-right triangle.
    std::array<std::array<AffineCell, 2>, 6> left, right;
  };

  template <class Visit>
  void descend(Point z, Visit&& visit) const;
  void local_eval(const Level& L, double X, double Y, double& phi, Vec2& grad) const;
  void breaks_rec(int n, double x0, double f0, double level, double x_lo, double x_hi,
                  std::vector<double>& out) const;

  std::shared_ptr<const CantorTree> tree_;
  int depth_;
  std::vector<Level> lv_;
  double lipschitz_ = 1.0;
  double min_speed_ = 1.0;
  double max_speed_ = 1.0;
};

/// The vector field b = -perp-grad f_n, i.e. Hamiltonian H = -f_n, with
/// transversality along e1.
PlanarField cantor_planar_field(std::shared_ptr<const ScalarField> f, double min_speed,
                                double max_speed, double lipschitz);
PlanarField cantor_planar_field(std::shared_ptr<const CantorField> f);

/// Smooth radial bump K(|z|) ~ exp(-1 / (1 - 4|z|^2)) with unit mass,
/// supported in the ball of radius 1/2.
class BumpKernel {
 public:
  explicit BumpKernel(int table = 4096);

  double profile(double q) const;             // K(q)
  double profile_derivative(double q) const;  // K'(q)
  /// int_0^q K(p) p dp, int_0^q K(p) p^2 dp, int_0^q K'(p) p dp.
  double m0(double q) const { return lookup(q, t0_, 0); }
  double m1(double q) const { return lookup(q, t1_, 1); }
  double m2(double q) const { return lookup(q, t2_, 2); }
  /// Independent checks: |mass - 1| and |first moment|.
  double mass_error() const { return mass_error_; }
  double first_moment() const { return first_moment_; }

 private:
  double lookup(double q, const std::vector<double>& tab, int which) const;
  double integrand(double q, int which) const;
  double amp_ = 1.0;
  int n_;
  std::vector<double> t0_, t1_, t2_;
  double mass_error_ = 0.0, first_moment_ = 0.0;
};

const BumpKernel& default_kernel();

struct Convolution {
  double value = 0.0;
  Vec2 grad;
  std::array<double, 4> hess{};  // xx, xy, yx, yy
};

/// (h * rho_r)(z) for h piecewise affine on the given cells and 0 elsewhere,
/// rho_r(z) = r^-2 K(|z|/r). Polar quadrature around z split at the angles
/// of nearby cell vertices; radial integrals are exact given the kernel
/// moment tables.
Convolution convolve_cells(const std::vector<AffineCell>& cells, Point z, double r,
                           const BumpKernel& kernel, bool hessian = false,
                           int gauss_per_sector = 16);

/// Increment h_l = f_l - f_{l-1} on one component, local coordinates.
std::vector<AffineCell> increment_cells(const LevelGeometry& g);

/// f~_n = y + sum_l h_l * rho_l over levels 1..n.
class MollifiedCantorField final : public ScalarField {
 public:
  MollifiedCantorField(std::shared_ptr<const CantorTree> tree, int depth,
                       const BumpKernel& kernel = default_kernel());

  double value(Point z) const override;
  Vec2 gradient(Point z) const override;
  AxisRect domain() const override { return AxisRect::everywhere(); }
  Backend backend() const override { return Backend::analytic; }
  double lipschitz() const override { return lipschitz_; }
  double feature_scale(Point z) const override;

  int depth() const { return depth_; }
  /// Sum of per-level convolutions.
  Convolution evaluate(Point z, bool hessian = false) const;

 private:
  std::shared_ptr<const CantorTree> tree_;
  int depth_;
  const BumpKernel& kernel_;
  std::vector<std::vector<AffineCell>> inc_;
  std::vector<double> c_, r_, x_child_;
  std::vector<std::array<double, 2>> y_child_;
  double lipschitz_ = 1.0;
};

struct CrossingLadder {
  std::string method;  // "analytic" or "trajectory"
  std::vector<int> n;
  std::vector<double> T1, Ts, Tf, T, sigma_partial;
  std::vector<Rational> T1_exact, Ts_exact, Tf_exact, T_exact;  // analytic only
  std::vector<bool> ok;                                           // trajectory only
};

/// T1[n] = c_n/v_{n-1}; Ts[n] and Tf[n] cross a component on a slow (D
/// margin) or fast (E) level; T[1] = (1 - c_1) + Ts[1] and
/// T[n] = T[1] + sum_{l=2}^{n-1} (Ts[l] - T1[l]) + Tf[n] - T1[n].
CrossingLadder crossing_ladder(const CantorTree& tree, int n_max);

/// The same quantities integrated along level curves of the built fields.
CrossingLadder crossing_ladder_trajectory(std::shared_ptr<const CantorTree> tree, int n_max,
                                          unsigned threads = 1);

/// Heights of the fast channels, slow margins and deepest D-blocks of every
/// component of levels 1..n, plus one height above the construction; sorted.
std::vector<double> alternating_heights(const CantorTree& tree, int n);

/// Level-n fast and slow heights of the lowest component.
double fast_height(const CantorTree& tree, int n);
double slow_height(const CantorTree& tree, int n);

struct TvProfile {
  int n = 0;
  std::vector<double> ys, T;
  double measured_tv = 0.0;
  std::vector<int> levels;       // 2..n
  std::vector<double> bounds;    // B_l
  std::vector<double> growth;    // B_l / B_{l-1}
  std::vector<double> expected;  // 2 ((l-1)/l)^4
  bool resolved = true;
  std::size_t required_samples = 0;
};

/// Crossing times of f_n on the given heights and the per-level lower bounds
/// B_l = 2^{l-1} (Tf[l] - T1[l] + Ts[l-1] - Tf[l-1]).
TvProfile tv_profile(std::shared_ptr<const CantorTree> tree, int n,
                     std::span<const double> y_samples, unsigned threads = 1);

struct SobolevLevel {
  int l = 0;
  double norm = 0.0;         // || Hess(h_l * rho_l) ||_{L^p} over all of C_l
  double partial_sum = 0.0;  // sum over levels <= l
  std::size_t cells = 0;
  bool feasible = true;
};

struct SobolevOptions {
  int cells_per_r = 8;  // leaf size r_l / cells_per_r near jump edges
  int gauss = 3;        // Gauss points per leaf axis
  std::size_t max_cells = 4'000'000;
  unsigned threads = 1;
};

std::vector<SobolevLevel> sobolev_schedule(std::shared_ptr<const CantorTree> tree, int l_max,
                                           double p, const SobolevOptions& opt = {});

void write_ladder_csv(std::ostream& os, const CrossingLadder& l, const std::string& preamble = "");

}  // namespace hamflow
