#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hamflow/core.hpp"
#include "hamflow/flow.hpp"
#include "hamflow/hamiltonian.hpp"

namespace hamflow {

enum class Variant { bv, sobolev };

struct VariationProfile {
  std::vector<double> h, g;
  Variant variant = Variant::bv;
  double p = 1.0;
  double total = 0.0;      // |Db| mass of the window
  double jump_mass = 0.0;  // part carried by gradient jumps
  double lp_mass = 0.0;    // int |Db|^p over the window (absolutely continuous part)

  /// g at an arbitrary level, linear between grid levels, constant outside.
  double at(double level) const;
};

struct VariationOptions {
  int cells = 256;  // lattice per axis for the absolutely continuous part
  double fd_step = 1e-6;  // relative finite-difference step for Db
};

/// g(h) = |Db|({H <= h} within the window). The absolutely continuous part
/// uses finite differences of b at lattice cell centers with cells split by
/// linear interpolation of H; on piecewise-affine backends the mass is the
/// exact jump-edge mass instead. The Sobolev variant drops the jump part.
VariationProfile variation_profile(const PlanarField& b, const AxisRect& window,
                                   const std::vector<double>& h_grid, Variant variant = Variant::bv,
                                   double p = 1.0, const VariationOptions& opt = {});

/// Levels spread over [min H, max H] on the window lattice.
std::vector<double> level_grid(const ScalarField& H, const AxisRect& window, int levels,
                               int lattice = 128);

/// rho(h) = int_{H = h} 1/|grad H| ds over the chart window, one value per
/// level (composite 5-point Gauss-Legendre between breakpoints); levels
/// that miss the window give 0.
std::vector<double> coarea_density(ScalarFieldPtr H, const Chart& chart, double delta,
                                   const std::vector<double>& h_grid, double resolution);

/// C' = (C^2 |b| / delta^2) (1 + 2|b|/delta + |b|/delta^2).
double lipschitz_constant_Cprime(double C, double sup_norm, double delta);

struct EstimatePair {
  Point z, z2;
  double lhs = 0.0, rhs = 0.0;
};

struct EstimateReport {
  std::string kind;  // "local" or "global"
  std::size_t pairs_tested = 0;
  std::size_t skipped = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  std::optional<EstimatePair> worst;
  /// Bound on |b| used by the constants: the declared sup norm, or 1.001
  /// times the sampled maximum over the window when none is declared.
  double sup_norm = 0.0;
  // local
  double Cprime = 0.0;
  // global
  int k = 0;
  double c1 = 0.0, c2 = 0.0, r_bar = 0.0, r = 0.0;
  long N_tilde = 0;
  std::size_t covering_balls = 0;
  std::size_t item1_violations = 0, item2_violations = 0, chain_violations = 0;
};

struct LocalEstimateOptions {
  std::size_t pairs = 1000;
  std::uint64_t seed = 0;
  int levels = 512;  // h grid for g
  FlowMethod method = FlowMethod::rk;
  RkOptions rk;
  ChartPolicy chart = ChartPolicy::automatic(0.25, 1e-2);
  VariationOptions variation;
  unsigned threads = 1;
};

/// |X(t,z) - X(t,z')| <= C' (|z - z'| + |g(H(z)) - g(H(z'))|) on random pairs
/// of the window at distance > |b| t from its boundary. Requires declared
/// transversality; C is the field's compressibility constant.
EstimateReport verify_local_estimate(const PlanarField& b, const AxisRect& window, double t,
                                     const LocalEstimateOptions& opt = {});

struct GlobalEstimateOptions {
  std::size_t pairs = 500;
  std::uint64_t seed = 0;
  int levels = 512;
  int lattice = 96;           // Omega_k sampling lattice per axis
  double flat_L = 1.0;        // cone half-angle atan(L) for the covering
  int covering_attempts = 12;  // r_bar halvings
  int scan = 64;              // coarse s-scan points before golden section
  double s_tol = 1e-10;
  RkOptions rk;
  VariationOptions variation;
  unsigned threads = 1;
};

/// Items |X(t,zb) - X(s,z)| <= c1 |H(zb) - H(z)| and
/// |t - s| <= c2 (|g(H(zb)) - g(H(z))| + |zb - z|), plus the combined chain
/// |X(t,zb) - X(t,z)| <= |b|(c1 + c2)|zb - z| + c2 |b| |g(H(zb)) - g(H(z))|,
/// for zb in Omega_k and |z - zb| <= r. Throws NumericalError naming the
/// failing ball when no covering radius is found.
EstimateReport verify_global_estimate(const PlanarField& b, const AxisRect& window, int k, double t,
                                      const GlobalEstimateOptions& opt = {});

struct DiscreteNorm {
  double value = 0.0;
  std::size_t cells = 0;
  std::size_t excluded_cells = 0;  // touching flagged nodes
};

/// Anisotropic TV of one image component over grid cells inside the region:
/// sum (|d_x u| + |d_y u|) * cell area, with cell-averaged differences.
DiscreteNorm discrete_tv(const FlowMap& fm, int component, const std::optional<AxisRect>& region = {});
/// (sum |grad u|^p * cell area)^(1/p) for one component.
DiscreteNorm discrete_sobolev(const FlowMap& fm, int component, double p,
                              const std::optional<AxisRect>& region = {});

void write_variation_csv(std::ostream& os, const VariationProfile& vp, const std::string& preamble = "");
/// Report as a JSON object (no trailing newline).
std::string report_json(const EstimateReport& r);

}  // namespace hamflow
