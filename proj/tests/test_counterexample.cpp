#include <cmath>
#include <sstream>

#include "doctest.h"

#include "hamflow/counterexample.hpp"

using namespace hamflow;

namespace {

std::shared_ptr<const CantorTree> tree_of(int n, int depth = 10) {
  return std::make_shared<const CantorTree>(build_tree(n, depth));
}

}  // namespace

TEST_CASE("level parameters") {
  auto p1 = level_params(1);
  CHECK(p1.c == Rational(1, 2));
  CHECK(p1.r == Rational(3, 32));
  CHECK(p1.a == 0);
  auto p2 = level_params(2);
  CHECK(p2.c == Rational(1, 16));
  CHECK(p2.a == Rational(5, 1152));
  CHECK(p2.r == Rational(5, 1152));
  for (int n = 2; n <= kMaxLevel; ++n) {
    auto p = level_params(n);
    CHECK(p.c == Rational(1, n * n) / pow(boost::multiprecision::cpp_int(2), n));
    CHECK(p.c == 2 * level_params(n + 1).c + 4 * (p.a + p.r));
  }
  CHECK_THROWS_AS(level_params(0), ConfigError);
}

TEST_CASE("level-1 layout override keeps the packing identity") {
  auto q = layout_params(1);
  CHECK(q.a == Rational(3, 64));
  CHECK(q.r == Rational(3, 64));
  CHECK(q.c == 2 * layout_params(2).c + 4 * (q.a + q.r));
  for (int n = 2; n <= 6; ++n) {
    CHECK(layout_params(n).a == level_params(n).a);
    CHECK(layout_params(n).r == level_params(n).r);
  }
}

TEST_CASE("component counts follow the two-children rule") {
  auto t = tree_of(12, 8);
  CHECK(t->materialized_depth() == 8);
  for (int n = 1; n <= 8; ++n) {
    CHECK(t->components[n - 1].size() == (std::size_t{1} << (n - 1)));
    CHECK(t->component_count(n) == (std::uint64_t{1} << (n - 1)));
  }
  CHECK(t->component_count(12) == 2048u);
}

TEST_CASE("children sit inside the parent's D-blocks with margin r") {
  auto t = tree_of(6, 6);
  for (int n = 1; n < 6; ++n) {
    const auto& g = t->level(n);
    const auto& kids = t->components[n];
    for (std::size_t i = 0; i < t->components[n - 1].size(); ++i) {
      const auto& P = t->components[n - 1][i];
      for (int j = 0; j < 2; ++j) {
        const auto& K = kids[2 * i + j];
        CHECK(K.x0 - P.x0 == g.x_child);
        CHECK(K.y0 - P.y0 == g.y_child[j]);
        CHECK(K.f0 - P.f0 == g.f_child[j]);
        // D-block [x_child - r, x_child - r + d] x [core_y[1 + 3j], core_y[2 + 3j]].
        CHECK(K.y0 - P.y0 - g.p.r == g.core_y[1 + 3 * j]);
        CHECK(K.y0 - P.y0 + g.c_next + g.p.r == g.core_y[2 + 3 * j]);
      }
    }
  }
}

TEST_CASE("oscillation and speed recursions with the layout override") {
  auto t = tree_of(8);
  // s_1 = c_1; 4 s_{n+1} = c_{n+1} / (c_{n+1} + 2 r_n) s_n; v_n = s_{n+1}/c_{n+1}; v'_n = s_n/(8 a_n).
  Rational s = Rational(1, 2);
  for (int n = 1; n <= 7; ++n) {
    const auto& g = t->level(n);
    auto p = layout_params(n), q = layout_params(n + 1);
    CHECK(g.s == s);
    Rational s_next = q.c / (q.c + 2 * p.r) * s / 4;
    CHECK(g.v == s_next / q.c);
    CHECK(g.v_prime == s / (8 * p.a));
    CHECK(g.d == q.c + 2 * p.r);
    CHECK(t->level(n + 1).v_prev == g.v);
    s = s_next;
  }
  CHECK(t->level(2).s == Rational(1, 20));
  CHECK(t->level(1).v == Rational(4, 5));
  CHECK(t->level(2).v_prime == Rational(36, 25));
  CHECK(t->level(1).v_prev == 1);
}

TEST_CASE("sigma partial products") {
  CHECK(sigma(2) == doctest::Approx(0.25).epsilon(1e-15));
  Rational exact = 1;
  for (int l = 2; l <= 12; ++l) {
    auto p = level_params(l), q = level_params(l - 1);
    exact *= p.c / (p.c + 2 * q.r);
    CHECK(sigma(l) == doctest::Approx(to_double(exact)).epsilon(1e-13));
  }
  for (int n = 2; n < 400; ++n) {
    CHECK(sigma(n + 1) < sigma(n));
    CHECK(sigma(n + 1) > 0);
  }
  CHECK_THROWS_AS(sigma(1), ConfigError);
}

TEST_CASE("sigma limit agrees with a long direct product") {
  // -log(sigma(N) / sigma) = sum_{m >= N} log(1 + (2m+1)/m^3) ~ 2/N + 1/(2 N^2) + 1/N^2.
  const int N = 1000;
  long double direct = 0;
  for (int m = 1; m < N; ++m) direct += std::log1p((2.0L * m + 1) / ((long double)m * m * m));
  long double tail = 0;
  for (long m = N; m < 20'000'000; ++m) tail += std::log1p((2.0L * m + 1) / ((long double)m * m * m));
  tail += 2.0L / 20'000'000;
  double lim = sigma_limit();
  CHECK(lim == doctest::Approx(static_cast<double>(std::exp(-(direct + tail)))).epsilon(1e-11));
  CHECK(static_cast<double>(std::exp(-direct)) == doctest::Approx(sigma(N)).epsilon(1e-11));
  CHECK(sigma_limit(50000) == doctest::Approx(lim).epsilon(1e-12));
  CHECK(lim < sigma(N));
  CHECK(lim > 0);
}

TEST_CASE("f_0 = y and f_1 oscillates by 1/2 over C_1") {
  auto t = tree_of(4);
  CantorField f0(t, 0);
  for (Point z : {Point{0.1, 0.3}, Point{-2, 5}}) CHECK(f0.value(z) == z.y);
  CantorField f1(t, 1);
  const auto& C = t->components[0][0];
  double x0 = to_double(C.x0), y0 = to_double(C.y0), c = to_double(t->level(1).p.c);
  double lo = INFINITY, hi = -INFINITY;
  for (int i = 0; i <= 64; ++i)
    for (int j = 0; j <= 64; ++j) {
      double v = f1.value({x0 + c * i / 64, y0 + c * j / 64}) - to_double(C.f0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  CHECK(lo == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(hi - lo == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("gradient structure on D-blocks, E-channels and F-bands") {
  auto t = tree_of(5, 5);
  for (int n = 1; n <= 4; ++n) {
    auto f = std::make_shared<CantorField>(t, n);
    CantorField prev(t, n - 1);
    const auto& g = t->level(n);
    double c = to_double(g.p.c), a = to_double(g.p.a), r = to_double(g.p.r), d = to_double(g.d);
    double xc = to_double(g.x_child);
    for (const auto& C : t->components[n - 1]) {
      double x0 = to_double(C.x0), y0 = to_double(C.y0);
      for (int k = 0; k < 20; ++k) {
        double u = (k + 0.5) / 20;
        for (int j = 0; j < 2; ++j) {
          double yD = to_double(g.core_y[1 + 3 * j]);
          Point pD{x0 + xc - r + u * d, y0 + yD + (1 - u) * d};
          Vec2 gD = f->gradient(pD);
          CHECK(gD.x == doctest::Approx(0.0).epsilon(1e-12));
          CHECK(gD.y == doctest::Approx(to_double(g.v)).epsilon(1e-12));
        }
        Point pE{x0 + c / 4 + a + u * (c / 2 - 2 * a), y0 + u * a};
        CHECK(f->gradient(pE).y == doctest::Approx(to_double(g.v_prime)).epsilon(1e-12));
        Point pF{x0 + u * c / 4, y0 + (1 - u) * c};
        CHECK(f->value(pF) == doctest::Approx(prev.value(pF)).epsilon(1e-14));
        Point pF2{x0 + 3 * c / 4 + u * c / 4, y0 + u * c};
        CHECK(f->value(pF2) == doctest::Approx(prev.value(pF2)).epsilon(1e-14));
      }
    }
    // Outside C_n the field equals f_{n-1}.
    for (Point z : {Point{-0.3, 0.4}, Point{1.2, 0.1}, Point{0.25, 1.3}})
      CHECK(f->value(z) == doctest::Approx(prev.value(z)).epsilon(1e-15));
  }
}

TEST_CASE("f_n is continuous, increasing in y and obeys the gradient bound") {
  auto t = tree_of(5, 5);
  for (int n = 1; n <= 5; ++n) {
    CantorField f(t, n);
    const auto& g = t->level(n);
    double c = to_double(g.p.c), a = to_double(g.p.a);
    double bound = to_double(g.v_prime) * ((c - 8 * a) / (4 * a) + 1);
    const auto& C = t->components[n - 1][0];
    AxisRect box{to_double(C.x0), to_double(C.x0) + c, to_double(C.y0), to_double(C.y0) + c};
    for (std::size_t i = 0; i < 2000; ++i) {
      Point z = halton_point(i, box);
      if (f.level_at(z) != n) continue;
      Vec2 gr = f.gradient(z);
      CHECK(std::hypot(gr.x, gr.y) <= bound * (1 + 1e-12));
      CHECK(gr.y > 0);
    }
    // Continuity across cell boundaries: small steps give small changes.
    double L = f.lipschitz(), h = c * 1e-7;
    for (std::size_t i = 0; i < 2000; ++i) {
      Point z = halton_point(i, box);
      CHECK(std::abs(f.value(z + Vec2{h, 0}) - f.value(z)) <= L * h * (1 + 1e-6) + 1e-15);
      CHECK(f.value(z + Vec2{0, h}) > f.value(z));
    }
  }
}

TEST_CASE("gradient bound is summable") {
  auto t = tree_of(30, 1);
  double sum = 0;
  for (int n = 1; n <= 30; ++n) {
    const auto& g = t->level(n);
    double c = to_double(g.p.c), a = to_double(g.p.a);
    sum += to_double(g.v_prime) * ((c - 8 * a) / (4 * a) + 1);
  }
  double tail = 0;
  for (int n = 26; n <= 30; ++n) {
    const auto& g = t->level(n);
    double c = to_double(g.p.c), a = to_double(g.p.a);
    tail += to_double(g.v_prime) * ((c - 8 * a) / (4 * a) + 1);
  }
  CHECK(std::isfinite(sum));
  CHECK(tail < 1e-2 * sum);
}

TEST_CASE("analytic crossing ladder") {
  auto t = tree_of(10);
  auto L = crossing_ladder(*t, 10);
  CHECK(L.method == "analytic");
  REQUIRE(L.n.size() == 10);
  CHECK(L.T1[0] == 0.5);
  CHECK(L.T1_exact[1] == Rational(5, 64));
  for (int n = 1; n <= 10; ++n) {
    std::size_t i = n - 1;
    CHECK(L.T1_exact[i] * t->level(n).v_prev == t->level(n).p.c);
    Rational T = L.T_exact[0];
    for (int l = 2; l < n; ++l) T += L.Ts_exact[l - 1] - L.T1_exact[l - 1];
    if (n >= 2) T += L.Tf_exact[i] - L.T1_exact[i];
    CHECK(L.T_exact[i] == T);
    CHECK(L.T[i] == to_double(T));
    CHECK(L.sigma_partial[i] > 0);
  }
  // The slow path through C_1: entry, D-transit at v_1, exit.
  const auto& g1 = t->level(1);
  CHECK(L.T_exact[0] == 1 - g1.p.c + L.Ts_exact[0]);
  CHECK((g1.c_next + 2 * g1.p.r) / g1.v == Rational(25, 128));
}

TEST_CASE("trajectory ladder matches the analytic ladder") {
  auto t = tree_of(5, 5);
  auto A = crossing_ladder(*t, 5);
  auto B = crossing_ladder_trajectory(t, 5);
  CHECK(B.method == "trajectory");
  REQUIRE(B.n.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(B.ok[i]);
    CHECK(B.T1[i] == doctest::Approx(A.T1[i]).epsilon(1e-10));
    CHECK(B.Ts[i] == doctest::Approx(A.Ts[i]).epsilon(1e-10));
    CHECK(B.Tf[i] == doctest::Approx(A.Tf[i]).epsilon(1e-10));
    CHECK(B.T[i] == doctest::Approx(A.T[i]).epsilon(1e-10));
  }
}

TEST_CASE("crossing times at fast and slow heights") {
  auto t = tree_of(5, 5);
  auto L = crossing_ladder(*t, 5);
  for (int n = 2; n <= 4; ++n) {
    auto b = cantor_planar_field(std::make_shared<CantorField>(t, n));
    double yf = fast_height(*t, n), ys = slow_height(*t, n);
    auto ct = crossing_times(b, std::vector<double>{yf, ys}, {});
    CHECK(ct[0].T == doctest::Approx(L.T[n - 1]).epsilon(1e-10));
    // On the slow height the next level's D-transit is not yet refined.
    CHECK(ct[1].T > ct[0].T);
  }
}

TEST_CASE("TV profile bounds and growth") {
  auto t = tree_of(6, 6);
  auto ys = alternating_heights(*t, 6);
  auto P = tv_profile(t, 6, ys);
  auto L = crossing_ladder(*t, 6);
  REQUIRE(P.levels.size() == 5);
  for (std::size_t k = 0; k < P.levels.size(); ++k) {
    int l = P.levels[k];
    double B = std::pow(2.0, l - 1) * (L.Tf[l - 1] - L.T1[l - 1] + L.Ts[l - 2] - L.Tf[l - 2]);
    CHECK(P.bounds[k] == doctest::Approx(B).epsilon(1e-14));
    CHECK(P.bounds[k] > 0);
    CHECK(P.measured_tv >= P.bounds[k]);
    double q = (l - 1.0) / l;
    CHECK(P.expected[k] == doctest::Approx(2 * q * q * q * q));
    if (k > 0) CHECK(P.growth[k] == doctest::Approx(P.bounds[k] / P.bounds[k - 1]));
  }
  CHECK(P.required_samples == 256u);
  CHECK(P.T.size() == P.ys.size());
}

TEST_CASE("TV profile flags unresolved sampling") {
  auto t = tree_of(5, 5);
  std::vector<double> few{0.1, 0.2, 0.3};
  auto P = tv_profile(t, 5, few);
  CHECK_FALSE(P.resolved);
  CHECK(P.required_samples == 128u);
  CHECK_THROWS_AS(tv_profile(t, 1, few), ConfigError);
}

TEST_CASE("sup of the ladder is finite") {
  auto t = tree_of(30, 1);
  auto L = crossing_ladder(*t, 30);
  double sup = 0;
  for (double T : L.T) sup = std::max(sup, T);
  CHECK(std::isfinite(sup));
  CHECK(std::abs(L.T[29] - L.T[28]) < std::abs(L.T[9] - L.T[8]));
}

TEST_CASE("ladder CSV") {
  auto t = tree_of(3);
  auto L = crossing_ladder(*t, 3);
  std::ostringstream os;
  write_ladder_csv(os, L, "# hamflow\n");
  std::string s = os.str();
  CHECK(s.rfind("# hamflow\nn,T1,Ts,Tf,T,sigma_partial\n1,0.5,", 0) == 0);
  CHECK(s.find("\n2,0.078125,") != std::string::npos);
}
