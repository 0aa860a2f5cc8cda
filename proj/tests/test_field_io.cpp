#include <cmath>

#include "doctest.h"

#include "hamflow/counterexample.hpp"
#include "hamflow/field_io.hpp"

using namespace hamflow;
using nlohmann::json;

namespace {

std::string data(const std::string& name) { return std::string(HAMFLOW_TEST_DATA) + "/" + name; }

}  // namespace

TEST_CASE("analytic fields load by name") {
  auto rot = load_field(data("rotation.json"));
  CHECK(rot.kind == "analytic");
  CHECK(rot.cantor_depth == -1);
  Vec2 v = rot.b({1, 0});
  CHECK(v.x == doctest::Approx(0.0));
  CHECK(v.y == doctest::Approx(1.0));
  auto tr = load_field(data("translation.json"));
  CHECK(tr.b({0.3, 0.7}).x == doctest::Approx(1.0));
  REQUIRE(tr.b.transversality());
  CHECK(tr.b.transversality()->delta == 1.0);
  auto sh = load_field(data("shear.json"));
  CHECK(sh.b({0, 2}).x == doctest::Approx(5.0));
}

TEST_CASE("grid fields round trip") {
  auto H = AnalyticField::compact_vortex(1.0, 1.0, {0, 0});
  auto g = sample_grid(*H, {-1, 1, -1, 1}, 33, 17);
  json j = grid_json(*g);
  CHECK(j["kind"] == "grid");
  auto back = field_from_json(json::parse(j.dump()));
  CHECK(back.kind == "grid");
  const auto& G = g->grid();
  for (int jy = 0; jy < G.ny; ++jy)
    for (int ix = 0; ix < G.nx; ++ix) {
      Point p = G.node(ix, jy);
      CHECK(back.H->value(p) == g->value(p));
      CHECK(g->value(p) == doctest::Approx(H->value(p)).epsilon(1e-15));
    }
}

TEST_CASE("piecewise cells load") {
  json j = json::parse(R"({"kind": "piecewise", "cells": [
      {"polygon": [[0, 0], [1, 0], [1, 1], [0, 1]], "c0": 0, "cx": 0, "cy": 1},
      {"polygon": [[1, 0], [2, 0], [2, 1], [1, 1]], "c0": -1, "cx": 1, "cy": 1}]})");
  auto f = field_from_json(j);
  CHECK(f.H->value({0.5, 0.5}) == doctest::Approx(0.5));
  CHECK(f.H->value({1.5, 0.5}) == doctest::Approx(1.0));
  CHECK(f.H->gradient_jumps().size() == 1);
}

TEST_CASE("construction fields load with transversality") {
  auto f = load_field(data("cex_n8.json"));
  CHECK(f.kind == "piecewise");
  CHECK(f.cantor_depth == 8);
  CHECK_FALSE(f.mollified);
  auto tree = std::make_shared<const CantorTree>(build_tree(8, 0));
  CantorField ref(tree, 8);
  for (std::size_t i = 0; i < 200; ++i) {
    Point z = halton_point(i, {0, 1, 0, 1});
    CHECK(f.H->value(z) == -ref.value(z));
  }
  REQUIRE(f.b.transversality());
  CHECK(f.b.transversality()->delta == doctest::Approx(ref.min_speed()));
  auto m = field_from_json(json::parse(R"({"kind": "piecewise", "construction": "cantor", "depth": 2,
                                           "mollified": true})"));
  CHECK(m.mollified);
  CHECK(m.b({-2, 0.5}).x == doctest::Approx(1.0));
}

TEST_CASE("optional metadata is applied") {
  auto f = field_from_json(json::parse(R"({"kind": "analytic", "name": "shear", "sup_norm": 3,
                                           "compressibility": 1.5})"));
  CHECK(f.b.sup_norm() == 3.0);
  CHECK(f.b.compressibility_L() == 1.5);
}

TEST_CASE("rectangles round trip") {
  AxisRect r{-1, 2, 0.5, 0.75};
  AxisRect s = rect_from_json(rect_json(r));
  CHECK(s.x_lo == r.x_lo);
  CHECK(s.x_hi == r.x_hi);
  CHECK(s.y_lo == r.y_lo);
  CHECK(s.y_hi == r.y_hi);
  CHECK_THROWS_AS(rect_from_json(json::array({1, 2, 3})), ConfigError);
}

TEST_CASE("malformed field files are config errors") {
  CHECK_THROWS_AS(load_field(data("missing.json")), ConfigError);
  CHECK_THROWS_AS(field_from_json(json::parse(R"({"name": "shear"})")), ConfigError);
  CHECK_THROWS_AS(field_from_json(json::parse(R"({"kind": "spline"})")), ConfigError);
  CHECK_THROWS_AS(field_from_json(json::parse(R"({"kind": "analytic"})")), ConfigError);
  CHECK_THROWS_AS(field_from_json(json::parse(R"({"kind": "analytic", "name": "nope"})")), ConfigError);
  CHECK_THROWS_AS(field_from_json(json::parse(R"({"kind": "grid", "origin": [0, 0], "spacing": [1, 1],
                                                  "shape": [2, 2], "values": [1, 2, 3]})")),
                  ConfigError);
  CHECK_THROWS_AS(field_from_json(json::parse(R"({"kind": "piecewise", "construction": "koch", "depth": 2})")),
                  ConfigError);
}
