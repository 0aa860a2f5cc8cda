#include "hamflow/field_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hamflow/counterexample.hpp"

namespace hamflow {

namespace {

using nlohmann::json;

double num(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw ConfigError(std::string("field: missing number '") + key + "'");
  return j[key].get<double>();
}

Vec2 vec(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 2)
    throw ConfigError(std::string("field: '") + key + "' must be a pair");
  return {j[key][0].get<double>(), j[key][1].get<double>()};
}

}  // namespace

json rect_json(const AxisRect& r) { return json::array({r.x_lo, r.x_hi, r.y_lo, r.y_hi}); }

AxisRect rect_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("rectangle must be [x_lo, x_hi, y_lo, y_hi]");
  return AxisRect::checked(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

json grid_json(const GridField& g) {
  const auto& G = g.grid();
  json j;
  j["kind"] = "grid";
  j["origin"] = {G.origin.x, G.origin.y};
  j["spacing"] = {G.spacing.x, G.spacing.y};
  j["shape"] = {G.nx, G.ny};
  j["values"] = g.values();
  return j;
}

std::shared_ptr<GridField> sample_grid(const ScalarField& H, const AxisRect& window, int nx, int ny) {
  NodeGrid G = NodeGrid::over(window, nx, ny);
  std::vector<double> v(G.size());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) v[G.index(i, j)] = H.value(G.node(i, j));
  return std::make_shared<GridField>(G, std::move(v));
}

LoadedField field_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ConfigError("field: missing 'kind'");
  LoadedField out;
  out.kind = j["kind"].get<std::string>();
  out.source = j;
  std::optional<PlanarField> b;
  try {
    if (out.kind == "analytic") {
      std::vector<double> params;
      if (j.contains("params")) params = j["params"].get<std::vector<double>>();
      out.H = AnalyticField::from_name(j.at("name").get<std::string>(), params);
    } else if (out.kind == "grid") {
      NodeGrid G;
      G.origin = vec(j, "origin");
      G.spacing = vec(j, "spacing");
      auto shape = j.at("shape");
      if (!shape.is_array() || shape.size() != 2) throw ConfigError("field: 'shape' must be [nx, ny]");
      G.nx = shape[0].get<int>();
      G.ny = shape[1].get<int>();
      out.H = std::make_shared<GridField>(G, j.at("values").get<std::vector<double>>());
    } else if (out.kind == "piecewise") {
      if (j.contains("construction")) {
        if (j["construction"] != "cantor") throw ConfigError("field: unknown construction");
        int depth = j.at("depth").get<int>();
        out.cantor_depth = depth;
        out.mollified = j.value("mollified", false);
        auto tree = std::make_shared<const CantorTree>(build_tree(std::max(depth, 1), 0));
        auto f = std::make_shared<CantorField>(tree, depth);
        if (out.mollified) {
          auto fm = std::make_shared<MollifiedCantorField>(tree, depth);
          out.H = std::make_shared<ScaledField>(fm, -1.0);
          b = PlanarField::hamiltonian(out.H);
        } else {
          b = cantor_planar_field(f);
          out.H = b->H_ptr();
        }
        b = b->with_transversality({{1.0, 0.0}, f->min_speed(), AxisRect::everywhere()});
      } else {
        std::vector<AffineCell> cells;
        for (const auto& c : j.at("cells")) {
          AffineCell cell;
          for (const auto& p : c.at("polygon")) cell.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
          cell.c0 = num(c, "c0");
          cell.cx = num(c, "cx");
          cell.cy = num(c, "cy");
          cells.push_back(std::move(cell));
        }
        out.H = std::make_shared<PiecewiseAffineField>(std::move(cells));
      }
    } else {
      throw ConfigError("field: unknown kind '" + out.kind + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field: ") + e.what());
  }
  if (!b) b = PlanarField::hamiltonian(out.H);
  if (j.contains("sup_norm")) b = b->with_sup_norm(num(j, "sup_norm"));
  if (j.contains("compressibility")) b = b->with_compressibility(num(j, "compressibility"));
  if (j.contains("transversality")) {
    const auto& t = j["transversality"];
    Transversality tr;
    tr.e = vec(t, "e");
    tr.delta = num(t, "delta");
    tr.window = t.contains("window") ? rect_from_json(t["window"]) : AxisRect::everywhere();
    b = b->with_transversality(tr);
  }
  out.b = *b;
  return out;
}

LoadedField load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("field file '" + path + "': " + e.what());
  }
  return field_from_json(j);
}

AxisRect default_window(const LoadedField& f) {
  AxisRect d = f.H->domain();
  if (std::isfinite(d.width()) && std::isfinite(d.height())) return d;
  // The construction lives in the unit square; x in [-1, 0) is the entry strip.
  if (f.cantor_depth >= 0) return {-1.0, 1.0, 0.0, 1.0};
  return {-1.0, 1.0, -1.0, 1.0};
}

RkOptions default_rk_options(const LoadedField& f, double tol) {
  RkOptions o;
  o.tol = tol;
  ScalarFieldPtr H = f.H;
  o.local_max_step = [H](Point z) { return H->feature_scale(z) / 4; };
  return o;
}

ChartPolicy default_chart_policy(const LoadedField& f, const AxisRect& window, double t) {
  const auto& tr = f.b.transversality();
  double size = std::max(window.width(), window.height());
  if (!tr) return ChartPolicy::automatic(0.25 * size, 1e-2);
  double speed = f.b.sup_norm();
  // Unbounded fields: the sampled maximum over the window.
  if (!std::isfinite(speed)) speed = 1.001 * field_stats(f.b, window, 4096).sup_norm;
  double reach = speed * t + 0.1 * size;
  AxisRect grown{window.x_lo - reach, window.x_hi + reach, window.y_lo - reach, window.y_hi + reach};
  Chart c;
  c.e = tr->e / norm(tr->e);
  double ul = INFINITY, uh = -INFINITY, wl = INFINITY, wh = -INFINITY;
  for (Point p : {Point{grown.x_lo, grown.y_lo}, Point{grown.x_hi, grown.y_lo}, Point{grown.x_lo, grown.y_hi},
                  Point{grown.x_hi, grown.y_hi}}) {
    Vec2 q = c.local(p);
    ul = std::min(ul, q.x);
    uh = std::max(uh, q.x);
    wl = std::min(wl, q.y);
    wh = std::max(wh, q.y);
  }
  c.window = {ul, uh, wl, wh};
  if (tr->window.valid() && std::isfinite(tr->window.width())) {
    if (!(tr->window.contains({grown.x_lo, grown.y_lo}) && tr->window.contains({grown.x_hi, grown.y_hi})))
      return ChartPolicy::automatic(0.25 * size, 1e-2);
  }
  return ChartPolicy::fixed(c, tr->delta, (uh - ul) / 512);
}

}  // namespace hamflow
