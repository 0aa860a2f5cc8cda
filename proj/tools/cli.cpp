#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "hamflow/core.hpp"
#include "hamflow/counterexample.hpp"
#include "hamflow/field_io.hpp"
#include "hamflow/flow.hpp"
#include "hamflow/hamiltonian.hpp"
#include "hamflow/parallel.hpp"
#include "hamflow/regularity.hpp"
#include "hamflow/text.hpp"

namespace hamflow::cli {

namespace {

using nlohmann::ordered_json;

struct Series {
  std::string name;
  std::vector<Point> points;
};

class Context {
 public:
  std::string command;
  std::string hash;

  std::string preamble() const { return "# hamflow " + std::string(kVersion) + " config=" + hash + "\n"; }

  ordered_json meta() const {
    ordered_json m;
    m["tool"] = "hamflow";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = hash;
    return m;
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path + "'");
  return os;
}

void write_json(const std::string& path, const ordered_json& j) {
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_svg(const std::string& path, const Context& ctx, const std::string& title,
               const std::vector<Series>& series, const std::string& xlabel, const std::string& ylabel,
               bool markers = false) {
  double xl = INFINITY, xh = -INFINITY, yl = INFINITY, yh = -INFINITY;
  for (const auto& s : series)
    for (Point p : s.points) {
      if (!finite(p)) continue;
      xl = std::min(xl, p.x);
      xh = std::max(xh, p.x);
      yl = std::min(yl, p.y);
      yh = std::max(yh, p.y);
    }
  if (!(xl <= xh)) xl = 0, xh = 1, yl = 0, yh = 1;
  if (xh == xl) xh = xl + 1;
  if (yh == yl) yh = yl + 1;
  const double W = 640, Hh = 480, m = 60;
  auto X = [&](double x) { return m + (x - xl) / (xh - xl) * (W - 2 * m); };
  auto Y = [&](double y) { return Hh - m - (y - yl) / (yh - yl) * (Hh - 2 * m); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto os = open_out(path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
  os << "<!-- hamflow " << kVersion << " config=" << ctx.hash << " -->\n";
  os << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"480\" fill=\"white\"/>\n";
  os << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << W - 2 * m << "\" height=\"" << Hh - 2 * m
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"320\" y=\"30\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<text x=\"320\" y=\"470\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << " [" << fmt(xl)
     << ", " << fmt(xh) << "]</text>\n";
  os << "<text x=\"15\" y=\"240\" transform=\"rotate(-90 15 240)\" text-anchor=\"middle\" font-size=\"12\">"
     << ylabel << " [" << fmt(yl) << ", " << fmt(yh) << "]</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* col = colors[k % 6];
    if (markers) {
      for (Point p : series[k].points)
        if (finite(p))
          os << "<circle cx=\"" << fixed3(X(p.x)) << "\" cy=\"" << fixed3(Y(p.y)) << "\" r=\"2\" fill=\"" << col
             << "\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1\" points=\"";
    bool first = true;
    for (Point p : series[k].points) {
      if (!finite(p)) continue;
      os << (first ? "" : " ") << fixed3(X(p.x)) << ',' << fixed3(Y(p.y));
      first = false;
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - m + 5 << "\" y=\"" << m + 15 * (k + 1) << "\" font-size=\"10\" fill=\"" << col
       << "\">" << series[k].name << "</text>\n";
  }
  os << "</svg>\n";
}

AxisRect rect_from(const std::vector<double>& v, const char* flag) {
  if (v.size() != 4) throw ConfigError(std::string(flag) + " needs x_lo,x_hi,y_lo,y_hi");
  return AxisRect::checked(v[0], v[1], v[2], v[3]);
}

AxisRect field_window(const LoadedField& f, const std::vector<double>& flag) {
  if (!flag.empty()) return rect_from(flag, "--window");
  return default_window(f);
}

bool power_of_two(int n) { return n >= 2 && (n & (n - 1)) == 0; }

void positive(double v, const char* name) {
  if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
}

RkOptions rk_options(const LoadedField& f, double tol) { return default_rk_options(f, tol); }

ChartPolicy chart_policy(const LoadedField& f, const AxisRect& window, double t) {
  return default_chart_policy(f, window, t);
}

ordered_json density_json(const DensityReport& d) {
  ordered_json j;
  j["max_ratio"] = d.max_ratio;
  j["min_ratio"] = d.min_ratio;
  j["cells"] = d.cells;
  j["flagged_cells"] = d.flagged_cells.size();
  return j;
}

ordered_json flag_counts(const FlowMap& fm) {
  std::map<int, std::size_t> c;
  for (auto f : fm.flags) ++c[static_cast<int>(f)];
  static const char* names[] = {"ok", "exited", "critical", "underflow", "failed"};
  ordered_json j;
  for (int k = 0; k < 5; ++k) j[names[k]] = c[k];
  return j;
}

std::vector<std::string> with_config(const std::vector<std::string>& args) {
  std::vector<std::string> out, cfg_tokens;
  std::string cfg;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      cfg = args[++i];
      continue;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      cfg = args[i].substr(9);
      continue;
    }
    out.push_back(args[i]);
  }
  if (cfg.empty()) return out;
  std::ifstream in(cfg);
  if (!in) throw ConfigError("cannot open config '" + cfg + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + cfg + "': " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string v;
    const auto& val = it.value();
    if (val.is_array()) {
      for (const auto& x : val) {
        if (!v.empty()) v += ",";
        v += x.is_string() ? x.get<std::string>() : x.dump();
      }
    } else if (val.is_string()) {
      v = val.get<std::string>();
    } else {
      v = val.dump();
    }
    cfg_tokens.push_back("--" + it.key() + "=" + v);
  }
  // Config values go right after the subcommand path so flags override them.
  std::size_t pos = 0;
  while (pos < out.size() && out[pos].rfind("-", 0) != 0) ++pos;
  out.insert(out.begin() + static_cast<long>(pos), cfg_tokens.begin(), cfg_tokens.end());
  return out;
}

struct Options {
  unsigned threads = 1;
  std::uint64_t seed = 0;
  std::string field, out, svg, method = "levelset";
  double t = 1.0, tol = 1e-11, h = 0.0, p = 2.0;
  int grid = 64, n = 8, k = 4, samples = 4096, l = 6, cells_per_r = 8, gauss = 3, component = 0;
  std::size_t pairs = 1000;
  std::vector<double> window, e, levels;
  std::vector<int> grids{32, 64, 128};
};

// Canonical description of the run, without thread count and output paths
// so that results are comparable across runs.
std::string config_hash(const std::string& command, const Options& o) {
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = o.seed;
  j["field"] = o.field;
  j["method"] = o.method;
  j["t"] = o.t;
  j["tol"] = o.tol;
  j["h"] = o.h;
  j["p"] = o.p;
  j["grid"] = o.grid;
  j["n"] = o.n;
  j["k"] = o.k;
  j["samples"] = o.samples;
  j["l"] = o.l;
  j["cells_per_r"] = o.cells_per_r;
  j["gauss"] = o.gauss;
  j["component"] = o.component;
  j["pairs"] = o.pairs;
  j["window"] = o.window;
  j["e"] = o.e;
  j["levels"] = o.levels;
  j["grids"] = o.grids;
  return hex64(fnv1a(j.dump()));
}

FlowMap run_flow_map(const LoadedField& f, double t, const NodeGrid& g, const std::string& method,
                     const Options& o, const AxisRect& window) {
  FlowMapOptions fo;
  fo.threads = o.threads;
  fo.rk = rk_options(f, o.tol);
  fo.chart = chart_policy(f, window, t);
  fo.method = method == "rk" ? FlowMethod::rk : FlowMethod::levelset;
  return flow_map(f.b, t, g, fo);
}

int cmd_flow(const Options& o, const Context& ctx, std::ostream& out) {
  if (o.method != "levelset" && o.method != "rk" && o.method != "both")
    throw ConfigError("--method must be levelset, rk or both");
  if (!power_of_two(o.grid)) throw ConfigError("--grid must be a power of two");
  if (!(o.t >= 0)) throw ConfigError("--t must be nonnegative");
  positive(o.tol, "--tol");
  auto f = load_field(o.field);
  AxisRect window = field_window(f, o.window);
  NodeGrid g = NodeGrid::over(window, o.grid, o.grid);
  std::string base = o.out.empty() ? "flow" : o.out;
  ordered_json summary;
  summary["meta"] = ctx.meta();
  summary["t"] = o.t;
  summary["grid"] = o.grid;
  summary["window"] = rect_json(window);
  std::vector<FlowMap> maps;
  for (std::string m : {std::string("levelset"), std::string("rk")}) {
    if (o.method != "both" && o.method != m) continue;
    maps.push_back(run_flow_map(f, o.t, g, m, o, window));
    auto os = open_out(base + "_" + m + ".csv");
    write_flow_map_csv(os, maps.back(), ctx.preamble());
    summary[m] = {{"flags", flag_counts(maps.back())}, {"compressibility", density_json(compressibility_check(maps.back()))}};
  }
  if (maps.size() == 2) {
    double d = 0;
    for (std::size_t i = 0; i < maps[0].image.size(); ++i)
      if (maps[0].flags[i] == NodeFlag::ok && maps[1].flags[i] == NodeFlag::ok)
        d = std::max(d, norm(maps[0].image[i] - maps[1].image[i]));
    summary["max_discrepancy"] = d;
  }
  write_json(base + ".json", summary);
  out << "flow: wrote " << base << ".json\n";
  return ok;
}

std::shared_ptr<const CantorTree> tree_for(int n) {
  if (n < 1 || n > kMaxLevel) throw ConfigError("--n must be in [1, 30]");
  return std::make_shared<const CantorTree>(build_tree(n, 0));
}

int cmd_build(const Options& o, const Context& ctx, std::ostream& out) {
  if (!power_of_two(o.grid)) throw ConfigError("--grid must be a power of two");
  auto tree = tree_for(o.n);
  auto f = std::make_shared<CantorField>(tree, o.n);
  auto b = cantor_planar_field(f);
  AxisRect window = o.window.empty() ? AxisRect{-0.25, 0.75, -0.25, 0.75} : rect_from(o.window, "--window");
  auto g = sample_grid(b.H(), window, o.grid, o.grid);
  ordered_json j;
  j["meta"] = ctx.meta();
  nlohmann::json gj = grid_json(*g);
  for (auto it = gj.begin(); it != gj.end(); ++it) j[it.key()] = it.value();
  j["construction"] = {{"name", "cantor"}, {"depth", o.n}, {"hamiltonian", "-f"}};
  std::string path = o.out.empty() ? "cantor_grid.json" : o.out;
  write_json(path, j);
  out << "example build: wrote " << path << "\n";
  return ok;
}

int cmd_ladder(const Options& o, const Context& ctx, std::ostream& out) {
  auto tree = tree_for(std::max(o.n, 1));
  CrossingLadder L;
  if (o.method == "analytic" || o.method == "levelset")
    L = crossing_ladder(*tree, o.n);
  else if (o.method == "trajectory")
    L = crossing_ladder_trajectory(tree, o.n, o.threads);
  else
    throw ConfigError("--method must be analytic or trajectory");
  std::string path = o.out.empty() ? "ladder.csv" : o.out;
  auto os = open_out(path);
  write_ladder_csv(os, L, ctx.preamble());
  out << "example ladder: wrote " << path << "\n";
  for (bool b : L.ok)
    if (!b) return numerical_failure;
  return ok;
}

int cmd_tv(const Options& o, const Context& ctx, std::ostream& out) {
  if (o.n < 2) throw ConfigError("--n must be >= 2");
  if (o.samples < 0) throw ConfigError("--samples must be nonnegative");
  auto tree = tree_for(o.n);
  auto ys = alternating_heights(*tree, o.n);
  double top = to_double(tree->level(1).p.c);
  for (int i = 0; i < o.samples; ++i) ys.push_back(top * (i + 0.5) / o.samples);
  auto P = tv_profile(tree, o.n, ys, o.threads);
  std::string base = o.out.empty() ? "tv" : o.out;
  {
    auto os = open_out(base + ".csv");
    os << ctx.preamble() << "y,T\n";
    for (std::size_t i = 0; i < P.ys.size(); ++i) os << fmt(P.ys[i]) << ',' << fmt(P.T[i]) << '\n';
  }
  ordered_json j;
  j["meta"] = ctx.meta();
  j["n"] = P.n;
  j["samples"] = P.ys.size();
  j["required_samples"] = P.required_samples;
  j["resolved"] = P.resolved;
  j["measured_tv"] = P.measured_tv;
  bool dominates = true;
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < P.levels.size(); ++i) {
    rows.push_back({{"l", P.levels[i]}, {"bound", P.bounds[i]},
                    {"growth", std::isfinite(P.growth[i]) ? ordered_json(P.growth[i]) : ordered_json()},
                    {"expected_growth", P.expected[i]}});
    dominates = dominates && P.measured_tv >= P.bounds[i];
  }
  j["levels"] = rows;
  j["tv_dominates_bounds"] = dominates;
  write_json(base + ".json", j);
  if (!o.svg.empty()) {
    Series s{"T(y)", {}};
    for (std::size_t i = 0; i < P.ys.size(); ++i) s.points.push_back({P.ys[i], P.T[i]});
    write_svg(o.svg, ctx, "crossing time, depth " + std::to_string(o.n), {s}, "y", "T");
  }
  out << "example tv: measured TV " << fmt(P.measured_tv) << (dominates ? " >= " : " < ") << "all level bounds\n";
  return dominates && P.resolved ? ok : check_failed;
}

int cmd_mollify(const Options& o, const Context& ctx, std::ostream& out) {
  if (o.samples < 1) throw ConfigError("--samples must be >= 1");
  auto tree = tree_for(o.n);
  MollifiedCantorField mf(tree, o.n);
  AxisRect window = o.window.empty() ? AxisRect{-0.05, 0.55, -0.05, 0.55} : rect_from(o.window, "--window");
  std::vector<double> v(o.samples);
  // b . e1 = d f~ / dy for b = -perp-grad f~.
  std::vector<Point> pts(o.samples);
  for (int i = 0; i < o.samples; ++i) pts[i] = halton_point(static_cast<std::size_t>(i), window);
  parallel_for(pts.size(), o.threads, [&](std::size_t i) { v[i] = mf.gradient(pts[i]).y; });
  double mn = *std::min_element(v.begin(), v.end());
  std::size_t nonpos = static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return !(x > 0); }));
  ordered_json j;
  j["meta"] = ctx.meta();
  j["n"] = o.n;
  j["window"] = rect_json(window);
  j["samples"] = o.samples;
  j["min_b_dot_e1"] = mn;
  j["nonpositive"] = nonpos;
  std::string path = o.out.empty() ? "mollify.json" : o.out;
  write_json(path, j);
  out << "example mollify: min b.e1 = " << fmt(mn) << "\n";
  return nonpos == 0 ? ok : check_failed;
}

int cmd_sobolev(const Options& o, const Context& ctx, std::ostream& out) {
  auto tree = tree_for(o.l);
  SobolevOptions so;
  so.cells_per_r = o.cells_per_r;
  so.gauss = o.gauss;
  so.threads = o.threads;
  auto s = sobolev_schedule(tree, o.l, o.p, so);
  std::string path = o.out.empty() ? "sobolev.csv" : o.out;
  auto os = open_out(path);
  os << ctx.preamble() << "l,norm,partial_sum,cells,feasible\n";
  for (const auto& r : s)
    os << r.l << ',' << fmt(r.norm) << ',' << fmt(r.partial_sum) << ',' << r.cells << ',' << (r.feasible ? 1 : 0)
       << '\n';
  out << "example sobolev-schedule: wrote " << path << "\n";
  return ok;
}

int cmd_verify_lipschitz(const Options& o, const Context& ctx, std::ostream& out) {
  auto f = load_field(o.field);
  AxisRect window = field_window(f, o.window);
  LocalEstimateOptions lo;
  lo.pairs = o.pairs;
  lo.seed = o.seed;
  lo.threads = o.threads;
  lo.rk = rk_options(f, o.tol);
  lo.method = o.method == "rk" ? FlowMethod::rk : FlowMethod::levelset;
  lo.chart = chart_policy(f, window, o.t);
  auto rep = verify_local_estimate(f.b, window, o.t, lo);
  ordered_json j = ordered_json::parse(report_json(rep));
  j["meta"] = ctx.meta();
  std::string path = o.out.empty() ? "verify_lipschitz.json" : o.out;
  write_json(path, j);
  out << "verify lipschitz: " << rep.violations << " violations in " << rep.pairs_tested << " pairs\n";
  return rep.violations == 0 ? ok : check_failed;
}

int cmd_verify_global(const Options& o, const Context& ctx, std::ostream& out) {
  auto f = load_field(o.field);
  AxisRect window = field_window(f, o.window);
  GlobalEstimateOptions go;
  go.pairs = o.pairs;
  go.seed = o.seed;
  go.threads = o.threads;
  go.rk = rk_options(f, o.tol);
  auto rep = verify_global_estimate(f.b, window, o.k, o.t, go);
  ordered_json j = ordered_json::parse(report_json(rep));
  j["meta"] = ctx.meta();
  std::string path = o.out.empty() ? "verify_global.json" : o.out;
  write_json(path, j);
  out << "verify global: " << rep.violations << " violations in " << rep.pairs_tested << " pairs\n";
  return rep.violations == 0 ? ok : check_failed;
}

int cmd_verify_tv(const Options& o, const Context& ctx, std::ostream& out) {
  if (o.component != 0 && o.component != 1) throw ConfigError("--component must be 0 or 1");
  for (int g : o.grids)
    if (!power_of_two(g)) throw ConfigError("--grids must be powers of two");
  auto f = load_field(o.field);
  AxisRect window = field_window(f, o.window);
  std::string base = o.out.empty() ? "tv_refinement" : o.out;
  auto os = open_out(base + ".csv");
  os << ctx.preamble() << "grid,tv,cells,excluded\n";
  Series s{"TV", {}};
  ordered_json rows = ordered_json::array();
  bool increasing = true;
  double prev = -INFINITY;
  for (int g : o.grids) {
    auto fm = run_flow_map(f, o.t, NodeGrid::over(window, g, g), o.method, o, window);
    auto tv = discrete_tv(fm, o.component);
    os << g << ',' << fmt(tv.value) << ',' << tv.cells << ',' << tv.excluded_cells << '\n';
    rows.push_back({{"grid", g}, {"tv", tv.value}, {"excluded_cells", tv.excluded_cells}});
    s.points.push_back({static_cast<double>(g), tv.value});
    increasing = increasing && tv.value > prev;
    prev = tv.value;
  }
  ordered_json j;
  j["meta"] = ctx.meta();
  j["t"] = o.t;
  j["component"] = o.component;
  j["window"] = rect_json(window);
  j["rows"] = rows;
  j["monotone_increasing"] = increasing;
  write_json(base + ".json", j);
  if (!o.svg.empty()) write_svg(o.svg, ctx, "discrete TV under refinement", {s}, "grid", "TV", true);
  out << "verify tv-refinement: " << (increasing ? "increasing" : "not increasing") << "\n";
  return ok;
}

int cmd_field_stats(const Options& o, const Context& ctx, std::ostream& out) {
  if (o.samples < 1) throw ConfigError("--samples must be >= 1");
  auto f = load_field(o.field);
  AxisRect window = field_window(f, o.window);
  std::optional<Vec2> e;
  if (!o.e.empty()) {
    if (o.e.size() != 2) throw ConfigError("--e needs ex,ey");
    e = Vec2{o.e[0], o.e[1]};
  }
  auto st = field_stats(f.b, window, static_cast<std::size_t>(o.samples), e);
  ordered_json j;
  j["meta"] = ctx.meta();
  j["window"] = rect_json(window);
  j["samples"] = st.samples;
  j["sup_norm"] = st.sup_norm;
  j["min_b_dot_e"] = st.min_b_dot_e ? ordered_json(*st.min_b_dot_e) : ordered_json();
  std::string path = o.out.empty() ? "field_stats.json" : o.out;
  write_json(path, j);
  out << "field stats: sup " << fmt(st.sup_norm) << "\n";
  return ok;
}

int cmd_field_level(const Options& o, const Context& ctx, std::ostream& out) {
  auto f = load_field(o.field);
  AxisRect window = field_window(f, o.window);
  const auto& tr = f.b.transversality();
  if (!tr) throw ConfigError("level plots need declared transversality");
  std::vector<double> hs = o.levels;
  if (hs.empty()) hs = level_grid(*f.H, window, 9);
  Chart c;
  c.e = tr->e / norm(tr->e);
  double ul = INFINITY, uh = -INFINITY, wl = INFINITY, wh = -INFINITY;
  for (Point p : {Point{window.x_lo, window.y_lo}, Point{window.x_hi, window.y_lo},
                  Point{window.x_lo, window.y_hi}, Point{window.x_hi, window.y_hi}}) {
    Vec2 q = c.local(p);
    ul = std::min(ul, q.x);
    uh = std::max(uh, q.x);
    wl = std::min(wl, q.y);
    wh = std::max(wh, q.y);
  }
  c.window = {ul, uh, wl, wh};
  std::vector<Series> series;
  std::string base = o.out.empty() ? "levels" : o.out;
  auto os = open_out(base + ".csv");
  os << ctx.preamble();
  bool header = true;
  for (double h : hs) {
    auto curve = level_curve(f.H, h, c, tr->delta, (uh - ul) / 512);
    std::ostringstream tmp;
    write_level_curve_csv(tmp, curve);
    std::string body = tmp.str();
    if (!header) body = body.substr(body.find('\n') + 1);
    header = false;
    os << body;
    Series s{"h=" + fmt(h), {}};
    for (auto [u0, u1] : curve.runs)
      for (int i = 0; i <= 256; ++i) s.points.push_back(curve.point_at(u0 + (u1 - u0) * i / 256));
    series.push_back(std::move(s));
  }
  if (!o.svg.empty()) write_svg(o.svg, ctx, "level curves", series, "x", "y");
  out << "field level: wrote " << base << ".csv\n";
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
  std::deque<Options> store;
  CLI::App app{"Regular Lagrangian flows of planar Hamiltonian fields", "hamflow"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  auto window_opt = [](CLI::App* a, Options& o) {
    a->add_option("--window", o.window, "x_lo,x_hi,y_lo,y_hi")->delimiter(',')->expected(4);
  };

  std::map<const CLI::App*, std::pair<Options*, std::function<int(const Context&)>>> handlers;
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& desc, auto&& fn) {
    CLI::App* a = parent->add_subcommand(name, desc);
    Options& o = store.emplace_back();
    a->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    a->add_option("--out", o.out, "output path or prefix");
    handlers[a] = {&o, [&o, &out, fn](const Context& c) { return fn(o, c, out); }};
    return std::pair<CLI::App*, Options*>{a, &o};
  };

  auto [flow, flow_o] = leaf(&app, "flow", "flow map of a field on a grid", cmd_flow);
  flow->add_option("--field", flow_o->field, "field definition JSON")->required();
  flow->add_option("--t", flow_o->t, "time");
  flow->add_option("--grid", flow_o->grid, "nodes per axis (power of two)");
  flow->add_option("--method", flow_o->method, "levelset, rk or both");
  flow->add_option("--tol", flow_o->tol, "integrator tolerance");
  window_opt(flow, *flow_o);

  CLI::App* example = app.add_subcommand("example", "counterexample construction");
  example->require_subcommand(1);
  auto [build, build_o] = leaf(example, "build", "grid-sampled H = -f_n", cmd_build);
  build->add_option("--n", build_o->n, "depth");
  build->add_option("--grid", build_o->grid, "nodes per axis (power of two)");
  window_opt(build, *build_o);
  auto [ladder, ladder_o] = leaf(example, "ladder", "crossing-time ladder", cmd_ladder);
  ladder->add_option("--n", ladder_o->n, "depth");
  ladder->add_option("--method", ladder_o->method, "analytic or trajectory")->default_val("analytic");
  auto [tv, tv_o] = leaf(example, "tv", "crossing-time total variation", cmd_tv);
  tv->add_option("--n", tv_o->n, "depth");
  tv->add_option("--samples", tv_o->samples, "extra uniform heights")->default_val(0);
  tv->add_option("--svg", tv_o->svg, "T(y) plot");
  auto [moll, moll_o] = leaf(example, "mollify", "transversality of the mollified field", cmd_mollify);
  moll->add_option("--n", moll_o->n, "depth")->default_val(3);
  moll->add_option("--samples", moll_o->samples, "sample points");
  window_opt(moll, *moll_o);
  auto [sob, sob_o] = leaf(example, "sobolev-schedule", "per-level Hessian norms", cmd_sobolev);
  sob->add_option("--l", sob_o->l, "levels");
  sob->add_option("--p", sob_o->p, "exponent");
  sob->add_option("--cells-per-r", sob_o->cells_per_r, "leaf cells per kernel radius");
  sob->add_option("--gauss", sob_o->gauss, "Gauss points per leaf axis");

  CLI::App* verify = app.add_subcommand("verify", "estimate verifiers");
  verify->require_subcommand(1);
  auto [lip, lip_o] = leaf(verify, "lipschitz", "local Lipschitz estimate", cmd_verify_lipschitz);
  lip->add_option("--field", lip_o->field, "field definition JSON")->required();
  lip->add_option("--pairs", lip_o->pairs, "pair samples");
  lip->add_option("--t", lip_o->t, "time")->default_val(0.1);
  lip->add_option("--seed", lip_o->seed, "pair sampling seed");
  lip->add_option("--method", lip_o->method, "levelset or rk")->default_val("rk");
  lip->add_option("--tol", lip_o->tol, "integrator tolerance");
  window_opt(lip, *lip_o);
  auto [glob, glob_o] = leaf(verify, "global", "two-constant global estimate", cmd_verify_global);
  glob->add_option("--field", glob_o->field, "field definition JSON")->required();
  glob->add_option("--k", glob_o->k, "Omega_k index");
  glob->add_option("--pairs", glob_o->pairs, "pair samples")->default_val(500);
  glob->add_option("--t", glob_o->t, "time");
  glob->add_option("--seed", glob_o->seed, "pair sampling seed");
  glob->add_option("--tol", glob_o->tol, "integrator tolerance");
  window_opt(glob, *glob_o);
  auto [tvr, tvr_o] = leaf(verify, "tv-refinement", "discrete TV of the flow map under refinement", cmd_verify_tv);
  tvr->add_option("--field", tvr_o->field, "field definition JSON")->required();
  tvr->add_option("--t", tvr_o->t, "time")->default_val(2.0);
  tvr->add_option("--grids", tvr_o->grids, "grid sizes")->delimiter(',');
  tvr->add_option("--component", tvr_o->component, "image component (0 or 1)");
  tvr->add_option("--method", tvr_o->method, "levelset or rk");
  tvr->add_option("--tol", tvr_o->tol, "integrator tolerance");
  tvr->add_option("--svg", tvr_o->svg, "TV plot");
  window_opt(tvr, *tvr_o);

  CLI::App* field = app.add_subcommand("field", "field inspection");
  field->require_subcommand(1);
  auto [stats, stats_o] = leaf(field, "stats", "sup norm and transversality", cmd_field_stats);
  stats->add_option("--field", stats_o->field, "field definition JSON")->required();
  stats->add_option("--samples", stats_o->samples, "samples");
  stats->add_option("--e", stats_o->e, "direction ex,ey")->delimiter(',')->expected(2);
  window_opt(stats, *stats_o);
  auto [lvl, lvl_o] = leaf(field, "level", "level curves", cmd_field_level);
  lvl->add_option("--field", lvl_o->field, "field definition JSON")->required();
  lvl->add_option("--levels", lvl_o->levels, "levels h")->delimiter(',');
  lvl->add_option("--svg", lvl_o->svg, "plot");
  window_opt(lvl, *lvl_o);

  try {
    auto args = with_config(raw);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o1, o2;
    int code = app.exit(e, o1, o2);
    out << o1.str();
    err << o2.str();
    return code == 0 ? ok : config_error;
  } catch (const Error& e) {
    err << "hamflow: " << e.what() << "\n";
    return config_error;
  }

  const CLI::App* sel = &app;
  std::string path;
  while (!sel->get_subcommands().empty()) {
    sel = sel->get_subcommands().front();
    path += (path.empty() ? "" : " ") + sel->get_name();
  }
  auto it = handlers.find(sel);
  if (it == handlers.end()) {
    err << "hamflow: incomplete command\n";
    return config_error;
  }
  Context ctx;
  ctx.command = path;
  ctx.hash = config_hash(path, *it->second.first);
  try {
    return it->second.second(ctx);
  } catch (const ConfigError& e) {
    err << "hamflow: " << e.what() << "\n";
    return config_error;
  } catch (const Error& e) {
    err << "hamflow: " << e.what() << "\n";
    return numerical_failure;
  } catch (const std::exception& e) {
    err << "hamflow: " << e.what() << "\n";
    return numerical_failure;
  }
}

}  // namespace hamflow::cli
