#pragma once

#include <memory>
#include <string>

#include "json.hpp"

#include "hamflow/core.hpp"
#include "hamflow/flow.hpp"

namespace hamflow {

struct LoadedField {
  std::string kind;  // "analytic", "grid" or "piecewise"
  ScalarFieldPtr H;
  PlanarField b;
  nlohmann::json source;
  /// Depth of the counterexample construction, -1 for other fields.
  int cantor_depth = -1;
  bool mollified = false;
};

/// Field definition file:
///   {"kind": "analytic", "name": "rotation", "params": [omega, cx, cy]}
///   {"kind": "grid", "origin": [x, y], "spacing": [dx, dy], "shape": [nx, ny],
///    "values": [...]}                       (H at nodes, row-major, x fastest)
///   {"kind": "piecewise", "cells": [{"polygon": [[x, y], ...], "c0": .., "cx": .., "cy": ..}]}
///   {"kind": "piecewise", "construction": "cantor", "depth": n, "mollified": false}
/// with optional "transversality": {"e": [ex, ey], "delta": d, "window": [x_lo, x_hi, y_lo, y_hi]},
/// "compressibility": C and "sup_norm": s. The construction uses H = -f_n.
LoadedField field_from_json(const nlohmann::json& j);
LoadedField load_field(const std::string& path);

nlohmann::json grid_json(const GridField& g);
nlohmann::json rect_json(const AxisRect& r);
AxisRect rect_from_json(const nlohmann::json& j);

/// Sample H on an nx x ny node lattice over the window.
std::shared_ptr<GridField> sample_grid(const ScalarField& H, const AxisRect& window, int nx, int ny);

/// Declared domain if bounded; otherwise [-1, 1] x [0, 1] for the
/// construction and [-1, 1]^2 for the rest.
AxisRect default_window(const LoadedField& f);

/// Integrator tolerance with steps capped at a quarter of the local feature scale.
RkOptions default_rk_options(const LoadedField& f, double tol);

/// Fixed chart along the declared transversality direction covering the
/// window grown by the distance travelled in time t; automatic charts when
/// no direction is declared or its window is too small.
ChartPolicy default_chart_policy(const LoadedField& f, const AxisRect& window, double t);

}  // namespace hamflow
