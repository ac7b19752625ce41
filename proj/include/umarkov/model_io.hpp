// Model JSON (parsing and builders) and verdict JSON.
//
// Model schema: {"sites": int, "edges": [[i,j], ...], "model": "contact" |
// "ising" | "tabular", "controls": [{"label": str, "lambda"|"beta": num}],
// "rates": [g][x][state]  (tabular only)}.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "umarkov/ergodicity.hpp"
#include "umarkov/errors.hpp"
#include "umarkov/io.hpp"
#include "umarkov/models.hpp"

namespace umarkov {

struct ModelSpec {
  int sites = 0;
  std::vector<std::pair<int, int>> edges;
  std::string model;
  std::vector<ControlPoint> controls;
  std::vector<std::vector<std::vector<double>>> rates;  // tabular only
};

namespace detail {

inline std::pair<int, int> line_column_of_offset(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

[[noreturn]] inline void schema_error(const std::string& what) {
  throw ParseError("model spec: " + what);
}

}  // namespace detail

inline ModelSpec parse_model_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = detail::line_column_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError("malformed JSON at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " + e.what(),
                     line, col);
  }
  if (!doc.is_object()) detail::schema_error("top level must be an object");

  ModelSpec spec;
  if (!doc.contains("sites") || !doc["sites"].is_number_integer())
    detail::schema_error("'sites' must be an integer");
  spec.sites = doc["sites"].get<int>();

  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) detail::schema_error("'edges' must be an array of [i,j] pairs");
    for (const auto& e : doc["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
        detail::schema_error("each edge must be a pair of integers");
      spec.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }

  if (!doc.contains("model") || !doc["model"].is_string())
    detail::schema_error("'model' must be a string");
  spec.model = doc["model"].get<std::string>();
  if (spec.model != "contact" && spec.model != "ising" && spec.model != "tabular")
    detail::schema_error("'model' must be one of contact, ising, tabular; got '" + spec.model + "'");

  if (!doc.contains("controls") || !doc["controls"].is_array() || doc["controls"].empty())
    detail::schema_error("'controls' must be a non-empty array");
  const char* param_key = spec.model == "contact" ? "lambda" : spec.model == "ising" ? "beta" : nullptr;
  for (const auto& c : doc["controls"]) {
    if (!c.is_object() || !c.contains("label") || !c["label"].is_string())
      detail::schema_error("each control needs a string 'label'");
    ControlPoint p;
    p.label = c["label"].get<std::string>();
    if (param_key != nullptr) {
      if (!c.contains(param_key) || !c[param_key].is_number())
        detail::schema_error("control '" + p.label + "' needs numeric '" + param_key + "'");
      p.value = c[param_key].get<double>();
    }
    spec.controls.push_back(std::move(p));
  }

  if (spec.model == "tabular") {
    if (!doc.contains("rates") || !doc["rates"].is_array())
      detail::schema_error("tabular model needs 'rates' as [control][site][state]");
    for (const auto& per_g : doc["rates"]) {
      if (!per_g.is_array()) detail::schema_error("'rates' must nest [control][site][state]");
      std::vector<std::vector<double>> slice;
      for (const auto& per_x : per_g) {
        if (!per_x.is_array()) detail::schema_error("'rates' must nest [control][site][state]");
        std::vector<double> row;
        for (const auto& v : per_x) {
          if (!v.is_number()) detail::schema_error("rate entries must be numbers");
          row.push_back(v.get<double>());
        }
        slice.push_back(std::move(row));
      }
      spec.rates.push_back(std::move(slice));
    }
  } else if (doc.contains("rates")) {
    detail::schema_error("'rates' is only valid for tabular models");
  }
  return spec;
}

inline ModelSpec load_model_file(const std::string& path) {
  return parse_model_json(read_text_file(path));
}

inline SiteGraph graph_from_spec(const ModelSpec& spec) { return SiteGraph(spec.sites, spec.edges); }

inline SpeedFunction speed_from_spec(const ModelSpec& spec) {
  ControlGrid grid{spec.controls};
  if (spec.model == "contact") return contact_speed(graph_from_spec(spec), grid);
  if (spec.model == "ising") return ising_speed(graph_from_spec(spec), grid);
  SpeedFunction c = tabular_speed(grid, spec.rates);
  if (c.n_sites() != spec.sites)
    throw ShapeError("tabular rates describe " + std::to_string(c.n_sites()) +
                     " sites, spec says " + std::to_string(spec.sites));
  return c;
}

inline std::string verdict_json(const ErgodicityVerdict& verdict) {
  nlohmann::ordered_json doc;
  switch (verdict.status) {
    case CertificationStatus::certified_ergodic: doc["status"] = "certified_ergodic"; break;
    case CertificationStatus::not_certified: doc["status"] = "not_certified"; break;
    case CertificationStatus::failed_precondition: doc["status"] = "failed_precondition"; break;
  }
  if (verdict.mu.has_value()) {
    nlohmann::ordered_json mu = nlohmann::ordered_json::array();
    for (double w : verdict.mu->weights) mu.push_back(w);
    doc["mu"] = std::move(mu);
  } else {
    doc["mu"] = nullptr;
  }
  doc["diagnostics"] = {{"upper_attractive", verdict.diagnostics.upper_attractive},
                        {"lower_attractive", verdict.diagnostics.lower_attractive},
                        {"upper_ergodic", verdict.diagnostics.upper_ergodic},
                        {"lower_ergodic", verdict.diagnostics.lower_ergodic},
                        {"same_invariant", verdict.diagnostics.same_invariant}};
  return doc.dump(2) + "\n";
}

}  // namespace umarkov
