#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "polydesc/data_model.hpp"
#include "polydesc/prep.hpp"

namespace polydesc {

using json = nlohmann::json;

inline json config_to_json(const PdpConfig& c) {
  json j{{"W", c.W},
         {"beta", c.beta},
         {"theta1", c.theta1},
         {"theta2", c.theta2},
         {"kappa", c.kappa},
         {"p", c.p},
         {"epsilon_strict", c.epsilon_strict},
         {"colgen_time_limit_s", c.colgen_time_limit_s},
         {"pricing_time_limit_s", c.pricing_time_limit_s},
         {"max_iterations", c.max_iterations}};
  j["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
  return j;
}

// Description schema: clusters with sparse integer coefficients keyed by
// feature name and thresholds in scaled space; the scaler rides along.
inline json description_to_json(std::span<const Polyhedron> polys, const std::vector<std::string>& names,
                                std::span<const FeatureScale> scales, const json& config = json::object()) {
  json clusters = json::array();
  for (std::size_t k = 0; k < polys.size(); ++k) {
    json hs = json::array();
    for (const auto& h : polys[k].halfspaces) {
      json coeffs = json::object();
      for (std::size_t d = 0; d < h.w.size(); ++d) {
        if (h.w[d] != 0) coeffs[names.at(d)] = h.w[d];
      }
      hs.push_back({{"coeffs", coeffs}, {"rhs", h.b}});
    }
    clusters.push_back({{"id", static_cast<int>(k)}, {"halfspaces", hs}});
  }
  json scaling = json::object();
  for (std::size_t d = 0; d < scales.size(); ++d) {
    scaling[names.at(d)] = {{"min", scales[d].min}, {"max", scales[d].max}};
  }
  return {{"clusters", clusters}, {"scaling", scaling}, {"config", config}};
}

// Polyhedra over the given feature order. Throws on features the data lacks.
inline std::vector<Polyhedron> description_from_json(const json& j, const std::vector<std::string>& names) {
  std::map<std::string, std::size_t> index;
  for (std::size_t d = 0; d < names.size(); ++d) index[names[d]] = d;
  if (!j.contains("clusters") || !j["clusters"].is_array()) {
    throw std::invalid_argument("description JSON lacks a 'clusters' array");
  }
  int max_id = -1;
  for (const auto& c : j["clusters"]) max_id = std::max(max_id, c.at("id").get<int>());
  if (max_id < 0) throw std::invalid_argument("description has no clusters");
  std::vector<Polyhedron> polys(static_cast<std::size_t>(max_id + 1));
  for (const auto& c : j["clusters"]) {
    const int id = c.at("id").get<int>();
    if (id < 0) throw std::invalid_argument("negative cluster id in description");
    for (const auto& hj : c.at("halfspaces")) {
      HalfSpace h;
      h.w.assign(names.size(), 0);
      for (const auto& [feat, v] : hj.at("coeffs").items()) {
        auto it = index.find(feat);
        if (it == index.end()) throw std::invalid_argument("description references feature '" + feat + "' absent from data");
        h.w[it->second] = v.get<int>();
      }
      h.b = hj.at("rhs").get<double>();
      if (h.nnz() == 0) throw std::invalid_argument("description holds a half-space with no coefficients");
      polys[static_cast<std::size_t>(id)].halfspaces.push_back(std::move(h));
    }
  }
  return polys;
}

inline std::vector<FeatureScale> scales_from_json(const json& j, const std::vector<std::string>& names) {
  std::vector<FeatureScale> out;
  if (!j.contains("scaling")) return out;
  for (const auto& n : names) {
    if (!j["scaling"].contains(n)) return {};
    out.push_back({j["scaling"][n].at("min").get<double>(), j["scaling"][n].at("max").get<double>()});
  }
  return out;
}

// Re-expresses data scaled with `fitted` in the recorded scaler's terms.
inline Dataset rescale(const Dataset& data, std::span<const FeatureScale> fitted, std::span<const FeatureScale> recorded) {
  bool same = fitted.size() == recorded.size();
  for (std::size_t d = 0; same && d < fitted.size(); ++d) {
    same = fitted[d].min == recorded[d].min && fitted[d].max == recorded[d].max;
  }
  if (same) return data;
  if (recorded.size() != data.m()) throw std::invalid_argument("recorded scaling does not match the data's features");
  std::vector<double> v(data.values().begin(), data.values().end());
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t d = 0; d < data.m(); ++d) {
      const double raw = fitted[d].min + data.at(i, d) * (fitted[d].max - fitted[d].min);
      const double span = recorded[d].max - recorded[d].min;
      v[i * data.m() + d] = span > 0 ? (raw - recorded[d].min) / span : 0.0;
    }
  }
  return Dataset(std::move(v), data.n(), data.m(), data.feature_names());
}

inline json groups_to_json(std::span<const Group> groups) {
  json arr = json::array();
  for (const auto& g : groups) {
    arr.push_back({{"cluster", g.cluster}, {"members", g.members}, {"low", g.low}, {"high", g.high}});
  }
  return arr;
}

inline std::vector<Group> groups_from_json(const json& j) {
  std::vector<Group> out;
  for (const auto& gj : j) {
    Group g;
    g.cluster = gj.at("cluster").get<int>();
    g.members = gj.at("members").get<std::vector<std::size_t>>();
    g.low = gj.at("low").get<std::vector<double>>();
    g.high = gj.at("high").get<std::vector<double>>();
    if (g.members.empty()) throw std::invalid_argument("group without members");
    out.push_back(std::move(g));
  }
  return out;
}

namespace detail {

inline std::string fmt_num(double v) {
  if (v == 0.0) v = 0.0;  // drop negative zero
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

// "2 a - b <= 0.3"; a single negative term reads as a lower bound,
// e.g. "airborne >= 1".
inline std::string format_halfspace(const HalfSpace& h, const std::vector<std::string>& names) {
  std::vector<std::size_t> support;
  for (std::size_t d = 0; d < h.w.size(); ++d) {
    if (h.w[d] != 0) support.push_back(d);
  }
  bool flip = true;
  for (std::size_t d : support) flip = flip && h.w[d] < 0;
  const int s = flip ? -1 : 1;
  std::string out;
  for (std::size_t t = 0; t < support.size(); ++t) {
    const int c = s * h.w[support[t]];
    if (t == 0) {
      if (c < 0) out += "-";
    } else {
      out += c < 0 ? " - " : " + ";
    }
    if (std::abs(c) != 1) out += std::to_string(std::abs(c)) + " ";
    out += names.at(support[t]);
  }
  out += flip ? " >= " : " <= ";
  out += detail::fmt_num(s * h.b);
  return out;
}

inline int log_level() {
  const char* v = std::getenv("POLYDESC_LOG");
  if (!v || !*v) return 0;
  return std::atoi(v);
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace polydesc
