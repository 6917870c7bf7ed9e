#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/tokenizer.hpp>

#include "polydesc/data_model.hpp"
#include "polydesc/grouping.hpp"

namespace polydesc {

struct RawColumn {
  std::string name;
  bool numeric = true;
  std::vector<double> numbers;      // numeric columns
  std::vector<std::string> labels;  // categorical columns
};

struct RawTable {
  std::vector<RawColumn> columns;
  std::size_t rows = 0;
  // Target column values when one was named at ingest.
  std::optional<std::vector<std::string>> target;
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
  std::vector<std::string> out;
  Tok tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
  for (const auto& f : tok) out.push_back(trim(f));
  return out;
}

inline std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline RawTable ingest(std::istream& in, const std::optional<std::string>& target = std::nullopt) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw std::invalid_argument("empty table: no header row");
  std::optional<std::size_t> target_idx;
  if (target) {
    auto it = std::find(header.begin(), header.end(), *target);
    if (it == header.end()) throw std::invalid_argument("target column '" + *target + "' not found");
    target_idx = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<std::vector<std::string>> cells(header.size());
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("ragged row at line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c].empty() || fields[c] == "?" || fields[c] == "NA") {
        throw std::invalid_argument("missing value in column '" + header[c] + "' at line " + std::to_string(line_no));
      }
      cells[c].push_back(std::move(fields[c]));
    }
    ++rows;
  }
  if (rows == 0) throw std::invalid_argument("empty table: no data rows");

  RawTable t;
  t.rows = rows;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (target_idx && c == *target_idx) {
      t.target = std::move(cells[c]);
      continue;
    }
    RawColumn col;
    col.name = header[c];
    for (const auto& s : cells[c]) {
      auto v = detail::parse_number(s);
      if (!v) {
        col.numeric = false;
        break;
      }
      col.numbers.push_back(*v);
    }
    if (!col.numeric) {
      col.numbers.clear();
      col.labels = std::move(cells[c]);
    }
    t.columns.push_back(std::move(col));
  }
  return t;
}

inline RawTable ingest_file(const std::string& path, const std::optional<std::string>& target = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return ingest(in, target);
}

struct FeatureScale {
  double min = 0.0;
  double max = 1.0;
};

struct EncodedData {
  Dataset data;
  std::vector<FeatureScale> scales;  // one per encoded feature
};

inline EncodedData encode_and_scale(const RawTable& t) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::vector<FeatureScale> scales;
  for (const auto& c : t.columns) {
    if (c.numeric) {
      const auto [lo, hi] = std::minmax_element(c.numbers.begin(), c.numbers.end());
      const double span = *hi - *lo;
      std::vector<double> v(c.numbers.size(), 0.0);
      if (span > 0) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (c.numbers[i] - *lo) / span;
      }
      names.push_back(c.name);
      cols.push_back(std::move(v));
      scales.push_back({*lo, *hi});
    } else {
      // Value order: sorted, so encodings do not depend on row order.
      std::vector<std::string> values(c.labels);
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      for (const auto& val : values) {
        std::vector<double> v(c.labels.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = c.labels[i] == val ? 1.0 : 0.0;
        names.push_back(c.name + "=" + val);
        cols.push_back(std::move(v));
        scales.push_back({0.0, 1.0});
      }
    }
  }
  if (cols.empty()) throw std::invalid_argument("no features remain after encoding");
  std::vector<double> flat;
  flat.reserve(t.rows * cols.size());
  for (std::size_t i = 0; i < t.rows; ++i) {
    for (const auto& c : cols) flat.push_back(c[i]);
  }
  return {Dataset(std::move(flat), t.rows, cols.size(), std::move(names)), std::move(scales)};
}

// Dataset as a numeric table, e.g. to rescale already-scaled data.
inline RawTable to_raw(const Dataset& d) {
  RawTable t;
  t.rows = d.n();
  for (std::size_t j = 0; j < d.m(); ++j) {
    RawColumn c;
    c.name = d.feature_names()[j];
    for (std::size_t i = 0; i < d.n(); ++i) c.numbers.push_back(d.at(i, j));
    t.columns.push_back(std::move(c));
  }
  return t;
}

inline std::vector<int> read_labels(std::istream& in) {
  std::vector<int> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    auto s = detail::trim(line);
    if (s.empty()) continue;
    auto v = detail::parse_number(s);
    if (!v || *v != std::floor(*v)) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw std::invalid_argument("label '" + s + "' is not an integer cluster id");
    }
    first = false;
    out.push_back(static_cast<int>(*v));
  }
  if (out.empty()) throw std::invalid_argument("labels file holds no labels");
  return out;
}

struct KmeansResult {
  std::vector<std::vector<double>> centers;
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
  int restarts = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return s;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline KmeansResult lloyd_once(const Dataset& data, int k, std::mt19937_64& rng) {
  const std::size_t n = data.n(), m = data.m();
  const auto K = static_cast<std::size_t>(k);
  std::vector<std::vector<double>> centers;
  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t first = pick(rng);
  centers.emplace_back(data.row(first).begin(), data.row(first).end());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = sqdist(data.row(i), centers[0]);
  while (centers.size() < K) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total <= 0.0) {
      chosen = pick(rng);
    } else {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (chosen = 0; chosen + 1 < n; ++chosen) {
        r -= d2[chosen];
        if (r < 0.0) break;
      }
    }
    centers.emplace_back(data.row(chosen).begin(), data.row(chosen).end());
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sqdist(data.row(i), centers.back()));
  }

  std::vector<int> labels(n, 0);
  double inertia = 0.0;
  for (int iter = 0; iter < 300; ++iter) {
    inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < K; ++c) {
        const double v = sqdist(data.row(i), centers[c]);
        if (v < best) {
          best = v;
          labels[i] = static_cast<int>(c);
        }
      }
      inertia += best;
    }
    // Repair empty clusters with the point farthest from its center.
    std::vector<std::size_t> count(K, 0);
    for (int l : labels) ++count[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < K; ++c) {
      if (count[c] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[static_cast<std::size_t>(labels[i])] <= 1) continue;
        const double v = sqdist(data.row(i), centers[static_cast<std::size_t>(labels[i])]);
        if (v > far_d) {
          far_d = v;
          far = i;
        }
      }
      --count[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      ++count[c];
    }
    std::vector<std::vector<double>> next(K, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = next[static_cast<std::size_t>(labels[i])];
      for (std::size_t d = 0; d < m; ++d) c[d] += data.at(i, d);
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
      for (std::size_t d = 0; d < m; ++d) next[c][d] /= static_cast<double>(count[c]);
      moved = std::max(moved, std::sqrt(sqdist(next[c], centers[c])));
    }
    centers = std::move(next);
    if (moved < 1e-8) break;
  }
  // Final assignment against the final centers.
  inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < K; ++c) {
      const double v = sqdist(data.row(i), centers[c]);
      if (v < best) {
        best = v;
        labels[i] = static_cast<int>(c);
      }
    }
    inertia += best;
  }
  KmeansResult r;
  r.centers = std::move(centers);
  r.labels = std::move(labels);
  r.inertia = inertia;
  return r;
}

inline std::size_t distinct_rows(const Dataset& data) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < data.n(); ++i) rows.emplace_back(data.row(i).begin(), data.row(i).end());
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

}  // namespace detail

inline KmeansResult kmeans(const Dataset& data, int k, int restarts, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > data.n()) throw std::invalid_argument("k must lie in 2..n");
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (static_cast<std::size_t>(k) > detail::distinct_rows(data)) {
    throw std::invalid_argument("k exceeds the number of distinct points");
  }
  KmeansResult best;
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(detail::splitmix64(seed ^ (0x51ed2701ULL * static_cast<std::uint64_t>(r + 1))));
    KmeansResult cur = detail::lloyd_once(data, k, rng);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  best.restarts = restarts;
  best.seed = seed;
  return best;
}

struct SelectKResult {
  int k = 0;
  ClusterAssignment assignment;
  std::vector<std::pair<int, double>> scores;  // (k, silhouette)
  KmeansResult kmeans;
};

inline SelectKResult select_k(const Dataset& data, std::uint64_t seed, int k_min = 2, int k_max = 10,
                              int restarts = 100) {
  if (data.n() <= 10) throw std::invalid_argument("select_k needs more than 10 points");
  SelectKResult out;
  double best = -std::numeric_limits<double>::infinity();
  const int top = std::min<int>(k_max, static_cast<int>(detail::distinct_rows(data)));
  for (int k = k_min; k <= top; ++k) {
    KmeansResult km = kmeans(data, k, restarts, seed + static_cast<std::uint64_t>(k));
    const double s = silhouette(data, km.labels);
    out.scores.emplace_back(k, s);
    if (s > best) {
      best = s;
      out.k = k;
      out.kmeans = std::move(km);
    }
  }
  if (out.k == 0) throw std::invalid_argument("no admissible k");
  out.assignment = ClusterAssignment::from_raw(out.kmeans.labels);
  return out;
}

}  // namespace polydesc
