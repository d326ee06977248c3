#include "stembed/generators.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "stembed/errors.hpp"
#include "stembed/random.hpp"

namespace stembed {

std::string to_string(InstanceSpec::Kind kind) {
  switch (kind) {
    case InstanceSpec::Kind::poincare: return "poincare";
    case InstanceSpec::Kind::free_group_ball: return "free_group_ball";
    case InstanceSpec::Kind::random_ultrametric: return "random_ultrametric";
    case InstanceSpec::Kind::file: return "file";
  }
  return "unknown";
}

InstanceSpec::Kind parse_instance_kind(const std::string& name) {
  if (name == "poincare") return InstanceSpec::Kind::poincare;
  if (name == "free_group_ball" || name == "free_group") return InstanceSpec::Kind::free_group_ball;
  if (name == "random_ultrametric" || name == "ultrametric") {
    return InstanceSpec::Kind::random_ultrametric;
  }
  if (name == "file") return InstanceSpec::Kind::file;
  throw ArgumentError("unknown instance kind '" + name + "'");
}

FiniteMetricSpace generate(const InstanceSpec& spec) {
  if (spec.kind != InstanceSpec::Kind::free_group_ball && spec.kind != InstanceSpec::Kind::file &&
      spec.count > spec.max_points) {
    throw ResourceError("instance size " + std::to_string(spec.count) + " exceeds cap " +
                        std::to_string(spec.max_points));
  }
  FiniteMetricSpace X = [&] {
    switch (spec.kind) {
      case InstanceSpec::Kind::poincare:
        return poincare_sample(spec.count, spec.radius, spec.seed);
      case InstanceSpec::Kind::free_group_ball:
        return free_group_ball(spec.rank, spec.depth, spec.max_points);
      case InstanceSpec::Kind::random_ultrametric:
        return random_ultrametric(spec.count, spec.depth, spec.seed);
      case InstanceSpec::Kind::file:
        return load_metric(spec.path);
    }
    throw ArgumentError("unknown instance kind");
  }();
  if (X.size() > spec.max_points) {
    throw ResourceError("instance size " + std::to_string(X.size()) + " exceeds cap " +
                        std::to_string(spec.max_points));
  }
  return X;
}

double poincare_distance(const DiskPoint& a, const DiskPoint& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double na = 1.0 - (a[0] * a[0] + a[1] * a[1]);
  const double nb = 1.0 - (b[0] * b[0] + b[1] * b[1]);
  if (!(na > 0.0) || !(nb > 0.0)) throw ArgumentError("point outside the open unit disk");
  // arccosh(1 + 2u^2) = 2 asinh(u); the asinh form keeps precision for close points.
  return 2.0 * std::asinh(std::sqrt((dx * dx + dy * dy) / (na * nb)));
}

FiniteMetricSpace poincare_metric(const std::vector<DiskPoint>& points) {
  const std::size_t n = points.size();
  if (n == 0) throw ArgumentError("need at least one point");
  std::vector<double> d(n * n, 0.0);
  std::size_t base = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double r2 = points[i][0] * points[i][0] + points[i][1] * points[i][1];
    if (r2 < best) {
      best = r2;
      base = i;
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      d[i * n + j] = d[j * n + i] = poincare_distance(points[i], points[j]);
    }
  }
  return FiniteMetricSpace(n, std::move(d), base);
}

std::vector<DiskPoint> poincare_points(std::size_t n, double r, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("sample count must be positive");
  if (!(r > 0.0 && r < 1.0)) throw ArgumentError("disk radius must lie in (0,1)");
  Rng rng(seed);
  std::vector<DiskPoint> pts(n);
  for (auto& p : pts) {
    const double rho = r * std::sqrt(rng.uniform());
    const double angle = 2.0 * std::numbers::pi * rng.uniform();
    p = {rho * std::cos(angle), rho * std::sin(angle)};
  }
  return pts;
}

FiniteMetricSpace poincare_sample(std::size_t n, double r, std::uint64_t seed) {
  return poincare_metric(poincare_points(n, r, seed));
}

std::size_t free_group_ball_size(int rank, int radius) {
  if (rank < 1) throw ArgumentError("free group rank must be positive");
  if (radius < 0) throw ArgumentError("ball radius must be nonnegative");
  const std::size_t cap = std::numeric_limits<std::size_t>::max() / 4;
  std::size_t total = 1;
  std::size_t sphere = 1;
  for (int len = 1; len <= radius; ++len) {
    const std::size_t branch = len == 1 ? 2 * static_cast<std::size_t>(rank)
                                        : 2 * static_cast<std::size_t>(rank) - 1;
    if (sphere > cap / branch) return cap;
    sphere *= branch;
    total += sphere;
    if (total > cap) return cap;
  }
  return total;
}

std::vector<std::vector<int>> free_group_words(int rank, int radius, std::size_t cap) {
  const std::size_t size = free_group_ball_size(rank, radius);
  if (size > cap) {
    throw ResourceError("free group ball of rank " + std::to_string(rank) + " and radius " +
                        std::to_string(radius) + " exceeds size cap " + std::to_string(cap));
  }
  std::vector<std::vector<int>> words{{}};
  words.reserve(size);
  std::size_t begin = 0;
  for (int len = 1; len <= radius; ++len) {
    const std::size_t end = words.size();
    for (std::size_t w = begin; w < end; ++w) {
      for (int letter = 0; letter < 2 * rank; ++letter) {
        if (!words[w].empty() && (words[w].back() ^ 1) == letter) continue;
        auto next = words[w];
        next.push_back(letter);
        words.push_back(std::move(next));
      }
    }
    begin = end;
  }
  return words;
}

FiniteMetricSpace free_group_ball(int rank, int radius, std::size_t cap) {
  if (rank < 2) throw ArgumentError("free group rank must be at least 2");
  const auto words = free_group_words(rank, radius, cap);
  const std::size_t n = words.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& u = words[i];
      const auto& v = words[j];
      std::size_t common = 0;
      while (common < u.size() && common < v.size() && u[common] == v[common]) ++common;
      d[i * n + j] = d[j * n + i] = static_cast<double>(u.size() + v.size() - 2 * common);
    }
  }
  return FiniteMetricSpace(n, std::move(d), 0);
}

FiniteMetricSpace random_ultrametric(std::size_t n, int depth, std::uint64_t seed) {
  if (n == 0) throw ArgumentError("ultrametric needs at least one point");
  if (depth < 1) throw ArgumentError("hierarchy depth must be at least 1");
  Rng rng(seed);
  std::vector<double> level_dist(depth);
  for (int l = 0; l < depth; ++l) level_dist[l] = std::exp(-static_cast<double>(l));
  std::vector<double> d(n * n, 0.0);

  struct Cluster {
    std::vector<std::size_t> members;
    int level;
  };
  std::vector<Cluster> stack;
  stack.push_back({identity_order(n), 0});
  while (!stack.empty()) {
    Cluster c = std::move(stack.back());
    stack.pop_back();
    const std::size_t m = c.members.size();
    if (m <= 1) continue;
    std::vector<std::size_t> group(m);
    std::size_t groups;
    if (c.level == depth - 1) {
      groups = m;
      for (std::size_t i = 0; i < m; ++i) group[i] = i;
    } else if (rng.below(4) == 0) {
      groups = 1;
    } else {
      groups = 2 + rng.below(std::min<std::size_t>(m, 4) - 1);
      for (std::size_t i = m; i > 1; --i) std::swap(c.members[i - 1], c.members[rng.below(i)]);
      for (std::size_t i = 0; i < m; ++i) group[i] = i < groups ? i : rng.below(groups);
    }
    const double dist = level_dist[c.level];
    std::vector<Cluster> children(groups);
    for (std::size_t i = 0; i < m; ++i) {
      children[group[i]].members.push_back(c.members[i]);
      for (std::size_t j = 0; j < i; ++j) {
        if (group[i] != group[j]) {
          const std::size_t a = c.members[i], b = c.members[j];
          d[a * n + b] = d[b * n + a] = dist;
        }
      }
    }
    for (auto& child : children) {
      child.level = c.level + 1;
      stack.push_back(std::move(child));
    }
  }
  return FiniteMetricSpace(n, std::move(d), 0);
}

namespace {

FiniteMetricSpace validated(std::size_t n, std::vector<double> d, std::size_t base) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = d[i * n + j];
      const std::string where =
          " at row " + std::to_string(i) + ", col " + std::to_string(j);
      if (!std::isfinite(v)) throw FormatError("non-finite entry" + where);
      if (v != d[j * n + i]) throw FormatError("asymmetric matrix" + where);
      if (i == j && v != 0.0) throw FormatError("nonzero diagonal" + where);
      if (i != j && v <= 0.0) throw FormatError("nonpositive distance" + where);
    }
  }
  if (base >= n) throw FormatError("basepoint " + std::to_string(base) + " out of range");
  FiniteMetricSpace X(n, std::move(d), base);
  if (auto v = find_triangle_violation(X)) {
    throw FormatError("triangle inequality violated at row " + std::to_string(v->i) +
                      ", col " + std::to_string(v->k) + " via point " + std::to_string(v->j));
  }
  return X;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

FiniteMetricSpace parse_metric_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed metric JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("metric JSON must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "size" && key != "basepoint" && key != "dist") {
      throw FormatError("unknown field '" + key + "' in metric JSON");
    }
  }
  if (!j.contains("size") || !j["size"].is_number_unsigned()) {
    throw FormatError("metric JSON needs a nonnegative integer 'size'");
  }
  const std::size_t n = j["size"].get<std::size_t>();
  if (n == 0) throw FormatError("metric size must be positive");
  std::size_t base = 0;
  if (j.contains("basepoint")) {
    if (!j["basepoint"].is_number_unsigned()) throw FormatError("'basepoint' must be an index");
    base = j["basepoint"].get<std::size_t>();
  }
  if (!j.contains("dist") || !j["dist"].is_array()) throw FormatError("metric JSON needs 'dist'");
  const auto& rows = j["dist"];
  if (rows.size() != n) {
    throw FormatError("'dist' has " + std::to_string(rows.size()) + " rows, expected " +
                      std::to_string(n));
  }
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != n) {
      throw FormatError("row " + std::to_string(i) + " must have " + std::to_string(n) +
                        " entries");
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!rows[i][k].is_number()) {
        throw FormatError("non-numeric entry at row " + std::to_string(i) + ", col " +
                          std::to_string(k));
      }
      d[i * n + k] = rows[i][k].get<double>();
    }
  }
  return validated(n, std::move(d), base);
}

std::string metric_to_json(const FiniteMetricSpace& X) {
  nlohmann::json j;
  j["size"] = X.size();
  j["basepoint"] = X.basepoint();
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < X.size(); ++i) {
    auto r = X.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  j["dist"] = std::move(rows);
  return j.dump() + "\n";
}

FiniteMetricSpace parse_metric_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                       : comma - start);
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      cell = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw FormatError("malformed CSV entry '" + cell + "' at row " +
                          std::to_string(rows.size()) + ", col " + std::to_string(row.size()));
      }
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  const std::size_t n = rows.size();
  if (n == 0) throw FormatError("empty CSV matrix");
  std::vector<double> d;
  d.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) {
      throw FormatError("CSV row " + std::to_string(i) + " has " +
                        std::to_string(rows[i].size()) + " entries, expected " +
                        std::to_string(n));
    }
    d.insert(d.end(), rows[i].begin(), rows[i].end());
  }
  return validated(n, std::move(d), 0);
}

std::string metric_to_csv(const FiniteMetricSpace& X) {
  std::string out;
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t j = 0; j < X.size(); ++j) {
      if (j) out += ',';
      out += format_double(X(i, j));
    }
    out += '\n';
  }
  return out;
}

FiniteMetricSpace load_metric(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open metric file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return ends_with(path, ".csv") ? parse_metric_csv(buf.str()) : parse_metric_json(buf.str());
}

void save_metric(const FiniteMetricSpace& X, const std::string& path) {
  if (ends_with(path, ".csv") && X.basepoint() != 0) {
    throw ArgumentError("CSV metric files assume basepoint 0; use JSON for other basepoints");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write metric file '" + path + "'");
  out << (ends_with(path, ".csv") ? metric_to_csv(X) : metric_to_json(X));
  if (!out) throw FormatError("failed writing metric file '" + path + "'");
}

}  // namespace stembed
