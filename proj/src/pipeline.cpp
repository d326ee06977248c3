#include "stembed/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stembed/errors.hpp"
#include "stembed/filling_tree.hpp"
#include "stembed/free_space.hpp"
#include "stembed/parallel.hpp"
#include "stembed/stochastic_ultra.hpp"

namespace stembed {

using json = nlohmann::ordered_json;

namespace {

std::string with_stage(const char* stage, const std::exception& e) {
  return std::string("stage ") + stage + ": " + e.what();
}

// Re-throws with the stage name in front, keeping the error category.
template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ArgumentError& e) {
    throw ArgumentError(with_stage(name, e));
  } catch (const FormatError& e) {
    throw FormatError(with_stage(name, e));
  } catch (const CapacityError& e) {
    throw CapacityError(with_stage(name, e));
  } catch (const ResourceError& e) {
    throw ResourceError(with_stage(name, e));
  } catch (const InconsistencyError& e) {
    throw InconsistencyError(with_stage(name, e));
  } catch (const InternalError& e) {
    throw InternalError(with_stage(name, e));
  }
}

class Clock {
 public:
  explicit Clock(std::vector<std::pair<std::string, double>>& out) : out_(out) {}
  void lap(const char* name) {
    const auto now = std::chrono::steady_clock::now();
    out_.emplace_back(name, std::chrono::duration<double>(now - last_).count());
    last_ = now;
  }

 private:
  std::vector<std::pair<std::string, double>>& out_;
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
      throw FormatError(where + ": unknown field '" + it.key() + "'");
    }
  }
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json instance_to_json(const InstanceSpec& s) {
  return json{{"kind", to_string(s.kind)}, {"count", s.count},   {"radius", s.radius},
              {"rank", s.rank},            {"depth", s.depth},   {"seed", s.seed},
              {"path", s.path},            {"max_points", s.max_points}};
}

InstanceSpec instance_from_json(const json& j, InstanceSpec s) {
  only_keys(j, {"kind", "count", "radius", "rank", "depth", "seed", "path", "max_points"},
            "config.instance");
  if (j.contains("kind")) s.kind = parse_instance_kind(j.at("kind").get<std::string>());
  maybe(j, "count", s.count);
  maybe(j, "radius", s.radius);
  maybe(j, "rank", s.rank);
  maybe(j, "depth", s.depth);
  maybe(j, "seed", s.seed);
  maybe(j, "path", s.path);
  maybe(j, "max_points", s.max_points);
  return s;
}

json config_json(const PipelineConfig& c) {
  return json{{"instance", instance_to_json(c.instance)},
              {"alpha", c.alpha},
              {"level", c.level},
              {"samples", c.samples},
              {"seed", c.seed},
              {"gamma", c.gamma},
              {"max_colors", c.max_colors},
              {"fill", c.fill},
              {"filling_heights", c.filling_heights},
              {"measures", c.measures},
              {"measure_seed", c.measure_seed}};
}

PipelineConfig config_from(const json& j, PipelineConfig c) {
  only_keys(j,
            {"instance", "alpha", "level", "samples", "seed", "gamma", "max_colors", "fill",
             "filling_heights", "measures", "measure_seed"},
            "config");
  if (j.contains("instance")) c.instance = instance_from_json(j.at("instance"), c.instance);
  maybe(j, "alpha", c.alpha);
  maybe(j, "level", c.level);
  maybe(j, "samples", c.samples);
  maybe(j, "seed", c.seed);
  maybe(j, "gamma", c.gamma);
  maybe(j, "max_colors", c.max_colors);
  maybe(j, "fill", c.fill);
  maybe(j, "filling_heights", c.filling_heights);
  maybe(j, "measures", c.measures);
  maybe(j, "measure_seed", c.measure_seed);
  return c;
}

json parse_text(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

void validate(const PipelineConfig& c) {
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ArgumentError("alpha must lie in (0,1)");
  if (c.level < 1 || c.level > kMaxDyadicLevel) {
    throw ArgumentError("level must lie in [1, " + std::to_string(kMaxDyadicLevel) + "]");
  }
  if (c.samples < 1) throw ArgumentError("need at least one sample");
  if (c.filling_heights < 1) throw ArgumentError("need at least one filling height");
  if (c.threads < 1) throw ArgumentError("need at least one thread");
}

// First violation by (sample, pair) order, so the witness is thread-independent.
struct SampleScan {
  std::size_t violations = 0;
  std::optional<Witness> first;
};

}  // namespace

PipelineConfig config_from_json(const std::string& text, const PipelineConfig& base) {
  try {
    return config_from(parse_text(text, "config"), base);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

std::string config_to_json(const PipelineConfig& config) { return config_json(config).dump(2); }

bool PipelineReport::ok() const {
  return std::all_of(certificates.begin(), certificates.end(),
                     [](const Certificate& c) { return c.ok; });
}

PipelineReport run_pipeline(const PipelineConfig& config) {
  validate(config);
  PipelineReport R;
  R.config = config;
  R.threads = config.threads;
  Clock clock(R.timings);
  const unsigned threads = config.threads;

  const FiniteMetricSpace X = stage("generate", [&] { return generate(config.instance); });
  R.instance = {to_string(config.instance.kind), X.size(), X.basepoint(), X.diameter(),
                X.min_distance()};
  clock.lap("generate");

  const auto P = stage("embed", [&] {
    return prepare_snowflake_ultra(X, config.alpha, config.level, config.gamma, config.max_colors);
  });
  auto& K = R.constants;
  K.gamma = P.assouad.gamma;
  K.dimension = P.assouad.max_dimension;
  K.smallness = P.smallness;
  K.alpha = P.alpha;
  K.beta = P.beta;
  K.level = P.level;
  K.assouad_lower = P.assouad.lower_constant;
  K.assouad_upper = P.assouad.sup_upper_constant;
  K.unit_scale = P.assouad.scale;
  K.lipschitz_factor = P.lipschitz_factor;
  K.theorem_factor = P.theorem_factor;
  K.s_composite = P.s_composite;
  K.d_composite = P.d_composite;
  K.s_certified = P.s_certified;
  clock.lap("embed");

  const auto E = stage("sample", [&] { return sample_snowflake_ultra(P, config.samples, config.seed, threads); });
  clock.lap("sample");

  const FiniteMetricSpace Xa = snowflake(X, config.alpha);
  const auto stats = stage("statistics", [&] { return ensemble_statistics(Xa, E, threads); });
  const std::size_t n = X.size();
  R.pairs.reserve(stats.size());
  for (const auto& st : stats) {
    const std::size_t idx = pair_index(n, st.x, st.y);
    R.pairs.push_back({st.x, st.y, X(st.x, st.y), st.distance, P.certified_lower[idx],
                       P.expected_upper[idx], st.min_ratio, st.mean, st.stddev});
    K.empirical_distortion =
        std::max(K.empirical_distortion, st.mean / (P.s_certified * st.distance));
  }

  {
    Certificate c;
    c.name = "noncontractivity";
    std::vector<SampleScan> scans(E.size());
    parallel_for(E.size(), threads, [&](std::size_t i) {
      for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = x + 1; y < n; ++y) {
          const double lower = P.certified_lower[pair_index(n, x, y)];
          const double d = E.samples[i].distance(x, y);
          if (d < lower * (1.0 - 1e-12)) {
            ++scans[i].violations;
            if (!scans[i].first) scans[i].first = Witness{static_cast<std::int64_t>(i), x, y, d, lower};
          }
        }
      }
    });
    std::size_t clean = 0;
    for (const auto& s : scans) {
      c.violations += s.violations;
      if (s.violations == 0) ++clean;
      if (s.first && !c.witness) c.witness = s.first;
    }
    c.checks = E.size() * R.pairs.size();
    c.pass_rate = static_cast<double>(clean) / static_cast<double>(E.size());
    c.ok = c.violations == 0;
    R.certificates.push_back(c);
  }
  {
    Certificate c;
    c.name = "expansion";
    c.checks = R.pairs.size();
    for (const auto& p : R.pairs) {
      if (p.mean > p.expected_upper * (1.0 + 1e-12)) {
        ++c.violations;
        if (!c.witness) c.witness = Witness{-1, p.x, p.y, p.mean, p.expected_upper};
      }
    }
    c.pass_rate = c.checks ? 1.0 - static_cast<double>(c.violations) / static_cast<double>(c.checks) : 1.0;
    c.ok = c.violations == 0;
    R.certificates.push_back(c);
  }
  clock.lap("certificates");

  if (config.fill) {
    Certificate trees;
    trees.name = "tree_realization";
    std::vector<std::string> errors(E.size());
    parallel_for(E.size(), threads, [&](std::size_t i) {
      try {
        realize_tree(*E.samples[i].target);
      } catch (const InconsistencyError& e) {
        errors[i] = e.what();
      }
    });
    trees.checks = E.size();
    for (std::size_t i = 0; i < E.size(); ++i) {
      if (errors[i].empty()) continue;
      ++trees.violations;
      if (!trees.witness) trees.witness = Witness{static_cast<std::int64_t>(i), 0, 0, 0.0, 0.0};
    }
    trees.pass_rate = 1.0 - static_cast<double>(trees.violations) / static_cast<double>(E.size());
    trees.ok = trees.violations == 0;
    R.certificates.push_back(trees);

    const auto lifted = stage("filling", [&] {
      const auto Ef = rescale_log_stochastic(E, 1.0, P.s_certified, 1.0 / config.alpha);
      return verify_filling_lift(X, Ef, config.filling_heights, threads);
    });
    Certificate c;
    c.name = "filling_lift";
    c.checks = lifted.pairs * E.size() + lifted.pairs;
    c.violations = lifted.lower_violations + lifted.upper_violations + lifted.same_base_mismatches;
    c.pass_rate = c.checks ? 1.0 - static_cast<double>(c.violations) / static_cast<double>(c.checks) : 1.0;
    c.ok = lifted.ok();
    if (!c.ok) c.witness = Witness{-1, 0, 0, lifted.max_excess, 2.0 * std::log(lifted.log_distortion)};
    R.certificates.push_back(c);
    clock.lap("filling");
  }

  if (config.measures > 0) {
    const auto rep = stage("free_space", [&] {
      const auto measures = random_test_measures(n, config.measures, config.measure_seed);
      return verify_free_embedding(Xa, E, measures, P.s_certified, threads);
    });
    Certificate c;
    c.name = "free_space";
    c.checks = rep.measures.size();
    c.violations = rep.failures();
    c.pass_rate = c.checks ? 1.0 - static_cast<double>(c.violations) / static_cast<double>(c.checks) : 1.0;
    c.ok = rep.ok();
    for (std::size_t k = 0; k < rep.measures.size(); ++k) {
      const auto& m = rep.measures[k];
      if (m.ok) continue;
      const bool low = m.sample_lower_violations > 0 || m.mean < m.lower - m.slack;
      c.witness = Witness{-1, k, 0, m.mean, low ? m.lower : m.upper};
      break;
    }
    R.certificates.push_back(c);
    clock.lap("free_space");
  }
  return R;
}

std::string report_to_json(const PipelineReport& R, bool include_timings) {
  json j;
  j["format"] = "stembed-report";
  j["version"] = R.version;
  j["config"] = config_json(R.config);
  j["instance"] = {{"kind", R.instance.kind},
                   {"size", R.instance.size},
                   {"basepoint", R.instance.basepoint},
                   {"diameter", R.instance.diameter},
                   {"min_distance", R.instance.min_distance}};
  const auto& K = R.constants;
  j["constants"] = {{"gamma", K.gamma},
                    {"dimension", K.dimension},
                    {"smallness", K.smallness},
                    {"alpha", K.alpha},
                    {"beta", K.beta},
                    {"level", K.level},
                    {"assouad_lower", K.assouad_lower},
                    {"assouad_upper", K.assouad_upper},
                    {"unit_scale", K.unit_scale},
                    {"lipschitz_factor", K.lipschitz_factor},
                    {"theorem_factor", K.theorem_factor},
                    {"s_composite", K.s_composite},
                    {"d_composite", K.d_composite},
                    {"s_certified", K.s_certified},
                    {"empirical_distortion", K.empirical_distortion}};
  json pairs = json::array();
  for (const auto& p : R.pairs) {
    pairs.push_back({{"x", p.x},
                     {"y", p.y},
                     {"distance", p.distance},
                     {"snowflake", p.snowflake},
                     {"certified_lower", p.certified_lower},
                     {"expected_upper", p.expected_upper},
                     {"min_ratio", p.min_ratio},
                     {"mean", p.mean},
                     {"stddev", p.stddev}});
  }
  j["pairs"] = pairs;
  json certs = json::array();
  for (const auto& c : R.certificates) {
    json w = nullptr;
    if (c.witness) {
      w = {{"sample", c.witness->sample},
           {"x", c.witness->x},
           {"y", c.witness->y},
           {"value", c.witness->value},
           {"bound", c.witness->bound}};
    }
    certs.push_back({{"name", c.name},
                     {"ok", c.ok},
                     {"checks", c.checks},
                     {"violations", c.violations},
                     {"pass_rate", c.pass_rate},
                     {"witness", w}});
  }
  j["certificates"] = certs;
  j["seeds"] = {{"instance", R.config.instance.seed},
                {"sampler", R.config.seed},
                {"measures", R.config.measure_seed}};
  if (include_timings) {
    j["execution"] = {{"threads", R.threads}};
    json t = json::object();
    for (const auto& [name, secs] : R.timings) t[name] = secs;
    j["timings"] = t;
  }
  return j.dump(2) + "\n";
}

PipelineReport report_from_json(const std::string& text) {
  const json j = parse_text(text, "report");
  PipelineReport R;
  try {
    only_keys(j, {"format", "version", "config", "instance", "constants", "pairs", "certificates",
                  "seeds", "execution", "timings"},
              "report");
    if (j.at("format").get<std::string>() != "stembed-report") throw FormatError("report: wrong format tag");
    R.version = j.at("version").get<int>();
    if (R.version != kReportVersion) {
      throw FormatError("report: unsupported version " + std::to_string(R.version));
    }
    R.config = config_from(j.at("config"), PipelineConfig{});

    const auto& in = j.at("instance");
    only_keys(in, {"kind", "size", "basepoint", "diameter", "min_distance"}, "report.instance");
    R.instance = {in.at("kind").get<std::string>(), in.at("size").get<std::size_t>(),
                  in.at("basepoint").get<std::size_t>(), in.at("diameter").get<double>(),
                  in.at("min_distance").get<double>()};

    const auto& k = j.at("constants");
    only_keys(k,
              {"gamma", "dimension", "smallness", "alpha", "beta", "level", "assouad_lower",
               "assouad_upper", "unit_scale", "lipschitz_factor", "theorem_factor", "s_composite",
               "d_composite", "s_certified", "empirical_distortion"},
              "report.constants");
    auto& K = R.constants;
    K.gamma = k.at("gamma").get<double>();
    K.dimension = k.at("dimension").get<std::size_t>();
    K.smallness = k.at("smallness").get<double>();
    K.alpha = k.at("alpha").get<double>();
    K.beta = k.at("beta").get<double>();
    K.level = k.at("level").get<int>();
    K.assouad_lower = k.at("assouad_lower").get<double>();
    K.assouad_upper = k.at("assouad_upper").get<double>();
    K.unit_scale = k.at("unit_scale").get<double>();
    K.lipschitz_factor = k.at("lipschitz_factor").get<double>();
    K.theorem_factor = k.at("theorem_factor").get<double>();
    K.s_composite = k.at("s_composite").get<double>();
    K.d_composite = k.at("d_composite").get<double>();
    K.s_certified = k.at("s_certified").get<double>();
    K.empirical_distortion = k.at("empirical_distortion").get<double>();

    for (const auto& p : j.at("pairs")) {
      only_keys(p,
                {"x", "y", "distance", "snowflake", "certified_lower", "expected_upper",
                 "min_ratio", "mean", "stddev"},
                "report.pairs");
      R.pairs.push_back({p.at("x").get<std::size_t>(), p.at("y").get<std::size_t>(),
                         p.at("distance").get<double>(), p.at("snowflake").get<double>(),
                         p.at("certified_lower").get<double>(), p.at("expected_upper").get<double>(),
                         p.at("min_ratio").get<double>(), p.at("mean").get<double>(),
                         p.at("stddev").get<double>()});
    }
    for (const auto& c : j.at("certificates")) {
      only_keys(c, {"name", "ok", "checks", "violations", "pass_rate", "witness"},
                "report.certificates");
      Certificate cert;
      cert.name = c.at("name").get<std::string>();
      cert.ok = c.at("ok").get<bool>();
      cert.checks = c.at("checks").get<std::size_t>();
      cert.violations = c.at("violations").get<std::size_t>();
      cert.pass_rate = c.at("pass_rate").get<double>();
      const auto& w = c.at("witness");
      if (!w.is_null()) {
        only_keys(w, {"sample", "x", "y", "value", "bound"}, "report.certificates.witness");
        cert.witness = Witness{w.at("sample").get<std::int64_t>(), w.at("x").get<std::size_t>(),
                               w.at("y").get<std::size_t>(), w.at("value").get<double>(),
                               w.at("bound").get<double>()};
      }
      R.certificates.push_back(cert);
    }
    const auto& s = j.at("seeds");
    only_keys(s, {"instance", "sampler", "measures"}, "report.seeds");
    if (s.at("instance").get<std::uint64_t>() != R.config.instance.seed ||
        s.at("sampler").get<std::uint64_t>() != R.config.seed ||
        s.at("measures").get<std::uint64_t>() != R.config.measure_seed) {
      throw FormatError("report: seeds disagree with the config");
    }
    if (j.contains("execution")) {
      only_keys(j.at("execution"), {"threads"}, "report.execution");
      R.threads = j.at("execution").at("threads").get<unsigned>();
      R.config.threads = R.threads;
    }
    if (j.contains("timings")) {
      const auto& t = j.at("timings");
      if (!t.is_object()) throw FormatError("report.timings: expected an object");
      for (auto it = t.begin(); it != t.end(); ++it) R.timings.emplace_back(it.key(), it.value().get<double>());
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return R;
}

std::string report_pairs_csv(const PipelineReport& R) {
  auto num = [](double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::ostringstream out;
  out << "x,y,distance,snowflake,certified_lower,expected_upper,min_ratio,mean,stddev\n";
  for (const auto& p : R.pairs) {
    out << p.x << ',' << p.y << ',' << num(p.distance) << ',' << num(p.snowflake) << ','
        << num(p.certified_lower) << ',' << num(p.expected_upper) << ',' << num(p.min_ratio)
        << ',' << num(p.mean) << ',' << num(p.stddev) << '\n';
  }
  return out.str();
}

}  // namespace stembed
