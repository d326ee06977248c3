// Command line front end: instance generation, diagnostics, embedding
// pipelines and free-space checks.
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "stembed/errors.hpp"
#include "stembed/filling_tree.hpp"
#include "stembed/free_space.hpp"
#include "stembed/generators.hpp"
#include "stembed/metric_core.hpp"
#include "stembed/nagata_embed.hpp"
#include "stembed/pipeline.hpp"

using namespace stembed;
using json = nlohmann::ordered_json;

namespace {

constexpr std::size_t kMaxDeltaPoints = 120;

struct Options {
  std::string in, out, format = "json", config, kind;
  std::size_t count = 0, measures = 0;
  double radius = 0.0, alpha = 0.0, gamma = 0.0;
  int rank = 0, depth = 0, level = 0;
  std::size_t samples = 0, max_points = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool no_fill = false;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw ArgumentError("cannot write " + o.out);
  f << text;
}

bool given(CLI::App* app, const char* name) {
  const auto* opt = app->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

// defaults < config file < flags
PipelineConfig resolve(CLI::App* app, const Options& o) {
  PipelineConfig c;
  if (!o.config.empty()) c = config_from_json(read_file(o.config), c);
  auto& s = c.instance;
  if (given(app, "--kind")) s.kind = parse_instance_kind(o.kind);
  if (given(app, "--count")) s.count = o.count;
  if (given(app, "--radius")) s.radius = o.radius;
  if (given(app, "--rank")) s.rank = o.rank;
  if (given(app, "--depth")) s.depth = o.depth;
  if (given(app, "--max-points")) s.max_points = o.max_points;
  if (given(app, "--in")) {
    s.kind = InstanceSpec::Kind::file;
    s.path = o.in;
  }
  if (given(app, "--seed")) {
    s.seed = o.seed;
    c.seed = o.seed;
    c.measure_seed = o.seed + 1;
  }
  if (given(app, "--alpha")) c.alpha = o.alpha;
  if (given(app, "--level")) c.level = o.level;
  if (given(app, "--samples")) c.samples = o.samples;
  if (given(app, "--gamma")) c.gamma = o.gamma;
  if (given(app, "--measures")) c.measures = o.measures;
  if (given(app, "--no-fill")) c.fill = false;
  c.threads = o.threads;
  return c;
}

void add_common(CLI::App* app, Options& o) {
  app->add_option("--in", o.in, "input metric file (.json or .csv)");
  app->add_option("--out", o.out, "output path (stdout if omitted)");
  app->add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "csv"}));
  app->add_option("--seed", o.seed, "random seed");
  app->add_option("--max-points", o.max_points, "instance size cap");
  app->add_option("--config", o.config, "JSON config file (flags override it)");
  app->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
}

void add_instance(CLI::App* app, Options& o) {
  app->add_option("--kind", o.kind, "poincare | free_group_ball | random_ultrametric");
  app->add_option("--count", o.count, "number of points");
  app->add_option("--radius", o.radius, "Euclidean radius of the disk sample");
  app->add_option("--rank", o.rank, "free group rank");
  app->add_option("--depth", o.depth, "ball radius or ultrametric depth");
}

void add_embedding(CLI::App* app, Options& o) {
  app->add_option("--alpha", o.alpha, "snowflake exponent in (0,1)");
  app->add_option("--level", o.level, "dyadic quantization level k");
  app->add_option("--samples", o.samples, "number of sampled maps M");
  app->add_option("--gamma", o.gamma, "cover diameter constant");
}

int run_gen(CLI::App* app, const Options& o) {
  const auto c = resolve(app, o);
  const auto X = generate(c.instance);
  if (o.format == "csv" && X.basepoint() != 0) {
    throw ArgumentError("csv output assumes basepoint 0; use json");
  }
  if (!o.out.empty() && o.out != "-" && !given(app, "--format")) {
    save_metric(X, o.out);
  } else {
    emit(o, o.format == "csv" ? metric_to_csv(X) : metric_to_json(X) + "\n");
  }
  return 0;
}

int run_analyze(const Options& o) {
  if (o.in.empty()) throw ArgumentError("analyze needs --in");
  const auto X = load_metric(o.in);
  json j;
  j["size"] = X.size();
  j["basepoint"] = X.basepoint();
  j["diameter"] = X.diameter();
  j["min_distance"] = X.min_distance();
  const auto tri = find_triangle_violation(X);
  j["triangle"] = !tri.has_value();
  if (X.size() <= kMaxDeltaPoints) {
    j["delta"] = hyperbolicity_delta(X);
  } else {
    j["delta"] = nullptr;
  }
  j["ultrametric"] = is_ultrametric(X, default_metric_tol(X));
  const auto fp = find_four_point_violation(X, default_metric_tol(X));
  j["four_point"] = !fp.has_value();
  if (fp) j["four_point_witness"] = fp->points;

  json scales = json::array();
  if (X.size() >= 2) {
    const auto [lo, hi] = required_scale_range(X);
    for (int e = lo; e <= hi; ++e) {
      const double s = std::ldexp(1.0, e);
      json row{{"exponent", e}, {"scale", s}};
      try {
        const auto cover = build_nagata_cover(X, s);
        const auto check = verify_nagata_cover(X, cover);
        row["members"] = cover.members.size();
        row["dimension"] = cover.dimension;
        row["gamma"] = cover.gamma;
        row["multiplicity"] = check.max_multiplicity;
        row["cover_ok"] = check.ok;
      } catch (const CapacityError&) {
        row["members"] = nullptr;
        row["dimension"] = nullptr;
        row["gamma"] = nullptr;
        row["multiplicity"] = nullptr;
        row["cover_ok"] = false;
      }
      scales.push_back(row);
    }
  }
  j["scales"] = scales;

  std::cout << "points " << X.size() << "  diameter " << X.diameter() << "  min distance "
            << X.min_distance() << "\n";
  std::cout << "triangle inequality: " << (tri ? "violated" : "ok") << "\n";
  if (j["delta"].is_null()) {
    std::cout << "delta: skipped (more than " << kMaxDeltaPoints << " points)\n";
  } else {
    std::cout << "delta: " << j["delta"].get<double>() << "\n";
  }
  std::cout << "ultrametric: " << (j["ultrametric"].get<bool>() ? "true" : "false") << "\n";
  std::cout << "four-point: " << (fp ? "false" : "true");
  if (fp) {
    std::cout << "  witness (" << fp->points[0] << ", " << fp->points[1] << ", " << fp->points[2]
              << ", " << fp->points[3] << ")";
  }
  std::cout << "\n  exp        scale  members  dim  mult  ok\n";
  for (const auto& row : scales) {
    std::cout << "  " << row["exponent"].get<int>() << "  " << row["scale"].get<double>();
    if (row["members"].is_null()) {
      std::cout << "  color cap exceeded\n";
      continue;
    }
    std::cout << "  " << row["members"].get<std::size_t>() << "  "
              << row["dimension"].get<std::size_t>() << "  "
              << row["multiplicity"].get<std::size_t>() << "  "
              << (row["cover_ok"].get<bool>() ? "yes" : "no") << "\n";
  }
  if (!o.out.empty()) {
    if (o.format == "csv") {
      std::ostringstream csv;
      csv << "exponent,scale,members,dimension,multiplicity,cover_ok\n";
      for (const auto& row : scales) {
        csv << row["exponent"].get<int>() << ',' << row["scale"].get<double>() << ','
            << row["members"].dump() << ',' << row["dimension"].dump() << ','
            << row["multiplicity"].dump() << ',' << (row["cover_ok"].get<bool>() ? 1 : 0) << '\n';
      }
      emit(o, csv.str());
    } else {
      emit(o, j.dump(2) + "\n");
    }
  }
  return 0;
}

int run_fill(const Options& o) {
  if (o.in.empty()) throw ArgumentError("fill needs --in");
  const auto X = load_metric(o.in);
  json j;
  j["ultrametric"] = is_ultrametric(X, 0.0);
  bool ok = true;
  if (j["ultrametric"].get<bool>()) {
    const NetHierarchy H(X);
    const auto nodes = H.nodes();
    j["levels"] = {H.bottom_level(), H.top_level()};
    j["nodes"] = nodes.size();
    try {
      const auto bad = find_net_four_point_violation(H, nodes);
      j["net_four_point"] = !bad.has_value();
      ok = !bad.has_value();
    } catch (const ResourceError&) {
      j["net_four_point"] = nullptr;
    }
  }
  const auto T = realize_tree(X);
  j["tree"] = json::parse(tree_to_json(T));
  emit(o, j.dump(2) + "\n");
  return ok ? 0 : 1;
}

int run_freecheck(CLI::App* app, const Options& o) {
  if (o.in.empty()) throw ArgumentError("freecheck needs --in");
  const auto X = load_metric(o.in);
  const std::size_t count = given(app, "--measures") ? o.measures : 200;
  const std::uint64_t seed = given(app, "--seed") ? o.seed : 7;
  const auto measures = random_test_measures(X.size(), count, seed);
  std::optional<WeightedTree> T;
  try {
    T = realize_tree(X);
  } catch (const InconsistencyError&) {
  }
  json rows = json::array();
  bool ok = true;
  double worst = 0.0;
  for (const auto& mu : measures) {
    const auto plan = optimal_transport(X, mu);
    const auto dual = dual_certificate(X, mu, plan);
    json row{{"primal", plan.cost}, {"dual", dual.value}, {"lipschitz", dual.lipschitz}};
    double gap = std::abs(plan.cost - dual.value);
    if (T) {
      const double t = tree_free_norm(*T, mu);
      row["tree"] = t;
      gap = std::max(gap, std::abs(t - plan.cost));
    }
    worst = std::max(worst, gap);
    if (gap > 1e-8 || dual.lipschitz > 1.0 + 1e-9) ok = false;
    rows.push_back(row);
  }
  std::cerr << "measures " << measures.size() << "  tree metric " << (T ? "yes" : "no")
            << "  max gap " << worst << "  " << (ok ? "ok" : "FAILED") << "\n";
  if (o.format == "csv") {
    std::ostringstream csv;
    csv << "primal,dual,lipschitz,tree\n";
    for (const auto& r : rows) {
      csv << r["primal"].get<double>() << ',' << r["dual"].get<double>() << ','
          << r["lipschitz"].get<double>() << ',' << (r.contains("tree") ? r["tree"].dump() : "")
          << '\n';
    }
    emit(o, csv.str());
  } else {
    emit(o, json{{"ok", ok}, {"tree_metric", T.has_value()}, {"max_gap", worst}, {"measures", rows}}
                    .dump(2) +
                "\n");
  }
  return ok ? 0 : 1;
}

int run_pipeline_cmd(CLI::App* app, const Options& o, bool full) {
  auto c = resolve(app, o);
  if (!full) {
    c.fill = false;
    c.measures = 0;
  }
  const auto R = run_pipeline(c);
  emit(o, o.format == "csv" ? report_pairs_csv(R) : report_to_json(R));
  for (const auto& cert : R.certificates) {
    std::cerr << cert.name << ": " << (cert.ok ? "pass" : "FAIL") << " (" << cert.violations
              << " of " << cert.checks << " checks violated)\n";
  }
  return R.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic embeddings of finite metric spaces into trees"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen", "generate an instance metric");
  add_common(gen, o);
  add_instance(gen, o);

  auto* analyze = app.add_subcommand("analyze", "hyperbolicity, ultrametricity and cover diagnostics");
  add_common(analyze, o);

  auto* embed = app.add_subcommand("embed", "cover, Assouad and dyadic sampling stages");
  add_common(embed, o);
  add_instance(embed, o);
  add_embedding(embed, o);

  auto* fill = app.add_subcommand("fill", "net hierarchy and tree realization of a metric");
  add_common(fill, o);

  auto* freecheck = app.add_subcommand("freecheck", "primal/dual free norm checks on a metric");
  add_common(freecheck, o);
  freecheck->add_option("--measures", o.measures, "number of random test measures");

  auto* pipeline = app.add_subcommand("pipeline", "full pipeline with certificates");
  add_common(pipeline, o);
  add_instance(pipeline, o);
  add_embedding(pipeline, o);
  pipeline->add_option("--measures", o.measures, "free-space test measures (0 skips)");
  pipeline->add_flag("--no-fill", o.no_fill, "skip tree realization and the filling check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen(gen, o);
    if (analyze->parsed()) return run_analyze(o);
    if (embed->parsed()) return run_pipeline_cmd(embed, o, false);
    if (fill->parsed()) return run_fill(o);
    if (freecheck->parsed()) return run_freecheck(freecheck, o);
    if (pipeline->parsed()) return run_pipeline_cmd(pipeline, o, true);
  } catch (const ArgumentError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const CapacityError& e) {
    std::cerr << "capacity: " << e.what() << "\n";
    return 3;
  } catch (const ResourceError& e) {
    std::cerr << "resource cap: " << e.what() << "\n";
    return 3;
  } catch (const InconsistencyError& e) {
    std::cerr << "certificate failure: " << e.what() << "\n";
    return 1;
  } catch (const InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
