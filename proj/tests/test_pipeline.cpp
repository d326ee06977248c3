#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "stembed/errors.hpp"
#include "stembed/generators.hpp"
#include "stembed/pipeline.hpp"

using namespace stembed;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("stembed_pipeline_" + name)).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(STEMBED_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.instance.count = 12;
  c.samples = 120;
  c.level = 10;
  c.measures = 20;
  return c;
}

}  // namespace

TEST_CASE("two-point instance end to end") {
  const auto path = temp_path("two.json");
  save_metric(FiniteMetricSpace::from_rows({{0, 2}, {2, 0}}), path);
  PipelineConfig c;
  c.instance.kind = InstanceSpec::Kind::file;
  c.instance.path = path;
  c.samples = 100;
  const auto R = run_pipeline(c);
  CHECK(R.ok());
  CHECK(R.pairs.size() == 1);
  CHECK(R.certificates.size() == 5);
  std::remove(path.c_str());
}

TEST_CASE("free group ball at alpha one half") {
  PipelineConfig c;
  c.instance.kind = InstanceSpec::Kind::free_group_ball;
  c.instance.depth = 3;
  c.samples = 200;
  c.measures = 20;
  const auto R = run_pipeline(c);
  REQUIRE(R.certificates.front().name == "noncontractivity");
  CHECK(R.certificates.front().pass_rate == 1.0);
  CHECK(R.ok());
}

TEST_CASE("reports are deterministic and round-trip") {
  auto c = small_config();
  const auto a = report_to_json(run_pipeline(c), false);
  const auto b = report_to_json(run_pipeline(c), false);
  CHECK(a == b);
  c.threads = 3;
  const auto R3 = run_pipeline(c);
  CHECK(report_to_json(R3, false) == a);
  const auto full = report_to_json(R3);
  const auto back = report_from_json(full);
  CHECK(report_to_json(back) == full);
  CHECK(back.threads == 3);
  CHECK(report_pairs_csv(back) == report_pairs_csv(R3));
  c.seed = 99;
  CHECK(report_to_json(run_pipeline(c), false) != a);

  auto tampered = full;
  tampered.insert(tampered.find('{') + 1, "\"extra\": 1,");
  CHECK_THROWS_AS(report_from_json(tampered), FormatError);
  auto old = full;
  old.replace(old.find("\"version\": 1"), 12, "\"version\": 0");
  CHECK_THROWS_AS(report_from_json(old), FormatError);
  CHECK_THROWS_AS(report_from_json("[]"), FormatError);
}

TEST_CASE("configs") {
  const auto base = small_config();
  const auto c = config_from_json("{\"alpha\": 0.25, \"instance\": {\"count\": 9}}", base);
  CHECK(c.alpha == 0.25);
  CHECK(c.instance.count == 9);
  CHECK(c.samples == base.samples);
  CHECK(config_from_json(config_to_json(c)).samples == c.samples);
  CHECK_THROWS_AS(config_from_json("{\"alpha\": 0.5, \"bogus\": 1}"), FormatError);
  CHECK_THROWS_AS(config_from_json("{\"instance\": {\"bogus\": 1}}"), FormatError);
  CHECK_THROWS_AS(config_from_json("{\"alpha\": \"half\"}"), FormatError);
}

TEST_CASE("stage errors name the stage") {
  auto c = small_config();
  c.instance.count = 30000;
  try {
    run_pipeline(c);
    FAIL("expected a resource error");
  } catch (const ResourceError& e) {
    CHECK(std::string(e.what()).rfind("stage generate:", 0) == 0);
  }
  c = small_config();
  c.max_colors = 1;
  c.instance.count = 40;
  try {
    run_pipeline(c);
    FAIL("expected a capacity error");
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).rfind("stage embed:", 0) == 0);
  }
  c = small_config();
  c.alpha = 1.0;
  CHECK_THROWS_AS(run_pipeline(c), ArgumentError);
}

TEST_CASE("command line") {
  const auto metric = temp_path("ball.json");
  CHECK(cli("gen --kind free_group_ball --depth 2 --out " + metric) == 0);
  CHECK(load_metric(metric).size() == 17);
  CHECK(cli("analyze --in " + metric) == 0);
  CHECK(cli("fill --in " + metric) == 0);
  CHECK(cli("freecheck --in " + metric + " --measures 20") == 0);

  const auto cycle = temp_path("cycle.csv");
  {
    std::ofstream f(cycle);
    f << "0,1,2,1\n1,0,1,2\n2,1,0,1\n1,2,1,0\n";
  }
  CHECK(cli("fill --in " + cycle) == 1);
  CHECK(cli("analyze --in " + temp_path("missing.json")) == 2);
  CHECK(cli("pipeline --alpha 1.5") == 2);
  CHECK(cli("pipeline --bogus") == 2);
  CHECK(cli("gen --count 30000") == 3);

  const auto cfg = temp_path("cfg.json");
  {
    std::ofstream f(cfg);
    f << "{\"samples\": 50, \"measures\": 5, \"level\": 8, \"instance\": {\"count\": 10}}";
  }
  const auto out = temp_path("report.json");
  CHECK(cli("pipeline --config " + cfg + " --samples 30 --out " + out) == 0);
  const auto R = report_from_json(slurp(out));
  CHECK(R.config.samples == 30);
  CHECK(R.config.measures == 5);
  CHECK(R.config.level == 8);
  CHECK(R.config.instance.count == 10);

  const auto csv = temp_path("pairs.csv");
  CHECK(cli("embed --count 8 --samples 20 --format csv --out " + csv) == 0);
  CHECK(slurp(csv).rfind("x,y,distance", 0) == 0);
  for (const auto& p : {metric, cycle, cfg, out, csv}) std::remove(p.c_str());
}
