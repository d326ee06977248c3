#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stembed/generators.hpp"

namespace stembed {

inline constexpr int kReportVersion = 1;

struct PipelineConfig {
  InstanceSpec instance;
  double alpha = 0.5;
  int level = 12;
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  double gamma = 2.0;
  std::size_t max_colors = 64;
  bool fill = true;               // realize targets as trees and check the filling lift
  int filling_heights = 4;
  std::size_t measures = 100;     // free-space test measures; 0 skips the stage
  std::uint64_t measure_seed = 7;
  unsigned threads = 1;           // execution detail, not echoed with the config
};

// Strict: unknown keys are a FormatError. Missing keys keep the values in `base`.
PipelineConfig config_from_json(const std::string& text, const PipelineConfig& base = {});
std::string config_to_json(const PipelineConfig& config);

struct Witness {
  std::int64_t sample = -1;  // -1 when the check is not per sample
  std::size_t x = 0, y = 0;
  double value = 0.0, bound = 0.0;
};

struct Certificate {
  std::string name;
  bool ok = true;
  std::size_t checks = 0;
  std::size_t violations = 0;
  double pass_rate = 1.0;
  std::optional<Witness> witness;
};

struct PairRecord {
  std::size_t x = 0, y = 0;
  double distance = 0.0;
  double snowflake = 0.0;  // distance^alpha
  double certified_lower = 0.0;
  double expected_upper = 0.0;
  double min_ratio = 0.0;  // min over samples of image distance / snowflake
  double mean = 0.0;
  double stddev = 0.0;
};

struct StageConstants {
  double gamma = 0.0;
  std::size_t dimension = 0;
  double smallness = 0.0;
  double alpha = 0.0, beta = 0.0;
  int level = 0;
  double assouad_lower = 0.0, assouad_upper = 0.0, unit_scale = 0.0;
  double lipschitz_factor = 0.0, theorem_factor = 0.0;
  double s_composite = 0.0, d_composite = 0.0, s_certified = 0.0;
  double empirical_distortion = 0.0;  // max over pairs of mean / (s_certified d^alpha)
};

struct InstanceSummary {
  std::string kind;
  std::size_t size = 0;
  std::size_t basepoint = 0;
  double diameter = 0.0, min_distance = 0.0;
};

struct PipelineReport {
  int version = kReportVersion;
  PipelineConfig config;
  InstanceSummary instance;
  StageConstants constants;
  std::vector<PairRecord> pairs;
  std::vector<Certificate> certificates;
  unsigned threads = 1;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  bool ok() const;
};

PipelineReport run_pipeline(const PipelineConfig& config);

std::string report_to_json(const PipelineReport& report, bool include_timings = true);
PipelineReport report_from_json(const std::string& text);
std::string report_pairs_csv(const PipelineReport& report);

}  // namespace stembed
