#pragma once

#include "retriever/supervisor.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

namespace retriever {

struct OdrResult {
  std::vector<double> series;  // one value per step
  double final_value = 0.0;
};

/// Discovered fraction after each step: union of detected ids over all objects.
OdrResult odr(const Transcript& t, std::size_t object_count);

struct EpisodeRow {
  std::string scenario;
  std::string category;
  std::uint64_t seed = 0;
  std::string status;
  std::string reason;
  int steps = 0;
  std::vector<int> instruction_steps;
  int reasoner_calls = 0;
  double odr_final = 0.0;
  std::vector<double> odr_series;
  int ged = 0;
  bool ged_exact = true;
};

struct CategoryStats {
  std::string category;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_odr = 0.0;
  double mean_rollout_length = 0.0;
  double mean_ged = 0.0;
};

struct MetricsReport {
  std::vector<EpisodeRow> rows;  // sorted by (category, seed, scenario)
  std::vector<CategoryStats> categories;
  double success_rate = 0.0;
  double mean_odr = 0.0;
  double mean_rollout_length = 0.0;
  double mean_ged = 0.0;
  bool ged_exact = true;
  std::vector<double> mean_odr_series;  // per step, finished episodes hold their final value
};

/// Builds the aggregates from rows in any order.
MetricsReport aggregate(std::vector<EpisodeRow> rows);

nlohmann::json report_json(const MetricsReport& r);
std::string report_csv(const MetricsReport& r);
/// One row per (scenario, step) for plotting.
std::string odr_csv(const MetricsReport& r);

}  // namespace retriever
