#pragma once

// Multi-trial comparison (success rate, transit time) and QP runtime
// sweeps over the avoidance methods.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmpc/config.hpp"

namespace dmpc {

struct TrialRecord {
  Method method = Method::ondemand_input;
  int n_agents = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  bool collision = false;
  double transit_time = -1.0;
  double min_scaled_distance = 0.0;
  double mean_qp_ms = 0.0;
  double p95_qp_ms = 0.0;
  double mean_cycle_ms = 0.0;
  int resets = 0;
  int qp_failures = 0;
};

struct AggregateRow {
  Method method = Method::ondemand_input;
  int n_agents = 0;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_transit_time = 0.0;  // over successful trials; < 0 if none
  double mean_qp_ms = 0.0;
};

/// Runs every (method, count, trial) on the same seeded scenario per
/// (count, trial). Trials run on `workers` threads; the row order is fixed.
std::vector<TrialRecord> run_compare(const AppConfig& cfg, int workers);
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& rows);

void write_compare_csv(std::ostream& os, const std::vector<TrialRecord>& rows);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);

struct RuntimeRow {
  Method method = Method::ondemand_input;
  int n_agents = 0;
  std::size_t samples = 0;
  double mean_qp_ms = 0.0;
  double std_qp_ms = 0.0;
  double mean_cycle_ms = 0.0;
  double std_cycle_ms = 0.0;
};

/// Per-agent QP solve time against swarm size, one row per (method, count).
std::vector<RuntimeRow> run_runtime(const AppConfig& cfg, int workers);
void write_runtime_csv(std::ostream& os, const std::vector<RuntimeRow>& rows);

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace dmpc
