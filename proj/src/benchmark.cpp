#include "dmpc/benchmark.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

#include "dmpc/parallel.hpp"

namespace dmpc {

namespace {

ScenarioSpec benchmark_scenario(const AppConfig& cfg, int n, int trial) {
  const auto& sc = cfg.scenario;
  ScenarioSpec spec =
      random_transition_scenario(n, trial_seed(cfg.benchmark.base_seed, n, trial),
                                 cfg.planner.ellipsoid, sc.workspace_lo, sc.workspace_hi,
                                 sc.margin);
  spec.duration = sc.duration;
  spec.sigma_p = cfg.noise.sigma_p;
  spec.sigma_v = cfg.noise.sigma_v;
  spec.obstacles = sc.obstacles;
  return spec;
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(sd / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace

std::vector<TrialRecord> run_compare(const AppConfig& cfg, int workers) {
  const auto& b = cfg.benchmark;
  b.validate();
  std::vector<TrialRecord> rows;
  for (Method m : b.methods)
    for (int n : b.counts)
      for (int t = 0; t < b.trials; ++t) {
        TrialRecord r;
        r.method = m;
        r.n_agents = n;
        r.trial = t;
        r.seed = trial_seed(b.base_seed, n, t);
        rows.push_back(r);
      }

  parallel_for(static_cast<int>(rows.size()), workers, [&](int i, int) {
    TrialRecord& r = rows[i];
    PlannerConfig pc = cfg.planner;
    pc.method = r.method;
    SimOptions opt = cfg.scenario.sim;
    opt.workers = 1;
    const RunMetrics m = run_scenario(benchmark_scenario(cfg, r.n_agents, r.trial), pc, opt);
    r.success = m.success;
    r.collision = m.collision;
    r.transit_time = m.success ? m.transit_time : -1.0;
    r.min_scaled_distance = m.min_scaled_distance;
    r.mean_qp_ms = m.mean_qp_ms();
    r.p95_qp_ms = m.p95_qp_ms();
    r.mean_cycle_ms = m.mean_cycle_ms();
    r.resets = m.resets;
    r.qp_failures = m.qp_failures;
  });
  return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& rows) {
  std::vector<AggregateRow> out;
  std::map<std::pair<int, int>, std::size_t> index;
  std::vector<double> transit_sum, qp_sum;
  for (const auto& r : rows) {
    const auto key = std::make_pair(static_cast<int>(r.method), r.n_agents);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      AggregateRow a;
      a.method = r.method;
      a.n_agents = r.n_agents;
      out.push_back(a);
      transit_sum.push_back(0.0);
      qp_sum.push_back(0.0);
    }
    AggregateRow& a = out[it->second];
    ++a.trials;
    qp_sum[it->second] += r.mean_qp_ms;
    if (r.success) {
      ++a.successes;
      transit_sum[it->second] += r.transit_time;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& a = out[k];
    a.success_rate = static_cast<double>(a.successes) / a.trials;
    a.mean_transit_time = a.successes > 0 ? transit_sum[k] / a.successes : -1.0;
    a.mean_qp_ms = qp_sum[k] / a.trials;
  }
  return out;
}

void write_compare_csv(std::ostream& os, const std::vector<TrialRecord>& rows) {
  os << "method,n_agents,trial,seed,success,transit_time_s,min_scaled_dist_m,"
        "mean_qp_ms,p95_qp_ms,resets,mean_cycle_ms,collision,qp_failures\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << r.n_agents << ',' << r.trial << ',' << r.seed << ','
       << (r.success ? 1 : 0) << ',' << std::setprecision(6) << r.transit_time << ','
       << r.min_scaled_distance << ',' << r.mean_qp_ms << ',' << r.p95_qp_ms << ','
       << r.resets << ',' << r.mean_cycle_ms << ',' << (r.collision ? 1 : 0) << ','
       << r.qp_failures << '\n';
  }
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
  os << "method,n_agents,trials,successes,success_rate,mean_transit_time_s,mean_qp_ms\n";
  for (const auto& a : rows)
    os << to_string(a.method) << ',' << a.n_agents << ',' << a.trials << ',' << a.successes
       << ',' << std::setprecision(6) << a.success_rate << ',' << a.mean_transit_time << ','
       << a.mean_qp_ms << '\n';
}

std::vector<RuntimeRow> run_runtime(const AppConfig& cfg, int workers) {
  const auto& b = cfg.benchmark;
  b.validate();
  struct Job {
    Method method;
    int n;
    int trial;
    RunMetrics metrics;
  };
  std::vector<Job> jobs;
  for (int n : b.runtime_counts)
    for (Method m : b.methods)
      for (int t = 0; t < b.runtime_trials; ++t) jobs.push_back({m, n, t, {}});

  // Timing runs share the CPU poorly; only parallelize when asked to.
  parallel_for(static_cast<int>(jobs.size()), workers, [&](int i, int) {
    Job& job = jobs[i];
    PlannerConfig pc = cfg.planner;
    pc.method = job.method;
    SimOptions opt = cfg.scenario.sim;
    opt.workers = 1;
    opt.stop_on_collision = false;
    job.metrics = run_scenario(benchmark_scenario(cfg, job.n, job.trial), pc, opt);
  });

  std::vector<RuntimeRow> out;
  for (int n : b.runtime_counts)
    for (Method m : b.methods) {
      std::vector<double> qp, cycle;
      for (const auto& job : jobs)
        if (job.method == m && job.n == n) {
          qp.insert(qp.end(), job.metrics.qp_ms.begin(), job.metrics.qp_ms.end());
          cycle.insert(cycle.end(), job.metrics.cycle_ms.begin(), job.metrics.cycle_ms.end());
        }
      RuntimeRow r;
      r.method = m;
      r.n_agents = n;
      r.samples = qp.size();
      mean_std(qp, r.mean_qp_ms, r.std_qp_ms);
      mean_std(cycle, r.mean_cycle_ms, r.std_cycle_ms);
      out.push_back(r);
    }
  return out;
}

void write_runtime_csv(std::ostream& os, const std::vector<RuntimeRow>& rows) {
  os << "method,n_agents,samples,mean_qp_ms,std_qp_ms,mean_cycle_ms,std_cycle_ms\n";
  for (const auto& r : rows)
    os << to_string(r.method) << ',' << r.n_agents << ',' << r.samples << ','
       << std::setprecision(6) << r.mean_qp_ms << ',' << r.std_qp_ms << ','
       << r.mean_cycle_ms << ',' << r.std_cycle_ms << '\n';
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

}  // namespace dmpc
