// dmpc: simulate | compare | bench-runtime | dump-config
//
// Exit codes: 0 success, 1 task failure (run finished but the transition
// failed), 2 usage or configuration error.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmpc/benchmark.hpp"
#include "dmpc/config.hpp"
#include "dmpc/parallel.hpp"

namespace fs = std::filesystem;
using namespace dmpc;

namespace {

constexpr int kOk = 0;
constexpr int kTaskFailed = 1;
constexpr int kUsage = 2;

struct CommonFlags {
  std::string config;
  std::vector<std::string> methods;
  std::string out = "results";
};

AppConfig base_config(const CommonFlags& f) {
  AppConfig cfg = f.config.empty() ? AppConfig{} : load_config(f.config);
  if (!f.methods.empty()) {
    cfg.benchmark.methods.clear();
    for (const auto& m : f.methods) cfg.benchmark.methods.push_back(parse_method(m));
  }
  return cfg;
}

std::string metrics_csv(const ScenarioSpec& spec, const PlannerConfig& pc, const RunMetrics& m) {
  std::ostringstream os;
  os << "method,n_agents,seed,success,collision,failure_reason,transit_time_s,"
        "envelope_time_s,min_scaled_dist_m,mean_qp_ms,p95_qp_ms,resets,mean_cycle_ms,"
        "qp_failures,cycles,max_continuity_gap_m\n";
  os << std::setprecision(8) << to_string(pc.method) << ',' << spec.agents() << ','
     << spec.seed << ',' << (m.success ? 1 : 0) << ',' << (m.collision ? 1 : 0) << ','
     << m.failure_reason << ',' << m.transit_time << ',' << m.envelope_time << ','
     << m.min_scaled_distance << ',' << m.mean_qp_ms() << ',' << m.p95_qp_ms() << ','
     << m.resets << ',' << m.mean_cycle_ms() << ',' << m.qp_failures << ',' << m.cycles
     << ',' << m.max_continuity_gap << '\n';
  return os.str();
}

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

struct SimulateFlags {
  std::optional<std::string> scenario;
  std::optional<int> agents;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<double> duration;
  bool no_trajectory = false;
};

int cmd_simulate(const CommonFlags& common, const SimulateFlags& f) {
  AppConfig cfg = base_config(common);
  auto& sc = cfg.scenario;
  if (f.scenario) sc.type = *f.scenario;
  if (f.agents) sc.agents = *f.agents;
  if (f.seed) sc.seed = *f.seed;
  if (f.duration) sc.duration = *f.duration;
  if (f.method) cfg.planner.method = parse_method(*f.method);
  cfg.validate();

  const ScenarioSpec spec = make_scenario(cfg);
  SimOptions opt = sc.sim;
  opt.record_trajectory = !f.no_trajectory;
  opt.workers = default_workers();
  const RunMetrics m = run_scenario(spec, cfg.planner, opt);

  PlannerConfig effective = cfg.planner;
  if (spec.xi) effective.xi = *spec.xi;
  const std::string dir = common.out;
  if (opt.record_trajectory)
    write_file_atomic(dir + "/trajectory.csv",
                      render([&](std::ostream& os) { write_trajectory_csv(os, m); }));
  write_file_atomic(dir + "/metrics.csv", metrics_csv(spec, effective, m));
  write_file_atomic(dir + "/envelope.csv",
                    render([&](std::ostream& os) { write_envelope_csv(os, m); }));
  if (!spec.obstacles.empty())
    write_file_atomic(dir + "/obstacles.csv",
                      render([&](std::ostream& os) { write_obstacles_csv(os, spec); }));
  const std::string summary =
      render([&](std::ostream& os) { write_summary(os, spec, effective, m); });
  write_file_atomic(dir + "/summary.txt", summary);
  std::cout << summary << "outputs in " << dir << '\n';
  return m.success ? kOk : kTaskFailed;
}

struct SweepFlags {
  std::vector<int> counts;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
};

void apply_sweep(AppConfig& cfg, const SweepFlags& f, bool runtime) {
  auto& b = cfg.benchmark;
  if (!f.counts.empty()) (runtime ? b.runtime_counts : b.counts) = f.counts;
  if (f.trials) (runtime ? b.runtime_trials : b.trials) = *f.trials;
  if (f.seed) b.base_seed = *f.seed;
  cfg.validate();
}

int cmd_compare(const CommonFlags& common, const SweepFlags& f) {
  AppConfig cfg = base_config(common);
  apply_sweep(cfg, f, false);
  const auto rows = run_compare(cfg, default_workers());
  const auto agg = aggregate(rows);
  write_file_atomic(common.out + "/compare.csv",
                    render([&](std::ostream& os) { write_compare_csv(os, rows); }));
  const std::string table =
      render([&](std::ostream& os) { write_aggregate_csv(os, agg); });
  write_file_atomic(common.out + "/compare_aggregate.csv", table);
  std::cout << table << "outputs in " << common.out << '\n';
  return kOk;
}

int cmd_bench_runtime(const CommonFlags& common, const SweepFlags& f) {
  AppConfig cfg = base_config(common);
  apply_sweep(cfg, f, true);
  // Timing is only meaningful without CPU contention, so one worker unless
  // DMPC_WORKERS says otherwise.
  const int workers = std::getenv("DMPC_WORKERS") ? default_workers() : 1;
  const auto rows = run_runtime(cfg, workers);
  const std::string table = render([&](std::ostream& os) { write_runtime_csv(os, rows); });
  write_file_atomic(common.out + "/runtime.csv", table);
  std::cout << table << "outputs in " << common.out << '\n';
  return kOk;
}

int cmd_dump_config(const CommonFlags& common) {
  std::cout << to_json(base_config(common)).dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DMPC trajectory generation and swarm simulation"};
  app.require_subcommand(1);

  CommonFlags common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "JSON configuration file");
    sub->add_option("-o,--out", common.out, "output directory");
  };
  auto add_methods = [&](CLI::App* sub) {
    sub->add_option("--methods", common.methods,
                    "methods to run (bvc, bvc-soft, ondemand-state, ondemand-input)");
  };

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "run one scenario");
  add_common(simulate);
  simulate->add_option("--scenario", sim.scenario, "random | hoop | swap | explicit");
  simulate->add_option("-n,--agents", sim.agents, "number of agents");
  simulate->add_option("--seed", sim.seed, "scenario and noise seed");
  simulate->add_option("-m,--method", sim.method, "avoidance method");
  simulate->add_option("--duration", sim.duration, "simulated seconds");
  simulate->add_flag("--no-trajectory", sim.no_trajectory, "skip trajectory.csv");

  SweepFlags sweep;
  auto* compare = app.add_subcommand("compare", "success rate and transit time sweep");
  add_common(compare);
  add_methods(compare);
  compare->add_option("--counts", sweep.counts, "agent counts");
  compare->add_option("--trials", sweep.trials, "trials per count");
  compare->add_option("--seed", sweep.seed, "base seed");

  auto* runtime = app.add_subcommand("bench-runtime", "per-agent QP solve time sweep");
  add_common(runtime);
  add_methods(runtime);
  runtime->add_option("--counts", sweep.counts, "agent counts");
  runtime->add_option("--trials", sweep.trials, "trials per count");
  runtime->add_option("--seed", sweep.seed, "base seed");

  auto* dump = app.add_subcommand("dump-config", "print the effective configuration");
  dump->add_option("-c,--config", common.config, "JSON configuration file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(common, sim);
    if (*compare) return cmd_compare(common, sweep);
    if (*runtime) return cmd_bench_runtime(common, sweep);
    return cmd_dump_config(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidParameter& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kTaskFailed;
  }
}
