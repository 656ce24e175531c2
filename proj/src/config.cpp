#include "dmpc/config.hpp"

#include <fstream>
#include <set>

namespace dmpc {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json vec(const Vec3& v) { return ordered_json::array({v(0), v(1), v(2)}); }

Vec3 to_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(where + ": expected an array of three numbers");
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw ConfigError(where + ": expected numbers");
    v(k) = j[k].get<double>();
  }
  return v;
}

// Reads known keys of one object and rejects the rest.
class Section {
 public:
  Section(const json& parent, const std::string& name) : name_(name) {
    if (!parent.contains(name)) return;
    obj_ = &parent.at(name);
    if (!obj_->is_object()) throw ConfigError("'" + name + "' must be an object");
  }
  Section(const json& obj, std::string name, bool) : obj_(&obj), name_(std::move(name)) {
    if (!obj.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return;
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }

  void get(const std::string& key, Vec3& out) {
    seen_.insert(key);
    if (obj_ && obj_->contains(key)) out = to_vec3(obj_->at(key), name_ + "." + key);
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    return obj_ && obj_->contains(key) ? &obj_->at(key) : nullptr;
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
  }

 private:
  const json* obj_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

std::vector<Vec3> points(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of points");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(to_vec3(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace

void BenchmarkSpec::validate() const {
  if (methods.empty()) throw ConfigError("benchmark.methods must not be empty");
  if (counts.empty() || runtime_counts.empty())
    throw ConfigError("benchmark agent counts must not be empty");
  for (int c : counts)
    if (c < 1) throw ConfigError("benchmark.counts entries must be >= 1");
  for (int c : runtime_counts)
    if (c < 1) throw ConfigError("benchmark.runtime_counts entries must be >= 1");
  if (trials < 1 || runtime_trials < 1) throw ConfigError("benchmark trials must be >= 1");
}

void AppConfig::validate() const {
  try {
    planner.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  benchmark.validate();
  const auto& s = scenario;
  if (s.type != "random" && s.type != "hoop" && s.type != "swap" && s.type != "explicit")
    throw ConfigError("scenario.type must be random, hoop, swap or explicit");
  if (s.agents < 1) throw ConfigError("scenario.agents must be >= 1");
  if (s.duration <= 0) throw ConfigError("scenario.duration must be positive");
  if (noise.sigma_p < 0 || noise.sigma_v < 0)
    throw ConfigError("noise levels must be non-negative");
  if (s.sim.goal_tolerance <= 0 || s.sim.envelope_tolerance <= 0)
    throw ConfigError("scenario goal tolerances must be positive");
}

ordered_json to_json(const AppConfig& cfg) {
  const auto& p = cfg.planner;
  const auto& s = cfg.scenario;
  ordered_json j;
  j["model"] = {{"omega_n", p.omega_n}, {"damping", p.damping}};
  j["planner"] = {
      {"method", to_string(p.method)},
      {"h", p.h},
      {"Ts", p.Ts},
      {"K", p.K},
      {"segments", p.segments},
      {"degree", p.degree},
      {"continuity", p.continuity},
      {"kappa", p.kappa},
      {"qk", p.qk},
      {"alphas", p.alphas},
      {"zeta", p.zeta},
      {"xi", p.xi},
      {"acc_limit", p.acc_limit},
      {"limit_workspace", p.limit_workspace},
      {"theta", vec(p.ellipsoid.theta)},
      {"r_min", p.ellipsoid.r_min},
      {"f_min", p.f_min},
      {"f_max", p.f_max},
      {"eps_act", p.eps_act},
      {"replanning", p.replanning},
      {"bvc_radius", p.bvc_radius},
      {"ondemand_shift", p.ondemand_shift},
      {"reset_on_failure", p.reset_on_failure},
      {"qp_tol", p.qp.tol},
      {"qp_max_iter", p.qp.max_iter},
  };
  ordered_json disturbances = ordered_json::array();
  for (const auto& d : s.disturbances)
    disturbances.push_back(
        {{"time", d.time}, {"agent", d.agent}, {"offset", vec(d.offset)}, {"hold", d.hold}});
  ordered_json obstacles = ordered_json::array();
  for (const auto& o : s.obstacles)
    obstacles.push_back({{"center", vec(o.center)},
                         {"theta", vec(o.ellipsoid.theta)},
                         {"r_min", o.ellipsoid.r_min}});
  ordered_json starts = ordered_json::array(), goals = ordered_json::array();
  for (const auto& v : s.starts) starts.push_back(vec(v));
  for (const auto& v : s.goals) goals.push_back(vec(v));
  j["scenario"] = {
      {"type", s.type},
      {"agents", s.agents},
      {"seed", s.seed},
      {"duration", s.duration},
      {"workspace_lo", vec(s.workspace_lo)},
      {"workspace_hi", vec(s.workspace_hi)},
      {"margin", s.margin},
      {"starts", starts},
      {"goals", goals},
      {"obstacles", obstacles},
      {"disturbances", disturbances},
      {"collision_theta", vec(s.sim.collision.theta)},
      {"r_coll", s.sim.collision.r_min},
      {"obstacle_shrink", s.sim.obstacle_shrink},
      {"goal_tolerance", s.sim.goal_tolerance},
      {"envelope_tolerance", s.sim.envelope_tolerance},
      {"settle_hold", s.sim.settle_hold},
      {"stop_on_settle", s.sim.stop_on_settle},
      {"stop_on_collision", s.sim.stop_on_collision},
  };
  j["noise"] = {{"sigma_p", cfg.noise.sigma_p}, {"sigma_v", cfg.noise.sigma_v}};
  std::vector<std::string> methods;
  for (Method m : cfg.benchmark.methods) methods.push_back(to_string(m));
  const auto& b = cfg.benchmark;
  j["benchmark"] = {
      {"methods", methods},
      {"counts", b.counts},
      {"trials", b.trials},
      {"base_seed", b.base_seed},
      {"output_dir", b.output_dir},
      {"runtime_counts", b.runtime_counts},
      {"runtime_trials", b.runtime_trials},
  };
  return j;
}

AppConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (key != "model" && key != "planner" && key != "scenario" && key != "noise" &&
        key != "benchmark")
      throw ConfigError("unknown section '" + key + "'");

  AppConfig cfg;
  auto& p = cfg.planner;
  {
    Section s(j, "model");
    s.get("omega_n", p.omega_n);
    s.get("damping", p.damping);
    s.finish();
  }
  {
    Section s(j, "planner");
    std::string method = to_string(p.method);
    s.get("method", method);
    try {
      p.method = parse_method(method);
    } catch (const InvalidParameter& e) {
      throw ConfigError(std::string("planner.method: ") + e.what());
    }
    s.get("h", p.h);
    s.get("Ts", p.Ts);
    s.get("K", p.K);
    s.get("segments", p.segments);
    s.get("degree", p.degree);
    s.get("continuity", p.continuity);
    s.get("kappa", p.kappa);
    s.get("qk", p.qk);
    s.get("alphas", p.alphas);
    s.get("zeta", p.zeta);
    s.get("xi", p.xi);
    s.get("acc_limit", p.acc_limit);
    s.get("limit_workspace", p.limit_workspace);
    s.get("theta", p.ellipsoid.theta);
    s.get("r_min", p.ellipsoid.r_min);
    s.get("f_min", p.f_min);
    s.get("f_max", p.f_max);
    s.get("eps_act", p.eps_act);
    s.get("replanning", p.replanning);
    s.get("bvc_radius", p.bvc_radius);
    s.get("ondemand_shift", p.ondemand_shift);
    s.get("reset_on_failure", p.reset_on_failure);
    s.get("qp_tol", p.qp.tol);
    s.get("qp_max_iter", p.qp.max_iter);
    s.finish();
  }
  {
    auto& sc = cfg.scenario;
    Section s(j, "scenario");
    s.get("type", sc.type);
    s.get("agents", sc.agents);
    s.get("seed", sc.seed);
    s.get("duration", sc.duration);
    s.get("workspace_lo", sc.workspace_lo);
    s.get("workspace_hi", sc.workspace_hi);
    s.get("margin", sc.margin);
    if (const json* v = s.raw("starts")) sc.starts = points(*v, "scenario.starts");
    if (const json* v = s.raw("goals")) sc.goals = points(*v, "scenario.goals");
    if (const json* v = s.raw("obstacles")) {
      if (!v->is_array()) throw ConfigError("scenario.obstacles must be an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        Obstacle o;
        Section os((*v)[i], "scenario.obstacles[" + std::to_string(i) + "]", true);
        os.get("center", o.center);
        os.get("theta", o.ellipsoid.theta);
        os.get("r_min", o.ellipsoid.r_min);
        os.finish();
        sc.obstacles.push_back(o);
      }
    }
    if (const json* v = s.raw("disturbances")) {
      if (!v->is_array()) throw ConfigError("scenario.disturbances must be an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        Disturbance d;
        Section ds((*v)[i], "scenario.disturbances[" + std::to_string(i) + "]", true);
        ds.get("time", d.time);
        ds.get("agent", d.agent);
        ds.get("offset", d.offset);
        ds.get("hold", d.hold);
        ds.finish();
        sc.disturbances.push_back(d);
      }
    }
    s.get("collision_theta", sc.sim.collision.theta);
    s.get("r_coll", sc.sim.collision.r_min);
    s.get("obstacle_shrink", sc.sim.obstacle_shrink);
    s.get("goal_tolerance", sc.sim.goal_tolerance);
    s.get("envelope_tolerance", sc.sim.envelope_tolerance);
    s.get("settle_hold", sc.sim.settle_hold);
    s.get("stop_on_settle", sc.sim.stop_on_settle);
    s.get("stop_on_collision", sc.sim.stop_on_collision);
    s.finish();
  }
  {
    Section s(j, "noise");
    s.get("sigma_p", cfg.noise.sigma_p);
    s.get("sigma_v", cfg.noise.sigma_v);
    s.finish();
  }
  {
    auto& b = cfg.benchmark;
    Section s(j, "benchmark");
    std::vector<std::string> methods;
    for (Method m : b.methods) methods.push_back(to_string(m));
    s.get("methods", methods);
    b.methods.clear();
    for (const auto& name : methods) {
      try {
        b.methods.push_back(parse_method(name));
      } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("benchmark.methods: ") + e.what());
      }
    }
    s.get("counts", b.counts);
    s.get("trials", b.trials);
    s.get("base_seed", b.base_seed);
    s.get("output_dir", b.output_dir);
    s.get("runtime_counts", b.runtime_counts);
    s.get("runtime_trials", b.runtime_trials);
    s.finish();
  }
  cfg.validate();
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

ScenarioSpec make_scenario(const AppConfig& cfg) {
  const auto& sc = cfg.scenario;
  const auto& e = cfg.planner.ellipsoid;
  ScenarioSpec spec;
  try {
    if (sc.type == "random") {
      spec = random_transition_scenario(sc.agents, sc.seed, e, sc.workspace_lo,
                                        sc.workspace_hi, sc.margin);
      spec.duration = sc.duration;
    } else if (sc.type == "hoop") {
      spec = hoop_scenario(sc.agents, e);
    } else if (sc.type == "swap") {
      require(sc.agents == 2, "swap scenario needs exactly 2 agents");
      spec.name = "swap";
      spec.starts = {Vec3(-1.0, 0.0, 1.0), Vec3(1.0, 0.0, 1.0)};
      spec.goals = {spec.starts[1], spec.starts[0]};
      spec.duration = sc.duration;
    } else {
      spec.name = "explicit";
      spec.starts = sc.starts;
      spec.goals = sc.goals;
      spec.duration = sc.duration;
    }
  } catch (const InvalidParameter& ex) {
    throw ConfigError(ex.what());
  }
  if (sc.type != "random" && sc.type != "hoop") {
    spec.workspace_lo = sc.workspace_lo;
    spec.workspace_hi = sc.workspace_hi;
  }
  spec.seed = sc.seed;
  spec.sigma_p = cfg.noise.sigma_p;
  spec.sigma_v = cfg.noise.sigma_v;
  spec.disturbances = sc.disturbances;
  spec.obstacles.insert(spec.obstacles.end(), sc.obstacles.begin(), sc.obstacles.end());
  try {
    spec.validate(e);
  } catch (const InvalidParameter& ex) {
    throw ConfigError(ex.what());
  }
  return spec;
}

}  // namespace dmpc
