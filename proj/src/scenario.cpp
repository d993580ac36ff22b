#include "rd3g/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace rd3g {

using nlohmann::json;

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Merge: return "merge";
    case ScenarioKind::Race: return "race";
    case ScenarioKind::Custom: return "custom";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "merge") return ScenarioKind::Merge;
  if (s == "race") return ScenarioKind::Race;
  if (s == "custom") return ScenarioKind::Custom;
  throw ConfigError("unknown scenario kind '" + s + "' (merge | race | custom)");
}

const char* to_string(StartPosition p) { return p == StartPosition::Front ? "front" : "rear"; }
const char* to_string(StartSpeed s) { return s == StartSpeed::Fast ? "fast" : "slow"; }

namespace {

void check_range(const Range& r, const char* name, bool allow_point = false) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.hi < r.lo ||
      (!allow_point && r.hi == r.lo))
    throw ConfigError(std::string(name) + " must be a finite range with lo < hi");
}

}  // namespace

void ScenarioConfig::validate() const {
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(wheelbase > 0.0)) throw ConfigError("wheelbase must be positive");
  if (!(d_min > 0.0)) throw ConfigError("d_min must be positive");
  if (!(merge_weights.r.array() > 0).all()) throw ConfigError("merge r weights must be positive");
  if ((merge_weights.q_ref.array() < 0).any() || (merge_weights.q_state.array() < 0).any())
    throw ConfigError("merge state weights must be non-negative");
  switch (kind) {
    case ScenarioKind::Merge:
      if (car_count < 1) throw ConfigError("car_count must be >= 1");
      if (!(lane_width > 0.0)) throw ConfigError("lane_width must be positive");
      check_range(initial_speed, "initial_speed");
      check_range(target_speed, "target_speed");
      check_range(spacing, "spacing");
      check_range(lane_offset, "lane_offset");
      if (max_regenerations < 0) throw ConfigError("max_regenerations must be >= 0");
      break;
    case ScenarioKind::Race:
      if (car_count != 2) throw ConfigError("race scenarios have exactly 2 cars");
      if (race_horizon < 1) throw ConfigError("race horizon must be >= 1");
      check_range(start_gap, "start_gap");
      check_range(start_lateral, "start_lateral");
      check_range(fast_speed, "fast_speed");
      check_range(slow_speed, "slow_speed");
      if (!(steering_limit > 0.0) || !(accel_limit > 0.0))
        throw ConfigError("steering and acceleration limits must be positive");
      if (race_step_cap < 0) throw ConfigError("race step_cap must be >= 0");
      if (!(race_weights.r.array() > 0).all())
        throw ConfigError("race r weights must be positive");
      StadiumTrack(track.straight_length, track.radius, track.width);
      break;
    case ScenarioKind::Custom:
      if (cars.empty()) throw ConfigError("custom scenarios need at least one car");
      if (car_count != static_cast<int>(cars.size()))
        throw ConfigError("car_count must match the number of listed cars");
      break;
  }
}

// -- config document ---------------------------------------------------------

namespace {

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  void number(const char* key, double& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw bad(key, "a number");
    out = v.get<double>();
  }

  void integer(const char* key, int& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw bad(key, "an integer");
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
      throw bad(key, "an integer in range");
    out = static_cast<int>(x);
  }

  void unsigned_integer(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_unsigned()) throw bad(key, "a non-negative integer");
    out = v.get<std::uint64_t>();
  }

  void text(const char* key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw bad(key, "a string");
    out = v.get<std::string>();
  }

  template <int N>
  void vector(const char* key, Eigen::Matrix<double, N, 1>& out) {
    if (!has(key)) return;
    read_array(j_.at(key), key, N, out.data());
  }

  void range(const char* key, Range& out) {
    if (!has(key)) return;
    double v[2];
    read_array(j_.at(key), key, 2, v);
    out = {v[0], v[1]};
  }

  const json* child(const char* key) { return has(key) ? &j_.at(key) : nullptr; }
  std::string path(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key()))
        throw ConfigError("unknown key '" + path_ + "." + item.key() + "'");
  }

 private:
  ConfigError bad(const char* key, const char* what) const {
    return ConfigError(path_ + "." + key + " must be " + what);
  }

  void read_array(const json& v, const char* key, int n, double* out) const {
    if (!v.is_array() || static_cast<int>(v.size()) != n)
      throw bad(key, ("an array of " + std::to_string(n) + " numbers").c_str());
    for (int i = 0; i < n; ++i) {
      if (!v[i].is_number()) throw bad(key, "an array of numbers");
      out[i] = v[i].get<double>();
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_merge_weights(const json& j, const std::string& path, MergeCostWeights& w) {
  ObjectReader r(j, path);
  r.vector("q_ref", w.q_ref);
  r.vector("q_state", w.q_state);
  r.vector("r", w.r);
  r.number("terminal_scale", w.terminal_scale);
  r.finish();
}

void read_race_weights(const json& j, const std::string& path, RaceCostWeights& w) {
  ObjectReader r(j, path);
  r.number("q_lead", w.q_lead);
  r.number("q_lateral", w.q_lateral);
  r.number("q_speed", w.q_speed);
  r.number("q_heading", w.q_heading);
  r.vector("r", w.r);
  r.number("target_speed", w.target_speed);
  r.number("terminal_scale", w.terminal_scale);
  r.finish();
}

void read_scenario(const json& j, ScenarioConfig& c) {
  ObjectReader r(j, "scenario");
  std::string kind = to_string(c.kind);
  r.text("kind", kind);
  c.kind = scenario_kind_from_string(kind);
  r.integer("car_count", c.car_count);
  r.integer("horizon", c.horizon);
  r.number("dt", c.dt);
  r.unsigned_integer("seed", c.seed);
  r.number("wheelbase", c.wheelbase);
  r.number("d_min", c.d_min);

  if (const json* m = r.child("merge")) {
    ObjectReader mr(*m, r.path("merge"));
    if (const json* w = mr.child("weights")) read_merge_weights(*w, mr.path("weights"), c.merge_weights);
    mr.number("lane_width", c.lane_width);
    mr.range("initial_speed", c.initial_speed);
    mr.range("target_speed", c.target_speed);
    mr.range("spacing", c.spacing);
    mr.range("lane_offset", c.lane_offset);
    mr.integer("max_regenerations", c.max_regenerations);
    mr.number("initial_violation_tolerance", c.initial_violation_tolerance);
    mr.finish();
  }
  if (const json* rc = r.child("race")) {
    ObjectReader rr(*rc, r.path("race"));
    if (const json* t = rr.child("track")) {
      ObjectReader tr(*t, rr.path("track"));
      tr.number("straight_length", c.track.straight_length);
      tr.number("radius", c.track.radius);
      tr.number("width", c.track.width);
      tr.finish();
    }
    if (const json* w = rr.child("weights")) read_race_weights(*w, rr.path("weights"), c.race_weights);
    rr.integer("horizon", c.race_horizon);
    rr.range("start_gap", c.start_gap);
    rr.range("start_lateral", c.start_lateral);
    rr.range("fast_speed", c.fast_speed);
    rr.range("slow_speed", c.slow_speed);
    rr.number("steering_limit", c.steering_limit);
    rr.number("accel_limit", c.accel_limit);
    rr.integer("step_cap", c.race_step_cap);
    rr.finish();
  }
  if (const json* cars = r.child("cars")) {
    if (!cars->is_array()) throw ConfigError("scenario.cars must be an array");
    c.cars.clear();
    for (std::size_t i = 0; i < cars->size(); ++i) {
      ObjectReader cr((*cars)[i], "scenario.cars[" + std::to_string(i) + "]");
      CustomCar car;
      cr.vector("initial_state", car.initial_state);
      cr.vector("reference", car.reference);
      cr.finish();
      c.cars.push_back(car);
    }
    if (!j.contains("car_count")) c.car_count = static_cast<int>(c.cars.size());
  }
  r.finish();
}

void read_solver(const json& j, SolverConfig& s) {
  ObjectReader r(j, "solver");
  r.number("eps_tol", s.eps_tol);
  r.number("rho0", s.rho0);
  r.number("kappa", s.kappa);
  r.number("beta_homotopy", s.beta_homotopy);
  r.number("alpha_ls", s.alpha_ls);
  r.number("beta_ls", s.beta_ls);
  r.integer("max_outer_iters", s.max_outer_iters);
  r.integer("max_ls_shrinks", s.max_ls_shrinks);
  r.number("cg_tol", s.cg_tol);
  r.integer("cg_max_iter", s.cg_max_iter);
  r.finish();
}

template <int N>
json array(const Eigen::Matrix<double, N, 1>& v) {
  return json(std::vector<double>(v.data(), v.data() + N));
}

json array(const Range& r) { return json::array({r.lo, r.hi}); }

}  // namespace

ConfigDocument parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ConfigDocument doc;
  ObjectReader top(j, "config");
  if (const json* s = top.child("scenario")) read_scenario(*s, doc.scenario);
  if (const json* s = top.child("solver")) read_solver(*s, doc.solver);
  top.finish();
  doc.scenario.validate();
  doc.solver.validate();
  return doc;
}

ConfigDocument load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string dump_config(const ConfigDocument& doc) {
  const auto& c = doc.scenario;
  const auto& s = doc.solver;
  json cars = json::array();
  for (const auto& car : c.cars)
    cars.push_back({{"initial_state", array(car.initial_state)}, {"reference", array(car.reference)}});
  json j = {
      {"scenario",
       {{"kind", to_string(c.kind)},
        {"car_count", c.car_count},
        {"horizon", c.horizon},
        {"dt", c.dt},
        {"seed", c.seed},
        {"wheelbase", c.wheelbase},
        {"d_min", c.d_min},
        {"merge",
         {{"weights",
           {{"q_ref", array(c.merge_weights.q_ref)},
            {"q_state", array(c.merge_weights.q_state)},
            {"r", array(c.merge_weights.r)},
            {"terminal_scale", c.merge_weights.terminal_scale}}},
          {"lane_width", c.lane_width},
          {"initial_speed", array(c.initial_speed)},
          {"target_speed", array(c.target_speed)},
          {"spacing", array(c.spacing)},
          {"lane_offset", array(c.lane_offset)},
          {"max_regenerations", c.max_regenerations},
          {"initial_violation_tolerance", c.initial_violation_tolerance}}},
        {"race",
         {{"track",
           {{"straight_length", c.track.straight_length},
            {"radius", c.track.radius},
            {"width", c.track.width}}},
          {"weights",
           {{"q_lead", c.race_weights.q_lead},
            {"q_lateral", c.race_weights.q_lateral},
            {"q_speed", c.race_weights.q_speed},
            {"q_heading", c.race_weights.q_heading},
            {"r", array(c.race_weights.r)},
            {"target_speed", c.race_weights.target_speed},
            {"terminal_scale", c.race_weights.terminal_scale}}},
          {"horizon", c.race_horizon},
          {"start_gap", array(c.start_gap)},
          {"start_lateral", array(c.start_lateral)},
          {"fast_speed", array(c.fast_speed)},
          {"slow_speed", array(c.slow_speed)},
          {"steering_limit", c.steering_limit},
          {"accel_limit", c.accel_limit},
          {"step_cap", c.race_step_cap}}},
        {"cars", cars}}},
      {"solver",
       {{"eps_tol", s.eps_tol},
        {"rho0", s.rho0},
        {"kappa", s.kappa},
        {"beta_homotopy", s.beta_homotopy},
        {"alpha_ls", s.alpha_ls},
        {"beta_ls", s.beta_ls},
        {"max_outer_iters", s.max_outer_iters},
        {"max_ls_shrinks", s.max_ls_shrinks},
        {"cg_tol", s.cg_tol},
        {"cg_max_iter", s.cg_max_iter}}}};
  return j.dump(2);
}

// -- randomness ----------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ a) ^ b);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : engine_(derive_seed(seed, stream, 0x5eed)) {}

double Rng::uniform(const Range& r) {
  const double unit = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return r.lo + (r.hi - r.lo) * unit;
}

// -- merge ---------------------------------------------------------------------

namespace {

double max_initial_violation(const GameSpec& spec) {
  double worst = -std::numeric_limits<double>::infinity();
  const int n = spec.state_dim();
  for (int i = 0; i < spec.agent_count(); ++i)
    for (int j = i + 1; j < spec.agent_count(); ++j)
      worst = std::max(worst, spec.constraint->value(spec.initial_state.segment(i * n, n),
                                                     spec.initial_state.segment(j * n, n)));
  return worst;
}

}  // namespace

MergeInstance gen_merge(const ScenarioConfig& cfg) {
  if (cfg.kind != ScenarioKind::Merge) throw ConfigError("gen_merge needs kind = merge");
  cfg.validate();
  const int K = cfg.car_count;
  const int left = (K + 1) / 2;
  auto constraint = std::make_shared<DistanceConstraint>(cfg.d_min);

  for (int attempt = 0; attempt <= cfg.max_regenerations; ++attempt) {
    Rng rng(cfg.seed, attempt);
    MergeInstance inst;
    inst.sub_seed = attempt;
    inst.regenerations = attempt;
    GameSpec& spec = inst.spec;
    spec.horizon = cfg.horizon;
    spec.step_dt = cfg.dt;
    spec.constraint = constraint;
    spec.initial_state = Vec::Zero(K * bicycle::kStateDim);

    // Left lane from the lead car backwards; the right lane starts half a
    // gap behind the left leader, shifted by a random offset.
    double x_left = 0.0;
    double x_right = 0.0;
    for (int i = 0; i < K; ++i) {
      const bool is_left = i < left;
      const int slot = is_left ? i : i - left;
      double x;
      if (is_left) {
        if (slot > 0) x_left -= rng.uniform(cfg.spacing);
        x = x_left;
      } else {
        if (slot == 0)
          x_right = -0.5 * rng.uniform(cfg.spacing) + rng.uniform(cfg.lane_offset);
        else
          x_right -= rng.uniform(cfg.spacing);
        x = x_right;
      }
      const double v0 = rng.uniform(cfg.initial_speed);
      const double v_ref = rng.uniform(cfg.target_speed);
      spec.initial_state.segment<4>(i * 4) << x, is_left ? 0.0 : -cfg.lane_width, v0, 0.0;

      MergeCostWeights w = cfg.merge_weights;
      w.reference << 0.0, 0.0, v_ref, 0.0;
      spec.agents.push_back(std::make_shared<MergeAgent>(i, cfg.dt, cfg.wheelbase, w));
      inst.lane.push_back(is_left ? 0 : 1);
    }
    if (K < 2 || max_initial_violation(spec) <= cfg.initial_violation_tolerance) return inst;
  }
  throw ConfigError("could not generate a merge instance with feasible spacing after " +
                    std::to_string(cfg.max_regenerations + 1) + " attempts");
}

GameSpec build_custom(const ScenarioConfig& cfg) {
  if (cfg.kind != ScenarioKind::Custom) throw ConfigError("build_custom needs kind = custom");
  cfg.validate();
  GameSpec spec;
  spec.horizon = cfg.horizon;
  spec.step_dt = cfg.dt;
  spec.constraint = std::make_shared<DistanceConstraint>(cfg.d_min);
  const int K = static_cast<int>(cfg.cars.size());
  spec.initial_state = Vec::Zero(K * 4);
  for (int i = 0; i < K; ++i) {
    MergeCostWeights w = cfg.merge_weights;
    w.reference = cfg.cars[i].reference;
    spec.initial_state.segment<4>(i * 4) = cfg.cars[i].initial_state;
    spec.agents.push_back(std::make_shared<MergeAgent>(i, cfg.dt, cfg.wheelbase, w));
  }
  spec.validate();
  return spec;
}

// -- race ----------------------------------------------------------------------

RaceSetup gen_race(const ScenarioConfig& cfg, StartPosition car0_position,
                   StartSpeed car0_speed) {
  if (cfg.kind != ScenarioKind::Race) throw ConfigError("gen_race needs kind = race");
  cfg.validate();
  RaceSetup setup;
  auto track = std::make_shared<StadiumTrack>(cfg.track.straight_length, cfg.track.radius,
                                              cfg.track.width);
  setup.track = track;

  Rng rng(cfg.seed, 0);
  const double gap = rng.uniform(cfg.start_gap);
  const int front = car0_position == StartPosition::Front ? 0 : 1;
  const int fast = car0_speed == StartSpeed::Fast ? 0 : 1;
  setup.progress[front] = gap;
  setup.progress[1 - front] = 0.0;

  GameSpec& spec = setup.spec;
  spec.horizon = cfg.race_horizon;
  spec.step_dt = cfg.dt;
  spec.constraint = std::make_shared<DistanceConstraint>(cfg.d_min);
  setup.d_min = cfg.d_min;
  spec.initial_state = Vec::Zero(8);
  for (int c = 0; c < 2; ++c) {
    const double lateral = rng.uniform(cfg.start_lateral);
    const double speed = rng.uniform(c == fast ? cfg.fast_speed : cfg.slow_speed);
    const auto pose = track->pose_at(setup.progress[c], lateral);
    spec.initial_state.segment<4>(c * 4) << pose.position.x(), pose.position.y(), speed,
        pose.heading;
    spec.agents.push_back(
        std::make_shared<RaceAgent>(c, 1 - c, cfg.dt, cfg.wheelbase, track, cfg.race_weights));
  }
  if (cfg.race_step_cap > 0) {
    setup.step_cap = cfg.race_step_cap;
  } else {
    const double slowest = std::max(0.5, std::min(cfg.slow_speed.lo, cfg.race_weights.target_speed));
    setup.step_cap = static_cast<int>(std::ceil(2.0 * track->length() / (slowest * cfg.dt)));
  }
  spec.validate();
  return setup;
}

GameSpec race_game(const RaceSetup& setup, const Vec& joint_state) {
  GameSpec spec = setup.spec;
  spec.initial_state = joint_state;
  // x_1 does not depend on any control, so its gap is what we are stuck with
  Vec next(8);
  for (int c = 0; c < 2; ++c)
    next.segment<4>(c * 4) =
        spec.agents[c]->step(joint_state.segment<4>(c * 4), Vec::Zero(bicycle::kControlDim));
  const double gap = (next.segment<2>(0) - next.segment<2>(4)).norm();
  if (gap < setup.d_min)
    spec.constraint = std::make_shared<DistanceConstraint>(std::max(0.99 * gap, 1e-3));
  return spec;
}

double min_pairwise_distance(const GameSpec& spec, const Trajectory& traj) {
  double best = std::numeric_limits<double>::infinity();
  const int P = spec.participant_count();
  for (int k = 0; k <= spec.horizon; ++k)
    for (int i = 0; i < P; ++i)
      for (int j = i + 1; j < P; ++j) {
        const Vec a = participant_state(spec, traj, i, k);
        const Vec b = participant_state(spec, traj, j, k);
        best = std::min(best, (a.head<2>() - b.head<2>()).norm());
      }
  return best;
}

}  // namespace rd3g
