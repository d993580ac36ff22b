#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rd3g/game_model.hpp"
#include "rd3g/solver.hpp"
#include "rd3g/track.hpp"
#include "rd3g/vehicles.hpp"

namespace rd3g {

enum class ScenarioKind { Merge, Race, Custom };
const char* to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// One explicitly listed car for kind = custom.
struct CustomCar {
  Eigen::Vector4d initial_state = Eigen::Vector4d::Zero();
  Eigen::Vector4d reference = Eigen::Vector4d::Zero();
};

struct TrackConfig {
  double straight_length = 20.0;
  double radius = 8.0;
  double width = 8.0;
};

/// Everything that defines a scenario. Defaults are the shipped settings; the
/// seed fixes all randomness.
struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::Merge;
  int car_count = 3;
  int horizon = 20;
  double dt = 0.1;
  std::uint64_t seed = 1;
  double wheelbase = 2.5;
  double d_min = 2.5;

  // merge
  MergeCostWeights merge_weights;  // reference is filled per car
  double lane_width = 3.5;
  Range initial_speed{4.0, 6.0};
  Range target_speed{4.0, 6.0};
  Range spacing{3.0, 5.0};       // longitudinal gap between consecutive cars in a lane
  Range lane_offset{-2.0, 2.0};  // right-lane shift relative to the left lane
  int max_regenerations = 50;
  double initial_violation_tolerance = 0.0;  // max h at k = 0

  // race
  TrackConfig track;
  RaceCostWeights race_weights;
  int race_horizon = 15;
  Range start_gap{4.0, 6.0};        // arc length between the cars, about one car length
  Range start_lateral{-1.0, 1.0};
  Range fast_speed{6.5, 7.5};
  Range slow_speed{3.5, 4.5};
  double steering_limit = 0.5;
  double accel_limit = 5.0;
  int race_step_cap = 0;  // 0: derived from the track length

  // custom
  std::vector<CustomCar> cars;

  void validate() const;
};

/// The structured config document: scenario plus solver settings.
struct ConfigDocument {
  ScenarioConfig scenario;
  SolverConfig solver;
};

/// Parses a JSON document; unknown keys and malformed values throw ConfigError.
ConfigDocument parse_config(const std::string& text);
ConfigDocument load_config(const std::string& path);
std::string dump_config(const ConfigDocument& doc);

/// Mixes a master seed with indices into an independent seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// Deterministic generator for one seeded sub-stream.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);
  /// Uniform in [lo, hi), platform independent.
  double uniform(const Range& r);
  double uniform(double lo, double hi) { return uniform(Range{lo, hi}); }

 private:
  std::mt19937_64 engine_;
};

struct MergeInstance {
  GameSpec spec;
  std::vector<int> lane;  // 0 left, 1 right
  std::uint64_t sub_seed = 0;
  int regenerations = 0;
};

/// Cars split across two lanes (left gets the extra car); every car targets
/// the left-lane center at its own random speed. Spacings below d_min at
/// k = 0 are regenerated with the next sub-seed. Throws ConfigError when
/// max_regenerations is exhausted.
MergeInstance gen_merge(const ScenarioConfig& cfg);

/// Game with explicitly listed merge-cost cars.
GameSpec build_custom(const ScenarioConfig& cfg);

enum class StartPosition { Front, Rear };
enum class StartSpeed { Fast, Slow };
const char* to_string(StartPosition p);
const char* to_string(StartSpeed s);

/// Two-car race on the stadium track. Car 0 gets the requested start slot
/// and speed class, car 1 the other ones. `progress` is each car's arc
/// length from the start line.
struct RaceSetup {
  std::shared_ptr<const StadiumTrack> track;
  GameSpec spec;
  double progress[2] = {0.0, 0.0};
  int step_cap = 0;
  double d_min = 0.0;
};
RaceSetup gen_race(const ScenarioConfig& cfg, StartPosition car0_position,
                   StartSpeed car0_speed);

/// Game spec for a race from the given joint state. x_1 is fixed by the
/// current state; when it already sits closer than d_min the clearance is
/// shrunk to 99% of that gap so the game stays feasible.
GameSpec race_game(const RaceSetup& setup, const Vec& joint_state);

/// Minimum pairwise position distance over k = 0..T of a trajectory.
double min_pairwise_distance(const GameSpec& spec, const Trajectory& traj);

}  // namespace rd3g
