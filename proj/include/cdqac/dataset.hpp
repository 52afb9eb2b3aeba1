#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdqac/features.hpp"
#include "cdqac/heuristics.hpp"
#include "cdqac/instance.hpp"
#include "cdqac/rng.hpp"
#include "cdqac/sim.hpp"

namespace cdqac {

enum class Recipe { pdr, ga, pdr_ga, random };
std::string to_string(Recipe r);
Recipe parse_recipe(std::string_view text);  // "pdr", "ga", "pdr-ga", "random"

struct BuildOptions {
  Recipe recipe = Recipe::pdr;
  std::uint64_t seed = 1;
  int random_per_instance = 100;
  GaConfig ga;              // seed is overridden per instance
  bool with_features = true;
  int jobs = 1;
};

// One behavior-policy solution with its per-step decision data.
struct Trajectory {
  int instance = 0;
  std::string source;             // e.g. "MWR-SPT", "ga", "random"
  ScheduleTrace trace;
  std::vector<int> actions;       // index into the legal list at each step
  std::vector<int> rewards;
  int makespan = 0;
  std::vector<FeatureFrame> frames;  // raw features of the state before each step; empty if not built

  bool operator==(const Trajectory&) const = default;
};

struct DedupReport {
  long before = 0;
  long after = 0;
  std::vector<int> before_per_instance;
  std::vector<int> after_per_instance;
  bool operator==(const DedupReport&) const = default;
};

struct DatasetManifest {
  Recipe recipe = Recipe::pdr;
  std::uint64_t seed = 0;
  int solutions_per_instance = 0;  // nominal, before dedup
  std::vector<std::string> instance_names;
  DedupReport dedup;
  NormStats norm = NormStats::identity();
  bool has_features = false;
  long trajectories = 0;
  long transitions = 0;
  bool operator==(const DatasetManifest&) const = default;
};

// A (s, a, r, s') record addressed inside its trajectory.
struct Transition {
  int trajectory = 0;
  int step = 0;
  int instance = 0;
  int action = 0;
  double reward = 0.0;
  bool terminal = false;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Instance> instances, std::vector<Trajectory> trajectories, DatasetManifest manifest);

  const std::vector<Instance>& instances() const { return instances_; }
  const std::vector<Trajectory>& trajectories() const { return trajectories_; }
  const DatasetManifest& manifest() const { return manifest_; }
  const NormStats& norm() const { return manifest_.norm; }
  long num_transitions() const { return static_cast<long>(transitions_.size()); }
  const Transition& transition(long i) const { return transitions_.at(static_cast<std::size_t>(i)); }

  // Raw frames; next_state throws on terminal transitions.
  const FeatureFrame& state(const Transition& t) const;
  const FeatureFrame& next_state(const Transition& t) const;

  bool operator==(const Dataset& o) const {
    return instances_ == o.instances_ && trajectories_ == o.trajectories_ && manifest_ == o.manifest_;
  }

 private:
  void index();

  std::vector<Instance> instances_;
  std::vector<Trajectory> trajectories_;
  DatasetManifest manifest_;
  std::vector<Transition> transitions_;
};

// Rolls a complete trace through the simulator and fills actions, rewards, makespan
// and (optionally) frames.
Trajectory record_trajectory(const Instance& instance, int instance_index, const ScheduleTrace& trace,
                             std::string source, bool with_features);

// Behavior solutions of one instance before dedup, in a fixed order.
std::vector<std::pair<std::string, ScheduleTrace>> behavior_solutions(const Instance& instance, Recipe recipe,
                                                                      const BuildOptions& options,
                                                                      std::uint64_t instance_seed);

Dataset build_dataset(const std::vector<Instance>& instances, const BuildOptions& options);

enum class SubsetAxis { instances, solutions };

struct SubsetSpec {
  std::optional<double> fraction;  // in (0, 1]
  std::optional<int> count;        // number of instances, or solutions per instance
  SubsetAxis axis = SubsetAxis::instances;
  std::uint64_t seed = 1;
};

Dataset subset(const Dataset& dataset, const SubsetSpec& spec);

// Unique canonical (state, action) pairs.
long unique_state_actions(const Dataset& dataset);
// u(dataset) / u(reference). Throws ParameterError if the reference has none.
double saco(const Dataset& dataset, const Dataset& reference);

struct MakespanHistogram {
  std::vector<double> values;  // best-in-dataset / makespan per trajectory, in (0, 1]
  std::vector<double> edges;   // bins + 1 edges over [0, 1]
  std::vector<long> counts;
  double q1 = 0.0, median = 0.0, q3 = 0.0;
  double iqr() const { return q3 - q1; }
};

MakespanHistogram makespan_histogram(const Dataset& dataset, int bins = 20);

// Uniform with replacement. Throws ParameterError on an empty dataset or batch size out of range.
std::vector<Transition> sample_batch(const Dataset& dataset, int batch_size, Rng& rng);

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace cdqac
