#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdqac/autodiff/optim.hpp"
#include "cdqac/dataset.hpp"
#include "cdqac/losses.hpp"
#include "cdqac/nets.hpp"

namespace cdqac {

struct TrainConfig {
  long steps = 200000;
  int batch_size = 256;
  int policy_every = 4;        // eta
  double alpha_cql = 0.05;
  double entropy_coef = 0.005;  // lambda
  double entropy_sign = -1.0;   // -1 rewards entropy in the minimized loss, +1 penalizes it
  double rho = 0.005;
  double gamma = 1.0;
  double lr_critic = 2e-4;
  double lr_actor = 2e-5;
  double grad_clip = 10.0;     // global norm; 0 disables
  bool quantile = true;        // false: one quantile at tau = 0.5
  bool dueling = true;
  bool expected_target = false;  // expectation over pi instead of a sampled a'
  long checkpoint_every = 0;     // 0: final bundle only
  std::uint64_t seed = 1;
  NetConfig net;

  void check() const;
  // Network shape after the ablation switches.
  NetConfig net_config() const;
};

// Parses a config object; unknown keys are rejected. Missing keys keep `base` values.
TrainConfig train_config_from_json_text(const std::string& text, const TrainConfig& base = {});
std::string train_config_to_json_text(const TrainConfig& config);

struct TrainRecord {
  long step = 0;
  double td_loss = 0.0;
  double cql_loss = 0.0;
  double critic_loss = 0.0;
  std::optional<double> policy_loss;
  std::optional<double> entropy;
  double q_mean = 0.0;   // mean Q of dataset actions (twin mean)
  double q_std = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;  // since training start
};

std::string to_jsonl(const TrainRecord& record);

// Trained networks with everything needed to act: config, normalizer, parameters.
struct PolicyBundle {
  TrainConfig config;
  NormStats norm = NormStats::identity();
  std::shared_ptr<Networks> nets;
  long trained_steps = 0;
};

PolicyBundle make_untrained_bundle(const TrainConfig& config, const NormStats& norm);
void save_bundle(const PolicyBundle& bundle, const std::filesystem::path& file);
// Accepts a bundle file or a directory containing bundle.json.
PolicyBundle load_bundle(const std::filesystem::path& path);

// A sampled batch laid out for the networks.
struct TrainBatch {
  BatchGraph graph;
  std::vector<int> data_rows;  // pair row of each state's dataset action
  std::vector<double> rewards;
  std::vector<std::uint8_t> terminal;
  std::vector<const FeatureFrame*> next;  // null where terminal
};

TrainBatch make_train_batch(const std::vector<const FeatureFrame*>& states, const std::vector<int>& actions,
                            const std::vector<double>& rewards, const std::vector<const FeatureFrame*>& next);

// Target quantiles for a batch, computed without recording gradients. For each
// non-terminal row a' is sampled from the actor on s' (or averaged under pi when
// `expected`), and the target heads' per-quantile minimum at a' is bootstrapped.
ad::Matrix compute_td_target(const Networks& nets, const TrainBatch& batch, double gamma, bool expected, Rng& rng);

struct CriticLoss {
  ad::Tensor td;
  ad::Tensor cql;
  ad::Tensor total;
  ad::Tensor z1, z2;  // pairs x N, for logging
};

CriticLoss critic_loss(const Networks& nets, const TrainBatch& batch, const ad::Matrix& target, double alpha_cql);

// Actor objective on detached encoder embeddings with the critics frozen.
PolicyLossParts actor_loss(const Networks& nets, const TrainBatch& batch, double lambda, double entropy_sign);

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // bundle.json, train_log.jsonl, checkpoints/
  std::function<void(const TrainRecord&)> on_step;
};

class Trainer {
 public:
  Trainer(const Dataset& dataset, TrainConfig config);

  // One critic step, plus an actor step when due; then the Polyak update.
  TrainRecord step();
  long steps_done() const { return step_; }
  long actor_updates() const { return actor_updates_; }
  const Networks& nets() const { return *nets_; }
  PolicyBundle bundle() const;

 private:
  const Dataset& dataset_;
  TrainConfig config_;
  std::shared_ptr<Networks> nets_;
  std::vector<std::vector<FeatureFrame>> frames_;  // normalized, per trajectory
  Rng rng_;
  std::unique_ptr<ad::Adam> critic_opt_, actor_opt_;
  long step_ = 0;
  long actor_updates_ = 0;
  double started_ = 0.0;
};

struct TrainResult {
  PolicyBundle bundle;
  std::vector<TrainRecord> log;
  long actor_updates = 0;
};

// Runs config.steps training steps. Throws NumericalError on a non-finite loss.
TrainResult train(const Dataset& dataset, const TrainConfig& config, const TrainOptions& options = {});

}  // namespace cdqac
