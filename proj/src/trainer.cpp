#include "cdqac/trainer.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "cdqac/errors.hpp"
#include "json_io.hpp"

namespace cdqac {

using ad::Matrix;
using ad::Tensor;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

void TrainConfig::check() const {
  if (steps < 0) throw ParameterError("steps must be >= 0");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (policy_every < 1) throw ParameterError("policy_every (eta) must be >= 1");
  if (!(alpha_cql >= 0.0)) throw ParameterError("alpha_cql must be >= 0");
  if (!(entropy_coef >= 0.0)) throw ParameterError("entropy_coef must be >= 0");
  if (entropy_sign != 1.0 && entropy_sign != -1.0) throw ParameterError("entropy_sign must be +1 or -1");
  if (!(rho > 0.0 && rho <= 1.0)) throw ParameterError("rho must be in (0, 1]");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ParameterError("gamma must be in [0, 1]");
  if (!(lr_critic > 0.0) || !(lr_actor > 0.0)) throw ParameterError("learning rates must be positive");
  if (!(grad_clip >= 0.0)) throw ParameterError("grad_clip must be >= 0");
  if (checkpoint_every < 0) throw ParameterError("checkpoint_every must be >= 0");
  net_config().check();
}

NetConfig TrainConfig::net_config() const {
  NetConfig n = net;
  n.dueling = dueling;
  if (!quantile) n.num_quantiles = 1;
  return n;
}

namespace {

Json config_json(const TrainConfig& c) {
  return Json{{"steps", c.steps},
              {"batch_size", c.batch_size},
              {"policy_every", c.policy_every},
              {"alpha_cql", c.alpha_cql},
              {"entropy_coef", c.entropy_coef},
              {"entropy_sign", c.entropy_sign},
              {"rho", c.rho},
              {"gamma", c.gamma},
              {"lr_critic", c.lr_critic},
              {"lr_actor", c.lr_actor},
              {"grad_clip", c.grad_clip},
              {"quantile", c.quantile},
              {"dueling", c.dueling},
              {"expected_target", c.expected_target},
              {"checkpoint_every", c.checkpoint_every},
              {"seed", c.seed},
              {"num_quantiles", c.net.num_quantiles},
              {"layers", c.net.layers},
              {"heads", c.net.heads},
              {"hidden_dim", c.net.hidden_dim},
              {"out_dim", c.net.out_dim},
              {"mlp_width", c.net.mlp_width},
              {"mlp_hidden_layers", c.net.mlp_hidden_layers}};
}

TrainConfig config_from(const Json& j, TrainConfig c) {
  if (!j.is_object()) throw ParseError(0, "train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "steps") value.get_to(c.steps);
    else if (key == "batch_size") value.get_to(c.batch_size);
    else if (key == "policy_every") value.get_to(c.policy_every);
    else if (key == "alpha_cql") value.get_to(c.alpha_cql);
    else if (key == "entropy_coef") value.get_to(c.entropy_coef);
    else if (key == "entropy_sign") value.get_to(c.entropy_sign);
    else if (key == "rho") value.get_to(c.rho);
    else if (key == "gamma") value.get_to(c.gamma);
    else if (key == "lr_critic") value.get_to(c.lr_critic);
    else if (key == "lr_actor") value.get_to(c.lr_actor);
    else if (key == "grad_clip") value.get_to(c.grad_clip);
    else if (key == "quantile") value.get_to(c.quantile);
    else if (key == "dueling") value.get_to(c.dueling);
    else if (key == "expected_target") value.get_to(c.expected_target);
    else if (key == "checkpoint_every") value.get_to(c.checkpoint_every);
    else if (key == "seed") value.get_to(c.seed);
    else if (key == "num_quantiles") value.get_to(c.net.num_quantiles);
    else if (key == "layers") value.get_to(c.net.layers);
    else if (key == "heads") value.get_to(c.net.heads);
    else if (key == "hidden_dim") value.get_to(c.net.hidden_dim);
    else if (key == "out_dim") value.get_to(c.net.out_dim);
    else if (key == "mlp_width") value.get_to(c.net.mlp_width);
    else if (key == "mlp_hidden_layers") value.get_to(c.net.mlp_hidden_layers);
    else throw ParameterError("unknown train config key '" + key + "'");
  }
  c.check();
  return c;
}

}  // namespace

TrainConfig train_config_from_json_text(const std::string& text, const TrainConfig& base) {
  try {
    return config_from(Json::parse(text), base);
  } catch (const Json::exception& e) {
    throw ParseError(0, std::string("train config: ") + e.what());
  }
}

std::string train_config_to_json_text(const TrainConfig& config) { return config_json(config).dump(2); }

std::string to_jsonl(const TrainRecord& r) {
  Json j{{"step", r.step},       {"td_loss", r.td_loss}, {"cql_loss", r.cql_loss},   {"critic_loss", r.critic_loss},
         {"q_mean", r.q_mean},   {"q_std", r.q_std},     {"grad_norm", r.grad_norm}, {"seconds", r.seconds}};
  j["policy_loss"] = r.policy_loss ? Json(*r.policy_loss) : Json(nullptr);
  j["entropy"] = r.entropy ? Json(*r.entropy) : Json(nullptr);
  return j.dump();
}

PolicyBundle make_untrained_bundle(const TrainConfig& config, const NormStats& norm) {
  config.check();
  PolicyBundle b;
  b.config = config;
  b.norm = norm;
  b.nets = std::make_shared<Networks>(config.net_config(), config.seed);
  return b;
}

namespace {

constexpr const char* kBundleFormat = "cdqac-bundle";
constexpr int kBundleVersion = 1;

}  // namespace

void save_bundle(const PolicyBundle& bundle, const std::filesystem::path& file) {
  Json params = Json::object();
  for (const auto& [name, store] : std::as_const(*bundle.nets).stores()) {
    Json list = Json::array();
    for (const auto& e : store->entries()) {
      const Matrix& v = e.tensor.value();
      list.push_back({{"name", e.name},
                      {"shape", {v.rows(), v.cols()}},
                      {"values", std::vector<double>(v.data(), v.data() + v.size())}});
    }
    params[name] = list;
  }
  Json j{{"format", kBundleFormat},
         {"version", kBundleVersion},
         {"config", config_json(bundle.config)},
         {"norm", to_json(bundle.norm)},
         {"trained_steps", bundle.trained_steps},
         {"params", params}};
  write_text(file, j.dump() + "\n");
}

PolicyBundle load_bundle(const std::filesystem::path& path) {
  const auto file = std::filesystem::is_directory(path) ? path / "bundle.json" : path;
  try {
    const Json j = Json::parse(read_text(file));
    if (require(j, "format").get<std::string>() != kBundleFormat) throw ParseError(0, "not a policy bundle");
    if (require(j, "version").get<int>() != kBundleVersion) throw ParseError(0, "unsupported bundle version");
    PolicyBundle b = make_untrained_bundle(config_from(require(j, "config"), TrainConfig{}),
                                           norm_from_json(require(j, "norm")));
    b.trained_steps = require(j, "trained_steps").get<long>();
    const Json& params = require(j, "params");
    for (auto& [name, store] : b.nets->stores()) {
      const Json& list = require(params, name.c_str());
      if (list.size() != store->entries().size()) throw ParseError(0, "parameter count mismatch in " + name);
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& e = store->entries()[i];
        const auto& rec = list[i];
        const auto shape = require(rec, "shape").get<std::vector<long>>();
        const auto values = require(rec, "values").get<std::vector<double>>();
        Matrix& v = e.tensor.node()->value;
        if (require(rec, "name").get<std::string>() != e.name || shape.size() != 2 || shape[0] != v.rows() ||
            shape[1] != v.cols() || static_cast<long>(values.size()) != v.size()) {
          throw ParseError(0, "parameter " + e.name + " does not match the configured network");
        }
        std::copy(values.begin(), values.end(), v.data());
      }
    }
    return b;
  } catch (const Json::exception& e) {
    throw ParseError(0, std::string("bundle: ") + e.what());
  }
}

TrainBatch make_train_batch(const std::vector<const FeatureFrame*>& states, const std::vector<int>& actions,
                            const std::vector<double>& rewards, const std::vector<const FeatureFrame*>& next) {
  if (states.size() != actions.size() || states.size() != rewards.size() || states.size() != next.size()) {
    throw ContractViolation("make_train_batch: field lengths differ");
  }
  TrainBatch b;
  b.graph = make_batch(states);
  b.rewards = rewards;
  b.next = next;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (actions[i] < 0 || actions[i] >= states[i]->num_pairs) throw ContractViolation("action index out of range");
    b.data_rows.push_back(b.graph.pair_offset[i] + actions[i]);
    b.terminal.push_back(next[i] == nullptr ? 1 : 0);
  }
  return b;
}

Matrix compute_td_target(const Networks& nets, const TrainBatch& batch, double gamma, bool expected, Rng& rng) {
  ad::NoGradGuard no_grad;
  const int n = nets.config.num_quantiles;
  Matrix next = Matrix::Zero(static_cast<Eigen::Index>(batch.rewards.size()), n);
  std::vector<const FeatureFrame*> frames;
  std::vector<int> rows;
  for (std::size_t i = 0; i < batch.next.size(); ++i) {
    if (batch.next[i]) {
      frames.push_back(batch.next[i]);
      rows.push_back(static_cast<int>(i));
    }
  }
  if (!frames.empty()) {
    const BatchGraph g = make_batch(frames);
    const Embeddings te = nets.target_encoder.forward(g);
    const Matrix zmin =
        twin_min(nets.target_critic1.forward(te, g), nets.target_critic2.forward(te, g)).value();
    const Embeddings oe = nets.encoder.forward(g);
    const Matrix probs = ad::exp(log_policy(nets.actor.logits(oe), g)).value();
    for (int s = 0; s < g.num_states; ++s) {
      const int p0 = g.pair_offset[static_cast<std::size_t>(s)];
      const int k = g.pairs_of(s);
      const auto row = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(s)]);
      if (expected) {
        for (int a = 0; a < k; ++a) next.row(row) += probs(p0 + a, 0) * zmin.row(p0 + a);
      } else {
        std::vector<double> w(static_cast<std::size_t>(k));
        for (int a = 0; a < k; ++a) w[static_cast<std::size_t>(a)] = probs(p0 + a, 0);
        const auto a = static_cast<int>(rng.categorical(w));
        next.row(row) = zmin.row(p0 + a);
      }
    }
  }
  return td_target(batch.rewards, batch.terminal, next, gamma);
}

CriticLoss critic_loss(const Networks& nets, const TrainBatch& batch, const Matrix& target, double alpha_cql) {
  const BatchGraph& g = batch.graph;
  const Embeddings e = nets.encoder.forward(g);
  CriticLoss out;
  out.z1 = nets.critic1.forward(e, g);
  out.z2 = nets.critic2.forward(e, g);
  out.td = ad::add(quantile_huber_loss(ad::gather_rows(out.z1, batch.data_rows), target),
                   quantile_huber_loss(ad::gather_rows(out.z2, batch.data_rows), target));
  out.cql = cql_penalty({out.z1, out.z2}, g, batch.data_rows, alpha_cql);
  out.total = ad::add(out.td, out.cql);
  return out;
}

PolicyLossParts actor_loss(const Networks& nets, const TrainBatch& batch, double lambda, double entropy_sign) {
  const BatchGraph& g = batch.graph;
  Embeddings e;
  Matrix q;
  {
    ad::NoGradGuard no_grad;
    e = nets.encoder.forward(g);
    q = q_values(twin_min(nets.critic1.forward(e, g), nets.critic2.forward(e, g))).value();
  }
  return policy_loss(nets.actor.logits(e), q, g, lambda, entropy_sign);
}

Trainer::Trainer(const Dataset& dataset, TrainConfig config)
    : dataset_(dataset), config_(std::move(config)), rng_(config_.seed) {
  config_.check();
  if (dataset.num_transitions() == 0) throw ParameterError("train: empty dataset");
  if (!dataset.manifest().has_features) throw ParameterError("train: dataset was built without features");
  nets_ = std::make_shared<Networks>(config_.net_config(), config_.seed);
  for (const auto& tr : dataset.trajectories()) {
    std::vector<FeatureFrame> fs;
    fs.reserve(tr.frames.size());
    for (const auto& f : tr.frames) fs.push_back(dataset.norm().apply(f));
    frames_.push_back(std::move(fs));
  }
  rng_ = Rng(config_.seed).split(7);
  critic_opt_ = std::make_unique<ad::Adam>(nets_->critic_parameters(), ad::AdamConfig{config_.lr_critic});
  actor_opt_ = std::make_unique<ad::Adam>(nets_->actor_parameters(), ad::AdamConfig{config_.lr_actor});
  started_ = now_seconds();
}

TrainRecord Trainer::step() {
  ++step_;
  const int bs = static_cast<int>(std::min<long>(config_.batch_size, dataset_.num_transitions()));
  const auto transitions = sample_batch(dataset_, bs, rng_);
  std::vector<const FeatureFrame*> states, next;
  std::vector<int> actions;
  std::vector<double> rewards;
  for (const auto& t : transitions) {
    const auto& fs = frames_[static_cast<std::size_t>(t.trajectory)];
    states.push_back(&fs[static_cast<std::size_t>(t.step)]);
    next.push_back(t.terminal ? nullptr : &fs[static_cast<std::size_t>(t.step) + 1]);
    actions.push_back(t.action);
    rewards.push_back(t.reward);
  }
  const TrainBatch batch = make_train_batch(states, actions, rewards, next);

  TrainRecord rec;
  rec.step = step_;
  const Matrix target = compute_td_target(*nets_, batch, config_.gamma, config_.expected_target, rng_);
  const auto critic_params = nets_->critic_parameters();
  critic_opt_->zero_grad();
  const CriticLoss loss = critic_loss(*nets_, batch, target, config_.alpha_cql);
  rec.td_loss = loss.td.item();
  rec.cql_loss = loss.cql.item();
  rec.critic_loss = loss.total.item();
  if (!std::isfinite(rec.critic_loss)) {
    throw NumericalError("non-finite critic loss at step " + std::to_string(step_) + " (td " +
                         std::to_string(rec.td_loss) + ", cql " + std::to_string(rec.cql_loss) + ")");
  }
  ad::backward(loss.total);
  rec.grad_norm = ad::clip_grad_norm(critic_params, config_.grad_clip);
  if (!std::isfinite(rec.grad_norm)) throw NumericalError("non-finite critic gradient at step " + std::to_string(step_));
  critic_opt_->step();
  {
    const Matrix q1 = ad::gather_rows(q_values(loss.z1), batch.data_rows).value();
    const Matrix q2 = ad::gather_rows(q_values(loss.z2), batch.data_rows).value();
    const Matrix q = 0.5 * (q1 + q2);
    rec.q_mean = q.mean();
    rec.q_std = std::sqrt((q.array() - rec.q_mean).square().mean());
  }

  if (step_ % config_.policy_every == 0) {
    actor_opt_->zero_grad();
    const PolicyLossParts pl = actor_loss(*nets_, batch, config_.entropy_coef, config_.entropy_sign);
    const double v = pl.loss.item();
    if (!std::isfinite(v)) throw NumericalError("non-finite policy loss at step " + std::to_string(step_));
    ad::backward(pl.loss);
    ad::clip_grad_norm(nets_->actor_parameters(), config_.grad_clip);
    actor_opt_->step();
    rec.policy_loss = v;
    rec.entropy = pl.entropy;
    ++actor_updates_;
  }
  ad::polyak_update(nets_->target_parameters(), critic_params, config_.rho);
  // Gradients are not needed past this point; drop them so the next step starts clean.
  for (auto t : critic_params) t.zero_grad();
  rec.seconds = now_seconds() - started_;
  return rec;
}

PolicyBundle Trainer::bundle() const {
  PolicyBundle b;
  b.config = config_;
  b.norm = dataset_.norm();
  b.nets = nets_;
  b.trained_steps = step_;
  return b;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config, const TrainOptions& options) {
  Trainer trainer(dataset, config);
  TrainResult result;
  std::ostringstream log;
  for (long s = 0; s < config.steps; ++s) {
    TrainRecord rec = trainer.step();
    if (options.on_step) options.on_step(rec);
    if (options.out_dir) log << to_jsonl(rec) << '\n';
    if (options.out_dir && config.checkpoint_every > 0 && rec.step % config.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "step_%08ld.json", rec.step);
      save_bundle(trainer.bundle(), *options.out_dir / "checkpoints" / name);
    }
    result.log.push_back(rec);
  }
  result.bundle = trainer.bundle();
  result.actor_updates = trainer.actor_updates();
  if (options.out_dir) {
    save_bundle(result.bundle, *options.out_dir / "bundle.json");
    write_text(*options.out_dir / "train_log.jsonl", log.str());
  }
  return result;
}

}  // namespace cdqac
