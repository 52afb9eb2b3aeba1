#include "cdqac/nets.hpp"

#include <cmath>

#include "cdqac/errors.hpp"

namespace cdqac {

using ad::Matrix;
using ad::Tensor;

void NetConfig::check() const {
  if (layers < 1 || heads < 1 || hidden_dim < 1 || out_dim < 1 || mlp_width < 1 || mlp_hidden_layers < 0 ||
      num_quantiles < 1) {
    throw ParameterError("network dimensions must be positive");
  }
}

BatchGraph make_batch(std::span<const FeatureFrame* const> frames) {
  if (frames.empty()) throw ContractViolation("make_batch: no frames");
  BatchGraph g;
  g.num_states = static_cast<int>(frames.size());
  int n_ops = 0, n_mach = 0, n_pairs = 0;
  for (const auto* f : frames) {
    if (f->num_ops == 0 || f->num_machines == 0) throw ContractViolation("make_batch: empty frame");
    if (f->num_pairs == 0) throw ContractViolation("make_batch: frame without legal pairs");
    n_ops += f->num_ops;
    n_mach += f->num_machines;
    n_pairs += f->num_pairs;
  }
  g.op_x.resize(n_ops, kOpFeatures);
  g.mach_x.resize(n_mach, kMachineFeatures);
  g.pair_x.resize(n_pairs, kPairFeatures);
  g.pair_offset.push_back(0);

  int o0 = 0, m0 = 0, p0 = 0;
  std::vector<int> shared;
  for (int s = 0; s < g.num_states; ++s) {
    const FeatureFrame& f = *frames[static_cast<std::size_t>(s)];
    std::copy(f.op_feats.begin(), f.op_feats.end(), g.op_x.data() + static_cast<std::ptrdiff_t>(o0) * kOpFeatures);
    std::copy(f.mach_feats.begin(), f.mach_feats.end(),
              g.mach_x.data() + static_cast<std::ptrdiff_t>(m0) * kMachineFeatures);
    std::copy(f.pair_feats.begin(), f.pair_feats.end(),
              g.pair_x.data() + static_cast<std::ptrdiff_t>(p0) * kPairFeatures);
    for (int i = 0; i < f.num_ops; ++i) g.op_state.push_back(s);
    for (int k = 0; k < f.num_machines; ++k) g.mach_state.push_back(s);
    for (const auto& [op_row, mach_row] : f.pair_index) {
      g.pair_state.push_back(s);
      g.pair_op.push_back(o0 + op_row);
      g.pair_mach.push_back(m0 + mach_row);
    }

    // Each op row attends over itself and over its job's predecessor/successor when present.
    for (int i = 0; i < f.num_ops; ++i) {
      const OpRef a = f.op_ids[static_cast<std::size_t>(i)];
      for (int j = 0; j < f.num_ops; ++j) {
        const OpRef b = f.op_ids[static_cast<std::size_t>(j)];
        if (i == j || (a.job == b.job && std::abs(a.pos - b.pos) == 1)) {
          g.op_edge_dst.push_back(o0 + i);
          g.op_edge_src.push_back(o0 + j);
        }
      }
    }

    for (int y = 0; y < f.num_machines; ++y) {
      for (int z = 0; z < f.num_machines; ++z) {
        shared.clear();
        for (int i = 0; i < f.num_ops; ++i) {
          if (f.op_pending[static_cast<std::size_t>(i)] && f.compatible(i, y) && f.compatible(i, z)) shared.push_back(i);
        }
        if (y != z && shared.empty()) continue;
        const int edge = static_cast<int>(g.mach_edge_dst.size());
        g.mach_edge_dst.push_back(m0 + y);
        g.mach_edge_src.push_back(m0 + z);
        for (int i : shared) {
          g.pool_op.push_back(o0 + i);
          g.pool_edge.push_back(edge);
        }
      }
    }

    o0 += f.num_ops;
    m0 += f.num_machines;
    p0 += f.num_pairs;
    g.pair_offset.push_back(p0);
  }
  return g;
}

namespace {

Matrix glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * rng.uniform01() - 1.0) * limit;
  return m;
}

}  // namespace

Mlp::Mlp(ad::ParamStore& store, const std::string& prefix, int in, int width, int hidden_layers, int out, Rng& rng) {
  int d = in;
  for (int l = 0; l <= hidden_layers; ++l) {
    const int next = l == hidden_layers ? out : width;
    const std::string tag = prefix + ".l" + std::to_string(l);
    w_.push_back(store.add(tag + ".w", glorot(d, next, rng)));
    b_.push_back(store.add(tag + ".b", Matrix::Zero(1, next)));
    d = next;
  }
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    h = ad::add_row(ad::matmul(h, w_[l]), b_[l]);
    if (l + 1 < w_.size()) h = ad::elu(h);
  }
  return h;
}

Encoder::Encoder(ad::ParamStore& store, const NetConfig& config, Rng& rng) : config_(config) {
  config.check();
  int d_op = kOpFeatures, d_mach = kMachineFeatures;
  for (int l = 0; l < config.layers; ++l) {
    Layer layer;
    layer.heads = config.heads;
    layer.average = l + 1 == config.layers;
    layer.dim = layer.average ? config.out_dim : config.hidden_dim;
    const int width = layer.heads * layer.dim;
    const std::string tag = "enc.l" + std::to_string(l);
    layer.op_w = store.add(tag + ".op_w", glorot(d_op, width, rng));
    layer.op_att = store.add(tag + ".op_att", glorot(layer.dim, 2 * layer.heads, rng));
    layer.mach_x = store.add(tag + ".mach_x", glorot(d_mach, width, rng));
    layer.mach_y = store.add(tag + ".mach_y", glorot(d_op, width, rng));
    layer.mach_z = store.add(tag + ".mach_z", glorot(d_op, width, rng));
    layer.mach_att = store.add(tag + ".mach_att", glorot(layer.dim, 3 * layer.heads, rng));
    layers_.push_back(layer);
    d_op = layer.average ? layer.dim : width;
    d_mach = d_op;
  }
}

Embeddings Encoder::forward(const BatchGraph& g) const {
  const int n_ops = static_cast<int>(g.op_x.rows());
  const int n_mach = static_cast<int>(g.mach_x.rows());
  const int n_edges = static_cast<int>(g.mach_edge_dst.size());
  Tensor h_op = Tensor::constant(g.op_x);
  Tensor h_mach = Tensor::constant(g.mach_x);

  for (const Layer& layer : layers_) {
    const Tensor p_op = ad::matmul(h_op, layer.op_w);
    const Tensor p_mach = ad::matmul(h_mach, layer.mach_x);
    // Mean of the op rows shared by each machine edge; zero for none.
    const Tensor pooled = ad::segment_mean(ad::gather_rows(h_op, g.pool_op), g.pool_edge, n_edges);
    const Tensor c_score = ad::matmul(pooled, layer.mach_y);
    const Tensor c_msg = ad::matmul(pooled, layer.mach_z);

    std::vector<Tensor> op_heads, mach_heads;
    for (int h = 0; h < layer.heads; ++h) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(h) * layer.dim;

      const Tensor ph = ad::slice_cols(p_op, c0, layer.dim);
      const Tensor sc = ad::matmul(ph, ad::slice_cols(layer.op_att, 2 * h, 2));
      const Tensor e_op = ad::leaky_relu(ad::add(ad::gather_rows(ad::slice_cols(sc, 0, 1), g.op_edge_src),
                                                 ad::gather_rows(ad::slice_cols(sc, 1, 1), g.op_edge_dst)));
      const Tensor a_op = ad::segment_softmax(e_op, g.op_edge_dst, n_ops);
      op_heads.push_back(
          ad::segment_sum(ad::mul_col(ad::gather_rows(ph, g.op_edge_src), a_op), g.op_edge_dst, n_ops));

      const Tensor qh = ad::slice_cols(p_mach, c0, layer.dim);
      const Tensor att = ad::slice_cols(layer.mach_att, 3 * h, 3);
      const Tensor sm = ad::matmul(qh, ad::slice_cols(att, 0, 2));
      const Tensor sp = ad::matmul(ad::slice_cols(c_score, c0, layer.dim), ad::slice_cols(att, 2, 1));
      const Tensor e_m = ad::leaky_relu(ad::add(ad::add(ad::gather_rows(ad::slice_cols(sm, 0, 1), g.mach_edge_src),
                                                        ad::gather_rows(ad::slice_cols(sm, 1, 1), g.mach_edge_dst)),
                                                sp));
      const Tensor a_m = ad::segment_softmax(e_m, g.mach_edge_dst, n_mach);
      const Tensor msg = ad::add(ad::gather_rows(qh, g.mach_edge_src), ad::slice_cols(c_msg, c0, layer.dim));
      mach_heads.push_back(ad::segment_sum(ad::mul_col(msg, a_m), g.mach_edge_dst, n_mach));
    }

    if (layer.average) {
      Tensor so = op_heads[0], sm = mach_heads[0];
      for (int h = 1; h < layer.heads; ++h) {
        so = ad::add(so, op_heads[static_cast<std::size_t>(h)]);
        sm = ad::add(sm, mach_heads[static_cast<std::size_t>(h)]);
      }
      h_op = ad::elu(ad::scale(so, 1.0 / layer.heads));
      h_mach = ad::elu(ad::scale(sm, 1.0 / layer.heads));
    } else {
      h_op = ad::elu(ad::concat_cols(op_heads));
      h_mach = ad::elu(ad::concat_cols(mach_heads));
    }
  }

  Embeddings e;
  e.op = h_op;
  e.mach = h_mach;
  e.global = ad::concat_cols({ad::segment_mean(h_op, g.op_state, g.num_states),
                              ad::segment_mean(h_mach, g.mach_state, g.num_states)});
  e.pair_in = ad::concat_cols({ad::gather_rows(h_op, g.pair_op), ad::gather_rows(h_mach, g.pair_mach),
                               Tensor::constant(g.pair_x), ad::gather_rows(e.global, g.pair_state)});
  return e;
}

CriticHead::CriticHead(ad::ParamStore& store, const std::string& prefix, const NetConfig& config, Rng& rng)
    : config_(config) {
  config.check();
  if (config.dueling) {
    value_ = Mlp(store, prefix + ".value", config.global_dim(), config.mlp_width, config.mlp_hidden_layers,
                 config.num_quantiles, rng);
    advantage_ = Mlp(store, prefix + ".adv", config.pair_input_dim(), config.mlp_width, config.mlp_hidden_layers,
                     config.num_quantiles, rng);
  } else {
    single_ = Mlp(store, prefix + ".q", config.pair_input_dim(), config.mlp_width, config.mlp_hidden_layers,
                  config.num_quantiles, rng);
  }
}

Tensor CriticHead::value(const Embeddings& e) const {
  if (!config_.dueling) return {};
  return value_.forward(e.global);
}

Tensor CriticHead::advantage(const Embeddings& e) const {
  return config_.dueling ? advantage_.forward(e.pair_in) : single_.forward(e.pair_in);
}

Tensor CriticHead::forward(const Embeddings& e, const BatchGraph& g) const {
  if (!config_.dueling) return single_.forward(e.pair_in);
  return dueling_combine(value(e), advantage(e), g.pair_state, g.num_states);
}

ActorHead::ActorHead(ad::ParamStore& store, const NetConfig& config, Rng& rng)
    : mlp_(store, "actor", config.pair_input_dim(), config.mlp_width, config.mlp_hidden_layers, 1, rng) {}

Tensor ActorHead::logits(const Embeddings& e) const { return mlp_.forward(e.pair_in); }

Tensor dueling_combine(const Tensor& v, const Tensor& a, const std::vector<int>& pair_state, int num_states) {
  if (v.cols() != a.cols()) throw ContractViolation("dueling_combine: quantile counts differ");
  const Tensor a_mean = ad::segment_mean(a, pair_state, num_states);
  return ad::add(ad::gather_rows(v, pair_state), ad::sub(a, ad::gather_rows(a_mean, pair_state)));
}

Tensor twin_min(const Tensor& z1, const Tensor& z2) { return ad::minimum(z1, z2); }

Tensor q_values(const Tensor& z) { return ad::row_mean(z); }

std::vector<double> quantile_fractions(int n) {
  if (n < 1) throw ParameterError("quantile count must be positive");
  std::vector<double> tau(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) tau[static_cast<std::size_t>(i - 1)] = (2.0 * i - 1.0) / (2.0 * n);
  return tau;
}

Tensor log_policy(const Tensor& logits, const BatchGraph& g) {
  const Tensor lse = ad::segment_logsumexp(logits, g.pair_state, g.num_states);
  return ad::sub(logits, ad::gather_rows(lse, g.pair_state));
}

Networks::Networks(const NetConfig& cfg, std::uint64_t seed) : config(cfg) {
  config.check();
  Rng root(seed);
  Rng r_enc = root.split(1), r_c1 = root.split(2), r_c2 = root.split(3), r_actor = root.split(4);
  encoder = Encoder(encoder_params, config, r_enc);
  critic1 = CriticHead(critic1_params, "critic1", config, r_c1);
  critic2 = CriticHead(critic2_params, "critic2", config, r_c2);
  actor = ActorHead(actor_params, config, r_actor);
  Rng scratch(0);
  target_encoder = Encoder(target_encoder_params, config, scratch);
  target_critic1 = CriticHead(target_critic1_params, "critic1", config, scratch);
  target_critic2 = CriticHead(target_critic2_params, "critic2", config, scratch);
  sync_targets();
}

void Networks::sync_targets() {
  target_encoder_params.copy_from(encoder_params);
  target_critic1_params.copy_from(critic1_params);
  target_critic2_params.copy_from(critic2_params);
}

std::vector<Tensor> Networks::critic_parameters() const {
  std::vector<Tensor> out = encoder_params.tensors();
  for (const auto& t : critic1_params.tensors()) out.push_back(t);
  for (const auto& t : critic2_params.tensors()) out.push_back(t);
  return out;
}

std::vector<Tensor> Networks::target_parameters() const {
  std::vector<Tensor> out = target_encoder_params.tensors();
  for (const auto& t : target_critic1_params.tensors()) out.push_back(t);
  for (const auto& t : target_critic2_params.tensors()) out.push_back(t);
  return out;
}

std::vector<Tensor> Networks::actor_parameters() const { return actor_params.tensors(); }

std::vector<std::pair<std::string, ad::ParamStore*>> Networks::stores() {
  return {{"encoder", &encoder_params},
          {"critic1", &critic1_params},
          {"critic2", &critic2_params},
          {"actor", &actor_params},
          {"target_encoder", &target_encoder_params},
          {"target_critic1", &target_critic1_params},
          {"target_critic2", &target_critic2_params}};
}

std::vector<std::pair<std::string, const ad::ParamStore*>> Networks::stores() const {
  std::vector<std::pair<std::string, const ad::ParamStore*>> out;
  for (auto& [name, store] : const_cast<Networks*>(this)->stores()) out.emplace_back(name, store);
  return out;
}

}  // namespace cdqac
