#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdqac/autodiff/ops.hpp"
#include "cdqac/autodiff/optim.hpp"
#include "cdqac/features.hpp"
#include "cdqac/rng.hpp"

namespace cdqac {

struct NetConfig {
  int layers = 2;
  int heads = 4;
  int hidden_dim = 32;  // per head, concatenated in every layer but the last
  int out_dim = 8;      // per head, averaged in the last layer
  int mlp_width = 64;
  int mlp_hidden_layers = 2;
  int num_quantiles = 64;
  bool dueling = true;

  void check() const;
  int global_dim() const { return 2 * out_dim; }
  int pair_input_dim() const { return 2 * out_dim + kPairFeatures + global_dim(); }
  bool operator==(const NetConfig&) const = default;
};

// Several feature frames packed into flat matrices with index vectors. Row order:
// states in batch order, rows of each state in frame order.
struct BatchGraph {
  int num_states = 0;
  ad::Matrix op_x, mach_x, pair_x;
  std::vector<int> op_state, mach_state, pair_state;
  std::vector<int> pair_op, pair_mach;  // global op / machine row of every pair
  std::vector<int> pair_offset;         // first pair row of each state, plus a final end marker

  // Operation attention edges (dst attends over src), grouped by dst.
  std::vector<int> op_edge_dst, op_edge_src;
  // Machine attention edges y -> z for machines sharing pending candidate ops (and y == z).
  std::vector<int> mach_edge_dst, mach_edge_src;
  // Pooling: entry i contributes op row pool_op[i] to edge pool_edge[i].
  std::vector<int> pool_op, pool_edge;

  int num_pairs() const { return static_cast<int>(pair_state.size()); }
  int pairs_of(int state) const { return pair_offset[static_cast<std::size_t>(state) + 1] - pair_offset[static_cast<std::size_t>(state)]; }
};

// Frames are used as given (normalize them first). Throws ContractViolation on an empty
// frame or a frame without legal pairs.
BatchGraph make_batch(std::span<const FeatureFrame* const> frames);

struct Embeddings {
  ad::Tensor op;       // total ops x out_dim
  ad::Tensor mach;     // total machines x out_dim
  ad::Tensor global;   // states x 2*out_dim
  ad::Tensor pair_in;  // pairs x pair_input_dim
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(ad::ParamStore& store, const std::string& prefix, int in, int width, int hidden_layers, int out, Rng& rng);
  ad::Tensor forward(const ad::Tensor& x) const;

 private:
  std::vector<ad::Tensor> w_, b_;
};

// Dual attention encoder over operation rows and machine rows.
class Encoder {
 public:
  Encoder() = default;
  Encoder(ad::ParamStore& store, const NetConfig& config, Rng& rng);
  Embeddings forward(const BatchGraph& g) const;

 private:
  struct Layer {
    int heads = 0, dim = 0;
    bool average = false;
    ad::Tensor op_w, op_att;                     // op projection, [src; dst] scores per head
    ad::Tensor mach_x, mach_y, mach_z, mach_att; // machine, pooled-op score, pooled-op message
  };
  NetConfig config_;
  std::vector<Layer> layers_;
};

// Twin-capable dueling quantile critic head. Output Z has one row per pair.
class CriticHead {
 public:
  CriticHead() = default;
  CriticHead(ad::ParamStore& store, const std::string& prefix, const NetConfig& config, Rng& rng);
  ad::Tensor forward(const Embeddings& e, const BatchGraph& g) const;
  // Components for inspection: V (states x N) and A (pairs x N); undefined V without dueling.
  ad::Tensor value(const Embeddings& e) const;
  ad::Tensor advantage(const Embeddings& e) const;

 private:
  NetConfig config_;
  Mlp value_, advantage_, single_;
};

class ActorHead {
 public:
  ActorHead() = default;
  ActorHead(ad::ParamStore& store, const NetConfig& config, Rng& rng);
  // pairs x 1 logits.
  ad::Tensor logits(const Embeddings& e) const;

 private:
  Mlp mlp_;
};

// Z = V[state] + A - mean_{legal} A per quantile.
ad::Tensor dueling_combine(const ad::Tensor& v, const ad::Tensor& a, const std::vector<int>& pair_state,
                           int num_states);
// Elementwise per-quantile minimum of two heads.
ad::Tensor twin_min(const ad::Tensor& z1, const ad::Tensor& z2);
// Quantile mean, pairs x 1.
ad::Tensor q_values(const ad::Tensor& z);
// tau_i = (2i - 1) / 2N for i = 1..N.
std::vector<double> quantile_fractions(int n);
// Per-state log-softmax over the state's pairs.
ad::Tensor log_policy(const ad::Tensor& logits, const BatchGraph& g);

// Online networks with a target copy of the encoder and both critic heads.
struct Networks {
  NetConfig config;
  ad::ParamStore encoder_params, critic1_params, critic2_params, actor_params;
  ad::ParamStore target_encoder_params, target_critic1_params, target_critic2_params;
  Encoder encoder, target_encoder;
  CriticHead critic1, critic2, target_critic1, target_critic2;
  ActorHead actor;

  Networks(const NetConfig& config, std::uint64_t seed);
  Networks(const Networks&) = delete;
  Networks& operator=(const Networks&) = delete;

  std::vector<ad::Tensor> critic_parameters() const;  // encoder + both heads
  std::vector<ad::Tensor> target_parameters() const;  // same order
  std::vector<ad::Tensor> actor_parameters() const;
  void sync_targets();

  // Named stores, in a fixed order, for serialization.
  std::vector<std::pair<std::string, ad::ParamStore*>> stores();
  std::vector<std::pair<std::string, const ad::ParamStore*>> stores() const;
};

}  // namespace cdqac
