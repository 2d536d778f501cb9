#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stsc/metrics_io.hpp"
#include "stsc/partition.hpp"
#include "stsc/trainer.hpp"

namespace stsc {

// Aggregation weights kept as exact rationals so the "weights sum to one"
// invariant is an integer identity instead of a floating-point hope.
struct FedWeights {
  std::vector<long long> numerators;
  long long denominator = 0;
};

// Weights proportional to shard size for the given participants.
FedWeights fedavg_weights(const std::vector<int>& participant_sizes);

// out[i] = sum_k numerators[k]/denominator * clients[k][i], accumulated in
// double regardless of T.
template <typename T>
void fedavg(const std::vector<const T*>& clients, std::size_t n, const FedWeights& w, T* out);

// m distinct clients drawn uniformly without replacement, returned sorted.
std::vector<int> select_participants(int n_clients, int m, Rng& rng);

struct FederationConfig {
  int n_clients = 3;
  int rounds = 60;
  int participants_per_round = 3;
  int eval_every = 0;        // 0 disables periodic evaluation
  int checkpoint_every = 0;  // 0 disables the checkpoint callback

  void validate() const;
};

// Held-out evaluation attached to the federated loop; the fixed seed keeps
// channel noise identical across rounds so psnr trends reflect the model.
struct FedEvalSpec {
  const Dataset* data = nullptr;
  std::vector<int> indices;
  ChannelSpec chan;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

struct FedRun {
  std::vector<RoundLog> rounds;
  int deep_fade_resamples = 0;
};

// FedAvg: each round draws participants, trains every participant from the
// current global parameters with a fresh optimizer, then replaces the global
// parameters with the shard-size weighted average.  `global` is updated in
// place.  Callbacks fire after each round (on_round) and every
// checkpoint_every rounds (on_checkpoint).
template <typename T>
FedRun run_federated_training(
    const Codec<T>& codec, ParamPack<T>& global, const Dataset& train, const Partition& part,
    const TrainConfig& tc, const ChannelSpec& chan, const FederationConfig& fc,
    std::uint64_t seed, const std::function<void(const RoundLog&)>& on_round = {},
    const FedEvalSpec* eval = nullptr,
    const std::function<void(int, const ParamPack<T>&)>& on_checkpoint = {});

extern template void fedavg<float>(const std::vector<const float*>&, std::size_t,
                                   const FedWeights&, float*);
extern template void fedavg<double>(const std::vector<const double*>&, std::size_t,
                                    const FedWeights&, double*);
extern template FedRun run_federated_training<float>(
    const Codec<float>&, ParamPack<float>&, const Dataset&, const Partition&, const TrainConfig&,
    const ChannelSpec&, const FederationConfig&, std::uint64_t,
    const std::function<void(const RoundLog&)>&, const FedEvalSpec*,
    const std::function<void(int, const ParamPack<float>&)>&);
extern template FedRun run_federated_training<double>(
    const Codec<double>&, ParamPack<double>&, const Dataset&, const Partition&,
    const TrainConfig&, const ChannelSpec&, const FederationConfig&, std::uint64_t,
    const std::function<void(const RoundLog&)>&, const FedEvalSpec*,
    const std::function<void(int, const ParamPack<double>&)>&);

}  // namespace stsc
