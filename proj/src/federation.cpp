#include "stsc/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stsc/common.hpp"
#include "stsc/metrics.hpp"

namespace stsc {

FedWeights fedavg_weights(const std::vector<int>& participant_sizes) {
  require(!participant_sizes.empty(), "fedavg needs at least one participant");
  FedWeights w;
  w.numerators.reserve(participant_sizes.size());
  for (int s : participant_sizes) {
    require(s > 0, "fedavg participant with an empty shard");
    w.numerators.push_back(s);
    w.denominator += s;
  }
  return w;
}

template <typename T>
void fedavg(const std::vector<const T*>& clients, std::size_t n, const FedWeights& w, T* out) {
  require<shape_error>(clients.size() == w.numerators.size(),
                       "client count does not match the weight count");
  require(w.denominator > 0, "fedavg weights are unnormalizable");
  require(std::accumulate(w.numerators.begin(), w.numerators.end(), 0LL) == w.denominator,
          "fedavg weights do not sum to one");
  const double den = static_cast<double>(w.denominator);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < clients.size(); ++k)
      acc += static_cast<double>(w.numerators[k]) * static_cast<double>(clients[k][i]);
    out[i] = static_cast<T>(acc / den);
  }
}

std::vector<int> select_participants(int n_clients, int m, Rng& rng) {
  require(n_clients >= 1 && m >= 1 && m <= n_clients,
          "participants per round must lie in [1, n_clients]");
  std::vector<int> pool(n_clients);
  std::iota(pool.begin(), pool.end(), 0);
  // partial Fisher-Yates: the first m entries end up a uniform sample
  for (int i = 0; i < m; ++i) {
    int j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_clients - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  std::sort(pool.begin(), pool.end());
  return pool;
}

void FederationConfig::validate() const {
  require(n_clients >= 1, "need at least one client");
  require(rounds >= 1, "need at least one round");
  require(participants_per_round >= 1 && participants_per_round <= n_clients,
          "participants per round must lie in [1, n_clients]");
  require(eval_every >= 0 && checkpoint_every >= 0, "periodic intervals cannot be negative");
}

template <typename T>
FedRun run_federated_training(const Codec<T>& codec, ParamPack<T>& global, const Dataset& train,
                              const Partition& part, const TrainConfig& tc,
                              const ChannelSpec& chan, const FederationConfig& fc,
                              std::uint64_t seed,
                              const std::function<void(const RoundLog&)>& on_round,
                              const FedEvalSpec* eval,
                              const std::function<void(int, const ParamPack<T>&)>& on_checkpoint) {
  fc.validate();
  tc.validate();
  require<shape_error>(static_cast<int>(part.client_indices.size()) == fc.n_clients,
                       "partition does not cover the configured client count");
  if (fc.eval_every > 0)
    require(eval != nullptr && eval->data != nullptr && !eval->indices.empty(),
            "eval_every is set but no evaluation split was provided");

  Rng sel_rng(derive_seed(seed, "select"));
  FedRun run;
  run.rounds.reserve(fc.rounds);

  std::vector<std::vector<T>> client_params;
  OptState<T> opt;

  for (int t = 1; t <= fc.rounds; ++t) {
    auto ids = select_participants(fc.n_clients, fc.participants_per_round, sel_rng);

    RoundLog log;
    log.t = t;
    log.client_ids = ids;

    std::vector<int> sizes;
    client_params.assign(ids.size(), {});
    for (std::size_t j = 0; j < ids.size(); ++j) {
      const int k = ids[j];
      ParamPack<T> local(codec.layout());
      local.data = global.data;
      opt.reset(local.data.size());  // clients do not share optimizer history
      auto st = local_train(codec, local, opt, train, part.client_indices[k], tc, chan,
                            derive_seed(seed, "client",
                                        static_cast<std::uint64_t>(t - 1) * fc.n_clients + k));
      run.deep_fade_resamples += st.deep_fade_resamples;
      log.loss_k.push_back(st.mean_loss);
      sizes.push_back(static_cast<int>(part.client_indices[k].size()));
      client_params[j] = std::move(local.data);
    }

    auto w = fedavg_weights(sizes);
    std::vector<const T*> views(ids.size());
    for (std::size_t j = 0; j < ids.size(); ++j) views[j] = client_params[j].data();
    fedavg(views, global.data.size(), w, global.data.data());

    double num = 0.0;
    for (std::size_t j = 0; j < ids.size(); ++j) num += sizes[j] * log.loss_k[j];
    log.loss_global = num / static_cast<double>(w.denominator);

    if (fc.eval_every > 0 && (t % fc.eval_every == 0 || t == fc.rounds)) {
      auto res = evaluate(codec, global, *eval->data, eval->indices, eval->chan,
                          eval->batch_size, eval->seed);
      log.psnr_eval = res.psnr_db;
    }
    if (on_checkpoint && fc.checkpoint_every > 0 && t % fc.checkpoint_every == 0)
      on_checkpoint(t, global);
    if (on_round) on_round(log);
    run.rounds.push_back(std::move(log));
  }
  return run;
}

template void fedavg<float>(const std::vector<const float*>&, std::size_t, const FedWeights&,
                            float*);
template void fedavg<double>(const std::vector<const double*>&, std::size_t, const FedWeights&,
                             double*);
template FedRun run_federated_training<float>(
    const Codec<float>&, ParamPack<float>&, const Dataset&, const Partition&, const TrainConfig&,
    const ChannelSpec&, const FederationConfig&, std::uint64_t,
    const std::function<void(const RoundLog&)>&, const FedEvalSpec*,
    const std::function<void(int, const ParamPack<float>&)>&);
template FedRun run_federated_training<double>(
    const Codec<double>&, ParamPack<double>&, const Dataset&, const Partition&,
    const TrainConfig&, const ChannelSpec&, const FederationConfig&, std::uint64_t,
    const std::function<void(const RoundLog&)>&, const FedEvalSpec*,
    const std::function<void(int, const ParamPack<double>&)>&);

}  // namespace stsc
