#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stsc/channel.hpp"
#include "stsc/codec.hpp"
#include "stsc/dataset.hpp"

namespace stsc {

enum class OptimizerKind { adam, sgd };
enum class SnrPolicy { fixed, random };

OptimizerKind optimizer_kind_from(const std::string& s);
std::string to_string(OptimizerKind k);
SnrPolicy snr_policy_from(const std::string& s);
std::string to_string(SnrPolicy p);

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  double clip_norm = 1.0;  // whole-gradient L2 threshold; 0 disables clipping
  SnrPolicy snr_policy = SnrPolicy::fixed;
  double snr_min = 0.0;  // random policy draws snr_db uniformly per batch
  double snr_max = 18.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

// Optimizer slots sized to the parameter pack; step counts Adam updates for
// bias correction.
template <typename T>
struct OptState {
  std::vector<T> m, v;
  std::int64_t step = 0;

  void reset(std::size_t n) {
    m.assign(n, T(0));
    v.assign(n, T(0));
    step = 0;
  }
};

struct TrainStats {
  int batches = 0;
  double mean_loss = 0;   // mean over batches of the pre-update batch mse
  double final_loss = 0;  // last batch
  int deep_fade_resamples = 0;
};

// Runs tc.epochs shuffled passes over `indices`, updating `params` in place.
// Draw order, per-batch snr and channel realisations all derive from `seed`,
// so a run is reproducible end to end.  Throws numeric_error when the loss
// stops being finite.
template <typename T>
TrainStats local_train(const Codec<T>& codec, ParamPack<T>& params, OptState<T>& opt,
                       const Dataset& ds, const std::vector<int>& indices, const TrainConfig& tc,
                       const ChannelSpec& chan, std::uint64_t seed);

struct EvalResult {
  double mse = 0;      // aggregated over every pixel of every image
  double psnr_db = 0;  // from the aggregate mse
  double ssim = 0;     // mean of per-image ssim
  int n_images = 0;
  int deep_fade_resamples = 0;
};

// Forward-only pass over `indices` in the given order; channel noise derives
// from `seed` alone, so evaluations are repeatable.
template <typename T>
EvalResult evaluate(const Codec<T>& codec, const ParamPack<T>& params, const Dataset& ds,
                    const std::vector<int>& indices, const ChannelSpec& chan, int batch_size,
                    std::uint64_t seed);

extern template TrainStats local_train<float>(const Codec<float>&, ParamPack<float>&,
                                              OptState<float>&, const Dataset&,
                                              const std::vector<int>&, const TrainConfig&,
                                              const ChannelSpec&, std::uint64_t);
extern template TrainStats local_train<double>(const Codec<double>&, ParamPack<double>&,
                                               OptState<double>&, const Dataset&,
                                               const std::vector<int>&, const TrainConfig&,
                                               const ChannelSpec&, std::uint64_t);
extern template EvalResult evaluate<float>(const Codec<float>&, const ParamPack<float>&,
                                           const Dataset&, const std::vector<int>&,
                                           const ChannelSpec&, int, std::uint64_t);
extern template EvalResult evaluate<double>(const Codec<double>&, const ParamPack<double>&,
                                            const Dataset&, const std::vector<int>&,
                                            const ChannelSpec&, int, std::uint64_t);

}  // namespace stsc
