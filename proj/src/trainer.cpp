#include "stsc/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "stsc/common.hpp"
#include "stsc/kernels.hpp"
#include "stsc/metrics.hpp"

namespace stsc {

OptimizerKind optimizer_kind_from(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw config_error("unknown optimizer '" + s + "' (expected adam or sgd)");
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

SnrPolicy snr_policy_from(const std::string& s) {
  if (s == "fixed") return SnrPolicy::fixed;
  if (s == "random") return SnrPolicy::random;
  throw config_error("unknown snr policy '" + s + "' (expected fixed or random)");
}

std::string to_string(SnrPolicy p) { return p == SnrPolicy::fixed ? "fixed" : "random"; }

void TrainConfig::validate() const {
  require(lr >= 0.0 && std::isfinite(lr), "learning rate must be finite and non-negative");
  require(batch_size >= 1, "batch size must be at least 1");
  require(epochs >= 1, "epochs must be at least 1");
  require(clip_norm >= 0.0, "clip norm must be non-negative (0 disables)");
  require(snr_min <= snr_max, "snr range is inverted");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam epsilon must be positive");
}

namespace {

template <typename T>
double batch_sq_err(const T* a, const T* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

}  // namespace

template <typename T>
TrainStats local_train(const Codec<T>& codec, ParamPack<T>& params, OptState<T>& opt,
                       const Dataset& ds, const std::vector<int>& indices, const TrainConfig& tc,
                       const ChannelSpec& chan, std::uint64_t seed) {
  tc.validate();
  chan.validate();
  require(!indices.empty(), "cannot train on an empty index set");

  const auto& cfg = codec.config();
  const auto& K = kernels::ops<T>();
  const int px = cfg.pixels();
  require<shape_error>(px == kImageBytes, "codec image size must match the dataset (32x32x3)");
  const int nr = cfg.n_real();
  const int bs = std::min<int>(tc.batch_size, static_cast<int>(indices.size()));
  const std::size_t np = params.data.size();
  if (opt.m.size() != np) opt.reset(np);

  Rng rng(derive_seed(seed, "local-train"));
  std::vector<int> order(indices);
  std::vector<T> x(static_cast<std::size_t>(bs) * px), xhat(x.size()), dxhat(x.size());
  std::vector<T> sym(static_cast<std::size_t>(bs) * nr), rx(sym.size()), drx(sym.size()),
      dsym(sym.size());
  std::vector<T> grad(np);
  Workspace<T> ws;

  TrainStats st;
  double loss_sum = 0.0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(bs)) {
      const int b = static_cast<int>(std::min<std::size_t>(bs, order.size() - at));
      const std::size_t nx = static_cast<std::size_t>(b) * px;

      ds.gather(order.data() + at, b, x.data());
      codec.encode(x.data(), b, params.data.data(), sym.data(), ws);

      ChannelSpec cs = chan;
      if (tc.snr_policy == SnrPolicy::random) cs.snr_db = rng.uniform(tc.snr_min, tc.snr_max);
      auto draw = draw_channel<T>(cs, b, nr, rng);
      st.deep_fade_resamples += draw.resamples;
      apply_channel(sym.data(), b, nr, cs, draw, rx.data());

      codec.decode(rx.data(), b, params.data.data(), xhat.data(), ws);

      const double loss = batch_sq_err(xhat.data(), x.data(), nx) / static_cast<double>(nx);
      require<numeric_error>(std::isfinite(loss),
                             "training diverged at batch " + std::to_string(st.batches) +
                                 " (loss is not finite); lower the learning rate");

      const T c2 = static_cast<T>(2.0 / static_cast<double>(nx));
      for (std::size_t i = 0; i < nx; ++i) dxhat[i] = c2 * (xhat[i] - x[i]);

      std::fill(grad.begin(), grad.end(), T(0));
      codec.decode_backward(dxhat.data(), b, params.data.data(), drx.data(), grad.data(), ws);
      channel_backward(drx.data(), b, nr, cs, draw, dsym.data());
      codec.encode_backward(dsym.data(), b, params.data.data(), nullptr, grad.data(), ws);

      if (tc.clip_norm > 0.0) {
        const double gn =
            std::sqrt(static_cast<double>(K.sum_sq(grad.data(), static_cast<int>(np))));
        if (gn > tc.clip_norm)
          K.scale(static_cast<T>(tc.clip_norm / gn), grad.data(), static_cast<int>(np));
      }

      if (tc.optimizer == OptimizerKind::adam) {
        ++opt.step;
        const T bc1 = static_cast<T>(1.0 - std::pow(tc.adam_beta1, opt.step));
        const T bc2 = static_cast<T>(1.0 - std::pow(tc.adam_beta2, opt.step));
        K.adam_step(params.data.data(), grad.data(), opt.m.data(), opt.v.data(),
                    static_cast<int>(np), static_cast<T>(tc.lr), static_cast<T>(tc.adam_beta1),
                    static_cast<T>(tc.adam_beta2), static_cast<T>(tc.adam_eps), bc1, bc2);
      } else {
        K.sgd_step(params.data.data(), grad.data(), static_cast<int>(np), static_cast<T>(tc.lr));
      }

      loss_sum += loss;
      st.final_loss = loss;
      ++st.batches;
    }
  }
  st.mean_loss = loss_sum / st.batches;
  return st;
}

template <typename T>
EvalResult evaluate(const Codec<T>& codec, const ParamPack<T>& params, const Dataset& ds,
                    const std::vector<int>& indices, const ChannelSpec& chan, int batch_size,
                    std::uint64_t seed) {
  chan.validate();
  require(batch_size >= 1, "batch size must be at least 1");
  require(!indices.empty(), "cannot evaluate on an empty index set");

  const auto& cfg = codec.config();
  const int px = cfg.pixels();
  require<shape_error>(px == kImageBytes, "codec image size must match the dataset (32x32x3)");
  const int nr = cfg.n_real();
  const int bs = std::min<int>(batch_size, static_cast<int>(indices.size()));

  Rng rng(derive_seed(seed, "eval"));
  std::vector<T> x(static_cast<std::size_t>(bs) * px), xhat(x.size());
  std::vector<T> sym(static_cast<std::size_t>(bs) * nr), rx(sym.size());
  Workspace<T> ws;

  EvalResult res;
  double se_sum = 0.0, ssim_sum = 0.0;
  std::size_t elems = 0;
  for (std::size_t at = 0; at < indices.size(); at += static_cast<std::size_t>(bs)) {
    const int b = static_cast<int>(std::min<std::size_t>(bs, indices.size() - at));
    ds.gather(indices.data() + at, b, x.data());
    codec.encode(x.data(), b, params.data.data(), sym.data(), ws);
    auto draw = draw_channel<T>(chan, b, nr, rng);
    res.deep_fade_resamples += draw.resamples;
    apply_channel(sym.data(), b, nr, chan, draw, rx.data());
    codec.decode(rx.data(), b, params.data.data(), xhat.data(), ws);

    se_sum += batch_sq_err(xhat.data(), x.data(), static_cast<std::size_t>(b) * px);
    elems += static_cast<std::size_t>(b) * px;
    for (int i = 0; i < b; ++i)
      ssim_sum += ssim(x.data() + static_cast<std::size_t>(i) * px,
                       xhat.data() + static_cast<std::size_t>(i) * px, cfg.h, cfg.w, 3, 1.0);
    res.n_images += b;
  }
  res.mse = se_sum / static_cast<double>(elems);
  res.psnr_db = psnr_db(res.mse, 1.0);
  res.ssim = ssim_sum / res.n_images;
  return res;
}

template TrainStats local_train<float>(const Codec<float>&, ParamPack<float>&, OptState<float>&,
                                       const Dataset&, const std::vector<int>&,
                                       const TrainConfig&, const ChannelSpec&, std::uint64_t);
template TrainStats local_train<double>(const Codec<double>&, ParamPack<double>&,
                                        OptState<double>&, const Dataset&,
                                        const std::vector<int>&, const TrainConfig&,
                                        const ChannelSpec&, std::uint64_t);
template EvalResult evaluate<float>(const Codec<float>&, const ParamPack<float>&, const Dataset&,
                                    const std::vector<int>&, const ChannelSpec&, int,
                                    std::uint64_t);
template EvalResult evaluate<double>(const Codec<double>&, const ParamPack<double>&,
                                     const Dataset&, const std::vector<int>&, const ChannelSpec&,
                                     int, std::uint64_t);

}  // namespace stsc
