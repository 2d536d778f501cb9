#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stsc/channel.hpp"
#include "stsc/codec.hpp"
#include "stsc/dataset.hpp"
#include "stsc/trainer.hpp"

namespace stsc {

enum class CaptureMode { single_batch, epoch_diff };
enum class AttackOptimizer { lbfgs, adam };

CaptureMode capture_mode_from(const std::string& s);
std::string to_string(CaptureMode m);
AttackOptimizer attack_optimizer_from(const std::string& s);
std::string to_string(AttackOptimizer o);

// What a parameter-sharing aggregator observes from one client step, plus the
// ground truth needed to score reconstructions.  single_batch stores the exact
// batch gradient; epoch_diff stores (theta_before - theta_after) / lr after a
// one-epoch sgd pass, which collapses to the same thing for a single batch.
struct CapturedUpdate {
  std::vector<double> grad;
  std::vector<double> images;  // the private batch, [n][3hw]
  int n_images = 0;
  ChannelSpec chan;
  ChannelDraw<double> draw;  // channel realisation in effect for the (first) batch
  double loss = 0;
};

CapturedUpdate capture_update(const Codec<double>& codec, const ParamPack<double>& params,
                              const Dataset& ds, const std::vector<int>& batch,
                              const TrainConfig& tc, const ChannelSpec& chan, CaptureMode mode,
                              std::uint64_t seed);

// Box-projected L-BFGS with Armijo backtracking.  When the line search cannot
// make progress it takes a short fixed gradient step instead (counted in
// `fallbacks`) and clears the curvature history.
struct LbfgsOptions {
  int iterations = 300;
  int history = 10;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  int max_line_steps = 20;
  double lo = 0.0;
  double hi = 1.0;
  double fallback_step = 1e-2;
};

struct LbfgsResult {
  std::vector<double> x;  // best iterate seen
  double f = 0;           // objective there
  int iterations = 0;
  int fallbacks = 0;
  std::vector<double> trace;  // objective after each iteration
};

// fg(x, g) returns f(x); when g is non-null it is resized and filled with the
// gradient.  Null g lets line searches skip the expensive gradient.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>*)>;

LbfgsResult lbfgs_minimize(const Objective& fg, std::vector<double> x0,
                           const LbfgsOptions& opt);

// Projected Adam on the same objective interface, for the optimizer=adam
// attack variants.
LbfgsResult adam_minimize(const Objective& fg, std::vector<double> x0, int iterations,
                          double lr, double lo, double hi);

struct DlgOptions {
  int iterations = 300;
  AttackOptimizer optimizer = AttackOptimizer::lbfgs;
  double adam_lr = 0.1;
  double hvp_delta = 1e-5;  // finite-difference step for the mixed second derivative
  std::uint64_t seed = 0;
  LbfgsOptions lbfgs;
};

struct DlgResult {
  std::vector<double> recovered;  // [n][3hw], best iterate, clamped to [0,1]
  double objective = 0;           // gradient-matching distance at the best iterate
  int fallbacks = 0;
  std::vector<double> trace;
};

// Deep-leakage-style gradient inversion: optimizes a uniform[0,1] dummy batch
// so its gradient map matches the captured one, with the channel realisation
// frozen to the captured draw.
DlgResult dlg_attack(const Codec<double>& codec, const ParamPack<double>& params,
                     const CapturedUpdate& cap, const DlgOptions& opt);

// Compute the dlg matching objective (and optionally its dummy-batch
// gradient) at an arbitrary dummy batch; used by tests and for reporting.
double dlg_objective(const Codec<double>& codec, const ParamPack<double>& params,
                     const CapturedUpdate& cap, const std::vector<double>& dummy);
std::vector<double> dlg_gradient(const Codec<double>& codec, const ParamPack<double>& params,
                                 const CapturedUpdate& cap, const std::vector<double>& dummy,
                                 double delta = 1e-5);

// Raw post-channel symbols an eavesdropper intercepts, with ground truth and
// the true draws (the latter only for scoring the legitimate receiver).
struct Intercepts {
  std::vector<double> y;       // [n][n_real], pre-equalization
  std::vector<double> images;  // [n][3hw]
  int n = 0;
  int chunk = 0;  // draw granularity
  ChannelSpec chan;
  std::vector<ChannelDraw<double>> draws;  // one per chunk of `chunk` images
};

Intercepts record_intercepts(const Codec<double>& codec, const ParamPack<double>& victim,
                             const Dataset& ds, const std::vector<int>& indices,
                             const ChannelSpec& chan, int chunk, std::uint64_t seed);

// The legitimate receiver's reconstructions for the same intercepts (CSI
// equalization plus the victim decoder); the attackers' quality ceiling.
std::vector<double> legitimate_decode(const Codec<double>& codec, const ParamPack<double>& victim,
                                      const Intercepts& ic);

struct InversionNetOptions {
  int pairs = 500;
  int epochs = 40;
  int batch_size = 32;
  double lr = 1e-3;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

struct InversionNet {
  ParamPack<double> params;  // fresh full pack; only the decode path is trained
  double final_loss = 0;
};

// Trains an attacker decoder on known (intercepted y, image) pairs drawn from
// `pool_indices` (must be disjoint from the evaluation set by construction of
// the caller).
InversionNet train_inversion_net(const Codec<double>& codec, const ParamPack<double>& victim,
                                 const Dataset& pool, const std::vector<int>& pool_indices,
                                 const ChannelSpec& chan, const InversionNetOptions& opt);

// Applies the trained inversion net to raw intercepted symbols.
std::vector<double> invert_with_net(const Codec<double>& codec, const InversionNet& net,
                                    const std::vector<double>& y, int n);

struct InvertOptOptions {
  int iterations = 300;
  AttackOptimizer optimizer = AttackOptimizer::lbfgs;
  double adam_lr = 0.05;
  bool blind_rescale = true;  // rescale y to the encoder's output power before matching
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  LbfgsOptions lbfgs;
};

struct InvertOptResult {
  std::vector<double> recovered;  // [n][3hw]
  std::vector<double> objectives;
  int fallbacks = 0;
};

// White-box feature inversion: per image, optimizes a dummy so that
// encode(dummy) matches the (blindly rescaled) intercepted symbols.  Images
// run in parallel on per-image rng streams.
InvertOptResult invert_features_optimization(const Codec<double>& codec,
                                             const ParamPack<double>& victim,
                                             const std::vector<double>& y, int n,
                                             const InvertOptOptions& opt);

struct AttackRow {
  std::string name;
  double mse = 0;
  double psnr_db = 0;  // from the aggregate mse, same convention as evaluate()
  double ssim = 0;     // mean per-image
  double mean_psnr_db = 0;
  std::vector<double> psnr_per_image, ssim_per_image;
};

AttackRow attack_row(const std::string& name, const double* recovered, const double* truth,
                     int n, int h, int w);

}  // namespace stsc
