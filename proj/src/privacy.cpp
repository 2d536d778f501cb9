#include "stsc/privacy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <deque>
#include <exception>
#include <numeric>
#include <thread>

#include "stsc/common.hpp"
#include "stsc/kernels.hpp"
#include "stsc/metrics.hpp"

namespace stsc {

CaptureMode capture_mode_from(const std::string& s) {
  if (s == "single_batch") return CaptureMode::single_batch;
  if (s == "epoch_diff") return CaptureMode::epoch_diff;
  throw config_error("unknown capture mode '" + s + "' (expected single_batch or epoch_diff)");
}

std::string to_string(CaptureMode m) {
  return m == CaptureMode::single_batch ? "single_batch" : "epoch_diff";
}

AttackOptimizer attack_optimizer_from(const std::string& s) {
  if (s == "lbfgs") return AttackOptimizer::lbfgs;
  if (s == "adam") return AttackOptimizer::adam;
  throw config_error("unknown attack optimizer '" + s + "' (expected lbfgs or adam)");
}

std::string to_string(AttackOptimizer o) {
  return o == AttackOptimizer::lbfgs ? "lbfgs" : "adam";
}

namespace {

// one forward/backward through encode -> channel(draw) -> decode with the mse
// loss against the input; fills whichever gradients are requested
struct PassBuffers {
  Workspace<double> ws;
  std::vector<double> sym, rx, xhat, dxhat, drx, dsym, theta_scratch;
};

double loss_pass(const Codec<double>& codec, const double* theta, const double* x, int b,
                 const ChannelSpec& chan, const ChannelDraw<double>& draw, PassBuffers& pb,
                 double* grad_theta, double* grad_x) {
  const auto& cfg = codec.config();
  const int px = cfg.pixels(), nr = cfg.n_real();
  const std::size_t nx = static_cast<std::size_t>(b) * px;
  pb.sym.resize(static_cast<std::size_t>(b) * nr);
  pb.rx.resize(pb.sym.size());
  pb.xhat.resize(nx);

  codec.encode(x, b, theta, pb.sym.data(), pb.ws);
  apply_channel(pb.sym.data(), b, nr, chan, draw, pb.rx.data());
  codec.decode(pb.rx.data(), b, theta, pb.xhat.data(), pb.ws);

  double loss = 0;
  for (std::size_t i = 0; i < nx; ++i) {
    double d = pb.xhat[i] - x[i];
    loss += d * d;
  }
  loss /= static_cast<double>(nx);
  if (!grad_theta && !grad_x) return loss;

  pb.dxhat.resize(nx);
  const double c2 = 2.0 / static_cast<double>(nx);
  for (std::size_t i = 0; i < nx; ++i) pb.dxhat[i] = c2 * (pb.xhat[i] - x[i]);

  double* gt = grad_theta;
  if (!gt) {
    pb.theta_scratch.assign(codec.layout()->total(), 0.0);
    gt = pb.theta_scratch.data();
  }
  pb.drx.resize(pb.sym.size());
  pb.dsym.resize(pb.sym.size());
  codec.decode_backward(pb.dxhat.data(), b, theta, pb.drx.data(), gt, pb.ws);
  channel_backward(pb.drx.data(), b, nr, chan, draw, pb.dsym.data());
  codec.encode_backward(pb.dsym.data(), b, theta, grad_x, gt, pb.ws);
  if (grad_x)  // the input is also the regression target
    for (std::size_t i = 0; i < nx; ++i) grad_x[i] -= pb.dxhat[i];
  return loss;
}

void clamp_box(std::vector<double>& x, double lo, double hi) {
  for (auto& v : x) v = std::clamp(v, lo, hi);
}

}  // namespace

CapturedUpdate capture_update(const Codec<double>& codec, const ParamPack<double>& params,
                              const Dataset& ds, const std::vector<int>& batch,
                              const TrainConfig& tc, const ChannelSpec& chan, CaptureMode mode,
                              std::uint64_t seed) {
  tc.validate();
  chan.validate();
  require(!batch.empty(), "cannot capture an update from an empty batch");
  const auto& cfg = codec.config();
  require<shape_error>(cfg.pixels() == kImageBytes,
                       "codec image size must match the dataset (32x32x3)");
  const int n = static_cast<int>(batch.size());
  const int px = cfg.pixels(), nr = cfg.n_real();
  const std::size_t np = params.data.size();

  CapturedUpdate cap;
  cap.chan = chan;
  cap.n_images = n;
  cap.images.resize(static_cast<std::size_t>(n) * px);
  ds.gather(batch.data(), n, cap.images.data());

  Rng rng(derive_seed(seed, "capture"));
  PassBuffers pb;

  if (mode == CaptureMode::single_batch) {
    cap.draw = draw_channel<double>(chan, n, nr, rng);
    cap.grad.assign(np, 0.0);
    cap.loss = loss_pass(codec, params.data.data(), cap.images.data(), n, chan, cap.draw, pb,
                         cap.grad.data(), nullptr);
    return cap;
  }

  require(tc.optimizer == OptimizerKind::sgd,
          "epoch_diff capture divides by the learning rate, which assumes sgd");
  require(tc.lr > 0.0, "epoch_diff capture needs a positive learning rate");
  const auto& K = kernels::ops<double>();
  std::vector<double> theta = params.data, grad(np);
  const int bs = std::min(tc.batch_size, n);
  double loss_sum = 0;
  int batches = 0;
  for (int at = 0; at < n; at += bs) {
    const int b = std::min(bs, n - at);
    auto draw = draw_channel<double>(chan, b, nr, rng);
    if (batches == 0) cap.draw = draw;
    std::fill(grad.begin(), grad.end(), 0.0);
    loss_sum += loss_pass(codec, theta.data(),
                          cap.images.data() + static_cast<std::size_t>(at) * px, b, chan, draw,
                          pb, grad.data(), nullptr);
    if (tc.clip_norm > 0.0) {
      double gn = std::sqrt(K.sum_sq(grad.data(), static_cast<int>(np)));
      if (gn > tc.clip_norm) K.scale(tc.clip_norm / gn, grad.data(), static_cast<int>(np));
    }
    K.sgd_step(theta.data(), grad.data(), static_cast<int>(np), tc.lr);
    ++batches;
  }
  cap.loss = loss_sum / batches;
  cap.grad.resize(np);
  for (std::size_t i = 0; i < np; ++i) cap.grad[i] = (params.data[i] - theta[i]) / tc.lr;
  return cap;
}

LbfgsResult lbfgs_minimize(const Objective& fg, std::vector<double> x0,
                           const LbfgsOptions& opt) {
  require(opt.iterations >= 1 && opt.history >= 1 && opt.lo < opt.hi &&
              opt.backtrack > 0 && opt.backtrack < 1 && opt.max_line_steps >= 1 &&
              opt.fallback_step > 0,
          "bad lbfgs options");
  const std::size_t n = x0.size();
  clamp_box(x0, opt.lo, opt.hi);

  LbfgsResult res;
  std::vector<double> x = std::move(x0), g, gnew, d(n), xt(n);
  double f = fg(x, &g);
  res.x = x;
  res.f = f;
  res.trace.reserve(opt.iterations);

  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;

  for (int iter = 0; iter < opt.iterations; ++iter) {
    // two-loop recursion
    d = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * std::inner_product(S[i].begin(), S[i].end(), d.begin(), 0.0);
      for (std::size_t j = 0; j < n; ++j) d[j] -= alpha[i] * Y[i][j];
    }
    if (!S.empty()) {
      const auto& s = S.back();
      const auto& y = Y.back();
      double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
      double yy = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
      if (yy > 0) {
        double gamma = sy / yy;
        for (auto& v : d) v *= gamma;
      }
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      double beta = rho[i] * std::inner_product(Y[i].begin(), Y[i].end(), d.begin(), 0.0);
      for (std::size_t j = 0; j < n; ++j) d[j] += (alpha[i] - beta) * S[i][j];
    }
    for (auto& v : d) v = -v;

    double dg = std::inner_product(d.begin(), d.end(), g.begin(), 0.0);
    if (dg >= 0) {  // not a descent direction; restart from steepest descent
      d = g;
      for (auto& v : d) v = -v;
      S.clear();
      Y.clear();
      rho.clear();
    }

    double step = 1.0;
    bool accepted = false;
    double ft = f;
    for (int ls = 0; ls < opt.max_line_steps; ++ls) {
      bool moved = false;
      for (std::size_t j = 0; j < n; ++j) {
        xt[j] = std::clamp(x[j] + step * d[j], opt.lo, opt.hi);
        moved |= xt[j] != x[j];
      }
      if (!moved) break;
      ft = fg(xt, nullptr);
      double pred = 0;  // projected armijo uses the actual displacement
      for (std::size_t j = 0; j < n; ++j) pred += g[j] * (xt[j] - x[j]);
      if (ft <= f + opt.armijo_c1 * pred) {
        accepted = true;
        break;
      }
      step *= opt.backtrack;
    }

    if (!accepted) {
      double ginf = 0;
      for (double v : g) ginf = std::max(ginf, std::abs(v));
      if (ginf == 0) break;  // stationary; nothing left to do
      bool moved = false;
      for (std::size_t j = 0; j < n; ++j) {
        xt[j] = std::clamp(x[j] - opt.fallback_step * g[j] / ginf, opt.lo, opt.hi);
        moved |= xt[j] != x[j];
      }
      if (!moved) break;  // pinned to the box
      ++res.fallbacks;
      S.clear();
      Y.clear();
      rho.clear();
    }

    double fnew = fg(xt, &gnew);
    std::vector<double> s(n), y(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = xt[j] - x[j];
      y[j] = gnew[j] - g[j];
    }
    double sy = std::inner_product(s.begin(), s.end(), y.begin(), 0.0);
    double sn = std::sqrt(std::inner_product(s.begin(), s.end(), s.begin(), 0.0));
    double yn = std::sqrt(std::inner_product(y.begin(), y.end(), y.begin(), 0.0));
    if (sy > 1e-12 * sn * yn) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opt.history) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    } else {
      // the armijo-only search cannot guarantee positive curvature; observed
      // non-positive curvature invalidates the whole quasi-newton model, and
      // keeping stale pairs stalls progress, so restart from steepest descent
      S.clear();
      Y.clear();
      rho.clear();
    }
    x.swap(xt);
    g.swap(gnew);
    f = fnew;
    res.trace.push_back(f);
    ++res.iterations;
    if (f < res.f) {
      res.f = f;
      res.x = x;
    }
  }
  return res;
}

LbfgsResult adam_minimize(const Objective& fg, std::vector<double> x0, int iterations, double lr,
                          double lo, double hi) {
  require(iterations >= 1 && lr > 0 && lo < hi, "bad adam options");
  const std::size_t n = x0.size();
  clamp_box(x0, lo, hi);
  std::vector<double> x = std::move(x0), g, m(n, 0.0), v(n, 0.0);
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;

  LbfgsResult res;
  res.x = x;
  res.f = fg(x, &g);
  res.trace.reserve(iterations);
  for (int t = 1; t <= iterations; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (1 - b1) * g[j];
      v[j] = b2 * v[j] + (1 - b2) * g[j] * g[j];
      double mh = m[j] / (1 - std::pow(b1, t));
      double vh = v[j] / (1 - std::pow(b2, t));
      x[j] = std::clamp(x[j] - lr * mh / (std::sqrt(vh) + eps), lo, hi);
    }
    double f = fg(x, &g);
    res.trace.push_back(f);
    ++res.iterations;
    if (f < res.f) {
      res.f = f;
      res.x = x;
    }
  }
  return res;
}

namespace {

// gradient-matching objective with the mixed second derivative taken by a
// central difference along the parameter-space residual direction
struct DlgEngine {
  const Codec<double>& codec;
  const ParamPack<double>& params;
  const CapturedUpdate& cap;
  double delta;
  PassBuffers pb;
  std::vector<double> gtheta, v, theta_shift, gx_p, gx_m;

  double operator()(const std::vector<double>& x, std::vector<double>* grad) {
    const std::size_t np = params.data.size();
    gtheta.assign(np, 0.0);
    loss_pass(codec, params.data.data(), x.data(), cap.n_images, cap.chan, cap.draw, pb,
              gtheta.data(), nullptr);
    v.resize(np);
    double dist = 0;
    for (std::size_t i = 0; i < np; ++i) {
      v[i] = gtheta[i] - cap.grad[i];
      dist += v[i] * v[i];
    }
    if (!grad) return dist;

    grad->assign(x.size(), 0.0);
    double vn = std::sqrt(dist);
    if (vn == 0) return dist;

    theta_shift.resize(np);
    gx_p.resize(x.size());
    gx_m.resize(x.size());
    const double scale = delta / vn;
    for (std::size_t i = 0; i < np; ++i) theta_shift[i] = params.data[i] + scale * v[i];
    loss_pass(codec, theta_shift.data(), x.data(), cap.n_images, cap.chan, cap.draw, pb, nullptr,
              gx_p.data());
    for (std::size_t i = 0; i < np; ++i) theta_shift[i] = params.data[i] - scale * v[i];
    loss_pass(codec, theta_shift.data(), x.data(), cap.n_images, cap.chan, cap.draw, pb, nullptr,
              gx_m.data());
    const double c = vn / delta;  // 2 * ||v|| * central-difference / (2*delta)
    for (std::size_t j = 0; j < x.size(); ++j) (*grad)[j] = c * (gx_p[j] - gx_m[j]);
    return dist;
  }
};

}  // namespace

double dlg_objective(const Codec<double>& codec, const ParamPack<double>& params,
                     const CapturedUpdate& cap, const std::vector<double>& dummy) {
  require<shape_error>(dummy.size() == cap.images.size(),
                       "dummy batch shape does not match the captured batch");
  DlgEngine eng{codec, params, cap, 1e-5, {}, {}, {}, {}, {}, {}};
  return eng(dummy, nullptr);
}

std::vector<double> dlg_gradient(const Codec<double>& codec, const ParamPack<double>& params,
                                 const CapturedUpdate& cap, const std::vector<double>& dummy,
                                 double delta) {
  require<shape_error>(dummy.size() == cap.images.size(),
                       "dummy batch shape does not match the captured batch");
  require(delta > 0, "finite-difference step must be positive");
  DlgEngine eng{codec, params, cap, delta, {}, {}, {}, {}, {}, {}};
  std::vector<double> g;
  eng(dummy, &g);
  return g;
}

DlgResult dlg_attack(const Codec<double>& codec, const ParamPack<double>& params,
                     const CapturedUpdate& cap, const DlgOptions& opt) {
  require(opt.iterations >= 1, "attack iterations must be >= 1");
  require(opt.hvp_delta > 0, "finite-difference step must be positive");
  require<shape_error>(cap.grad.size() == params.data.size(),
                       "captured gradient does not match the parameter pack");

  std::vector<double> x0(cap.images.size());
  Rng rng(derive_seed(opt.seed, "dlg"));
  for (auto& v : x0) v = rng.uniform01();

  DlgEngine eng{codec, params, cap, opt.hvp_delta, {}, {}, {}, {}, {}, {}};
  Objective fg = [&eng](const std::vector<double>& x, std::vector<double>* g) {
    return eng(x, g);
  };

  LbfgsResult r;
  if (opt.optimizer == AttackOptimizer::lbfgs) {
    LbfgsOptions lo = opt.lbfgs;
    lo.iterations = opt.iterations;
    lo.lo = 0.0;
    lo.hi = 1.0;
    r = lbfgs_minimize(fg, std::move(x0), lo);
  } else {
    r = adam_minimize(fg, std::move(x0), opt.iterations, opt.adam_lr, 0.0, 1.0);
  }

  DlgResult out;
  out.recovered = std::move(r.x);
  out.objective = r.f;
  out.fallbacks = r.fallbacks;
  out.trace = std::move(r.trace);
  return out;
}

Intercepts record_intercepts(const Codec<double>& codec, const ParamPack<double>& victim,
                             const Dataset& ds, const std::vector<int>& indices,
                             const ChannelSpec& chan, int chunk, std::uint64_t seed) {
  chan.validate();
  require(!indices.empty(), "nothing to intercept");
  require(chunk >= 1, "chunk must be >= 1");
  const auto& cfg = codec.config();
  require<shape_error>(cfg.pixels() == kImageBytes,
                       "codec image size must match the dataset (32x32x3)");
  const int n = static_cast<int>(indices.size());
  const int px = cfg.pixels(), nr = cfg.n_real();

  Intercepts ic;
  ic.n = n;
  ic.chunk = std::min(chunk, n);
  ic.chan = chan;
  ic.images.resize(static_cast<std::size_t>(n) * px);
  ic.y.resize(static_cast<std::size_t>(n) * nr);
  ds.gather(indices.data(), n, ic.images.data());

  Rng rng(derive_seed(seed, "intercept"));
  Workspace<double> ws;
  std::vector<double> sym(static_cast<std::size_t>(ic.chunk) * nr);
  for (int at = 0; at < n; at += ic.chunk) {
    const int b = std::min(ic.chunk, n - at);
    codec.encode(ic.images.data() + static_cast<std::size_t>(at) * px, b, victim.data.data(),
                 sym.data(), ws);
    auto draw = draw_channel<double>(chan, b, nr, rng);
    transmit(sym.data(), b, nr, draw, ic.y.data() + static_cast<std::size_t>(at) * nr);
    ic.draws.push_back(std::move(draw));
  }
  return ic;
}

std::vector<double> legitimate_decode(const Codec<double>& codec, const ParamPack<double>& victim,
                                      const Intercepts& ic) {
  const auto& cfg = codec.config();
  const int px = cfg.pixels(), nr = cfg.n_real();
  std::vector<double> out(static_cast<std::size_t>(ic.n) * px);
  std::vector<double> s(static_cast<std::size_t>(ic.chunk) * nr);
  Workspace<double> ws;
  for (int at = 0, c = 0; at < ic.n; at += ic.chunk, ++c) {
    const int b = std::min(ic.chunk, ic.n - at);
    const double* y = ic.y.data() + static_cast<std::size_t>(at) * nr;
    if (ic.chan.csi == CsiMode::perfect) {
      equalize(y, b, nr, ic.draws[c], s.data());
      codec.decode(s.data(), b, victim.data.data(),
                   out.data() + static_cast<std::size_t>(at) * px, ws);
    } else {
      codec.decode(y, b, victim.data.data(), out.data() + static_cast<std::size_t>(at) * px, ws);
    }
  }
  return out;
}

InversionNet train_inversion_net(const Codec<double>& codec, const ParamPack<double>& victim,
                                 const Dataset& pool, const std::vector<int>& pool_indices,
                                 const ChannelSpec& chan, const InversionNetOptions& opt) {
  require(opt.pairs >= 1, "known_pairs must be >= 1");
  require(static_cast<int>(pool_indices.size()) >= opt.pairs,
          "pair pool is smaller than the requested number of known pairs");
  require(opt.epochs >= 1 && opt.batch_size >= 1 && opt.lr > 0, "bad inversion-net options");

  std::vector<int> pair_idx(pool_indices.begin(), pool_indices.begin() + opt.pairs);
  auto ic = record_intercepts(codec, victim, pool, pair_idx, chan, 64,
                              derive_seed(opt.seed, "pairs"));

  const auto& cfg = codec.config();
  const auto& K = kernels::ops<double>();
  const int px = cfg.pixels(), nr = cfg.n_real();

  InversionNet net{codec.make_params(), 0.0};
  codec.init_params(net.params, derive_seed(opt.seed, "net"));
  const std::size_t np = net.params.data.size();

  OptState<double> ost;
  ost.reset(np);
  Rng rng(derive_seed(opt.seed, "order"));
  std::vector<int> order(opt.pairs);
  std::iota(order.begin(), order.end(), 0);

  const int bs = std::min(opt.batch_size, opt.pairs);
  std::vector<double> yb(static_cast<std::size_t>(bs) * nr), xb(static_cast<std::size_t>(bs) * px),
      xhat(xb.size()), dxhat(xb.size()), dsym(yb.size()), grad(np);
  Workspace<double> ws;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_sum = 0;
    int batches = 0;
    for (int at = 0; at < opt.pairs; at += bs) {
      const int b = std::min(bs, opt.pairs - at);
      for (int i = 0; i < b; ++i) {
        const int src = order[at + i];
        std::copy_n(ic.y.data() + static_cast<std::size_t>(src) * nr, nr,
                    yb.data() + static_cast<std::size_t>(i) * nr);
        std::copy_n(ic.images.data() + static_cast<std::size_t>(src) * px, px,
                    xb.data() + static_cast<std::size_t>(i) * px);
      }
      codec.decode(yb.data(), b, net.params.data.data(), xhat.data(), ws);
      const std::size_t nx = static_cast<std::size_t>(b) * px;
      double loss = 0;
      const double c2 = 2.0 / static_cast<double>(nx);
      for (std::size_t i = 0; i < nx; ++i) {
        double d = xhat[i] - xb[i];
        loss += d * d;
        dxhat[i] = c2 * d;
      }
      loss /= static_cast<double>(nx);
      require<numeric_error>(std::isfinite(loss), "inversion-net training diverged");
      std::fill(grad.begin(), grad.end(), 0.0);
      codec.decode_backward(dxhat.data(), b, net.params.data.data(), dsym.data(), grad.data(),
                            ws);
      if (opt.clip_norm > 0) {
        double gn = std::sqrt(K.sum_sq(grad.data(), static_cast<int>(np)));
        if (gn > opt.clip_norm) K.scale(opt.clip_norm / gn, grad.data(), static_cast<int>(np));
      }
      ++ost.step;
      const double bc1 = 1.0 - std::pow(0.9, ost.step);
      const double bc2 = 1.0 - std::pow(0.999, ost.step);
      K.adam_step(net.params.data.data(), grad.data(), ost.m.data(), ost.v.data(),
                  static_cast<int>(np), opt.lr, 0.9, 0.999, 1e-8, bc1, bc2);
      loss_sum += loss;
      ++batches;
    }
    net.final_loss = loss_sum / batches;
  }
  return net;
}

std::vector<double> invert_with_net(const Codec<double>& codec, const InversionNet& net,
                                    const std::vector<double>& y, int n) {
  const auto& cfg = codec.config();
  const int px = cfg.pixels(), nr = cfg.n_real();
  require<shape_error>(y.size() == static_cast<std::size_t>(n) * nr,
                       "symbol buffer does not match the image count");
  std::vector<double> out(static_cast<std::size_t>(n) * px);
  Workspace<double> ws;
  const int bs = std::min(64, n);
  for (int at = 0; at < n; at += bs) {
    const int b = std::min(bs, n - at);
    codec.decode(y.data() + static_cast<std::size_t>(at) * nr, b, net.params.data.data(),
                 out.data() + static_cast<std::size_t>(at) * px, ws);
  }
  return out;
}

InvertOptResult invert_features_optimization(const Codec<double>& codec,
                                             const ParamPack<double>& victim,
                                             const std::vector<double>& y, int n,
                                             const InvertOptOptions& opt) {
  require(opt.iterations >= 1, "attack iterations must be >= 1");
  const auto& cfg = codec.config();
  const int px = cfg.pixels(), nr = cfg.n_real();
  require<shape_error>(y.size() == static_cast<std::size_t>(n) * nr,
                       "symbol buffer does not match the image count");

  InvertOptResult res;
  res.recovered.resize(static_cast<std::size_t>(n) * px);
  res.objectives.resize(n);
  std::atomic<int> fallbacks{0};
  std::atomic<int> next{0};

  auto worker = [&] {
    Workspace<double> ws;
    std::vector<double> sym(nr), dsym(nr), target(nr);
    std::vector<double> theta_scratch(victim.data.size());
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      const double* yi = y.data() + static_cast<std::size_t>(i) * nr;
      double s2 = 0;
      for (int j = 0; j < nr; ++j) s2 += yi[j] * yi[j];
      require<numeric_error>(s2 > 0, "intercepted symbols have zero power");
      const double scale = opt.blind_rescale ? std::sqrt(cfg.n_sym() / s2) : 1.0;
      for (int j = 0; j < nr; ++j) target[j] = scale * yi[j];

      Objective fg = [&](const std::vector<double>& x, std::vector<double>* g) {
        codec.encode(x.data(), 1, victim.data.data(), sym.data(), ws);
        double f = 0;
        for (int j = 0; j < nr; ++j) {
          double d = sym[j] - target[j];
          f += d * d;
          dsym[j] = 2.0 * d;
        }
        if (g) {
          g->resize(px);
          std::fill(theta_scratch.begin(), theta_scratch.end(), 0.0);
          codec.encode_backward(dsym.data(), 1, victim.data.data(), g->data(),
                                theta_scratch.data(), ws);
        }
        return f;
      };

      std::vector<double> x0(px);
      Rng rng(derive_seed(opt.seed, "img", static_cast<std::uint64_t>(i)));
      for (auto& v : x0) v = rng.uniform01();

      LbfgsResult r;
      if (opt.optimizer == AttackOptimizer::lbfgs) {
        LbfgsOptions lo = opt.lbfgs;
        lo.iterations = opt.iterations;
        lo.lo = 0.0;
        lo.hi = 1.0;
        r = lbfgs_minimize(fg, std::move(x0), lo);
      } else {
        r = adam_minimize(fg, std::move(x0), opt.iterations, opt.adam_lr, 0.0, 1.0);
      }
      std::copy_n(r.x.data(), px, res.recovered.data() + static_cast<std::size_t>(i) * px);
      res.objectives[i] = r.f;
      fallbacks += r.fallbacks;
    }
  };

  int nt = opt.threads > 0 ? opt.threads : static_cast<int>(std::thread::hardware_concurrency());
  nt = std::clamp(nt, 1, n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errs(nt);
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      try {
        worker();
      } catch (...) {
        errs[t] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  res.fallbacks = fallbacks.load();
  return res;
}

AttackRow attack_row(const std::string& name, const double* recovered, const double* truth,
                     int n, int h, int w) {
  require(n >= 1, "attack row needs at least one image");
  AttackRow row;
  row.name = name;
  const std::size_t px = static_cast<std::size_t>(3) * h * w;
  double se = 0, psnr_sum = 0, ssim_sum = 0;
  for (int i = 0; i < n; ++i) {
    const double* r = recovered + i * px;
    const double* t = truth + i * px;
    double m = mse(r, t, px);
    se += m;
    double p = psnr_db(m, 1.0);
    double s = ssim(r, t, h, w, 3, 1.0);
    row.psnr_per_image.push_back(p);
    row.ssim_per_image.push_back(s);
    psnr_sum += p;
    ssim_sum += s;
  }
  row.mse = se / n;
  row.psnr_db = psnr_db(row.mse, 1.0);
  row.mean_psnr_db = psnr_sum / n;
  row.ssim = ssim_sum / n;
  return row;
}

}  // namespace stsc
