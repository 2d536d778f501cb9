#include "stsc/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "stsc/kernels.hpp"

namespace stsc {

namespace {
constexpr double kMaskValue = -1e4;
}

void CodecConfig::validate() const {
  require(h > 0 && w > 0 && h % 8 == 0 && w % 8 == 0, "image dims must be positive multiples of 8");
  require(c > 0 && heads > 0 && c % heads == 0, "embedding dim must divide by heads");
  require(2 * c % heads == 0, "stage-2 dim must divide by heads");
  require(window > 0 && window % 2 == 0, "window size must be positive and even");
  require(depth >= 1, "depth must be >= 1");
  require(mlp_ratio >= 1, "mlp_ratio must be >= 1");
  for (auto [gh, gw] : {std::pair{h / 4, w / 4}, std::pair{h / 8, w / 8}}) {
    int weff = std::min({window, gh, gw});
    require(gh % weff == 0 && gw % weff == 0,
            "token grid not tileable by the (clamped) window size");
  }
}

double CodecConfig::compression_ratio() const {
  return static_cast<double>(n_real()) / static_cast<double>(pixels());
}

std::vector<int> patch_partition_order(int h, int w) {
  std::vector<int> order(static_cast<std::size_t>(h / 4) * (w / 4) * 48);
  std::size_t idx = 0;
  for (int gr = 0; gr < h / 4; ++gr)
    for (int gc = 0; gc < w / 4; ++gc)
      for (int ch = 0; ch < 3; ++ch)
        for (int dr = 0; dr < 4; ++dr)
          for (int dc = 0; dc < 4; ++dc)
            order[idx++] = ch * h * w + (gr * 4 + dr) * w + (gc * 4 + dc);
  return order;
}

std::vector<int> patch_merge_sources(int grid_h, int grid_w) {
  require<shape_error>(grid_h % 2 == 0 && grid_w % 2 == 0, "patch merge needs even grid dims");
  std::vector<int> src(static_cast<std::size_t>(grid_h / 2) * (grid_w / 2) * 4);
  std::size_t idx = 0;
  for (int mr = 0; mr < grid_h / 2; ++mr)
    for (int mc = 0; mc < grid_w / 2; ++mc) {
      src[idx++] = (2 * mr) * grid_w + 2 * mc;
      src[idx++] = (2 * mr) * grid_w + 2 * mc + 1;
      src[idx++] = (2 * mr + 1) * grid_w + 2 * mc;
      src[idx++] = (2 * mr + 1) * grid_w + 2 * mc + 1;
    }
  return src;
}

StageGeom make_stage_geom(int grid_h, int grid_w, int dim, int window) {
  StageGeom g;
  g.grid_h = grid_h;
  g.grid_w = grid_w;
  g.dim = dim;
  g.weff = std::min({window, grid_h, grid_w});
  require<shape_error>(grid_h % g.weff == 0 && grid_w % g.weff == 0,
                       "grid not tileable by effective window");
  g.shift = g.weff / 2;
  g.t = g.weff * g.weff;
  g.nwin = (grid_h / g.weff) * (grid_w / g.weff);

  auto build_perm = [&](int shift, std::vector<int>& perm) {
    perm.resize(static_cast<std::size_t>(grid_h) * grid_w);
    std::size_t idx = 0;
    for (int wr = 0; wr < grid_h / g.weff; ++wr)
      for (int wc = 0; wc < grid_w / g.weff; ++wc)
        for (int i = 0; i < g.weff; ++i)
          for (int j = 0; j < g.weff; ++j) {
            int r = wr * g.weff + i, c = wc * g.weff + j;  // shifted-map coordinates
            int ro = (r + shift) % grid_h, co = (c + shift) % grid_w;
            perm[idx++] = ro * grid_w + co;
          }
  };
  build_perm(0, g.perm0);
  build_perm(g.shift, g.perm1);

  if (g.shift > 0) {
    // tokens whose pre-shift origin wrapped around belong to a different
    // contiguous source region; attention across the seam is suppressed
    g.mask.assign(static_cast<std::size_t>(g.nwin) * g.t * g.t, 0.0);
    std::size_t widx = 0;
    for (int wr = 0; wr < grid_h / g.weff; ++wr)
      for (int wc = 0; wc < grid_w / g.weff; ++wc, ++widx) {
        std::vector<int> region(g.t);
        int ti = 0;
        for (int i = 0; i < g.weff; ++i)
          for (int j = 0; j < g.weff; ++j, ++ti) {
            int r = wr * g.weff + i, c = wc * g.weff + j;
            int wrap_r = (r + g.shift) >= grid_h ? 1 : 0;
            int wrap_c = (c + g.shift) >= grid_w ? 1 : 0;
            region[ti] = wrap_r * 2 + wrap_c;
          }
        double* m = g.mask.data() + widx * g.t * g.t;
        for (int a = 0; a < g.t; ++a)
          for (int b = 0; b < g.t; ++b)
            m[a * g.t + b] = region[a] == region[b] ? 0.0 : kMaskValue;
      }
  }

  int span = 2 * g.weff - 1;
  g.bias_index.resize(static_cast<std::size_t>(g.t) * g.t);
  for (int a = 0; a < g.t; ++a)
    for (int b = 0; b < g.t; ++b) {
      int dr = a / g.weff - b / g.weff + g.weff - 1;
      int dc = a % g.weff - b % g.weff + g.weff - 1;
      g.bias_index[a * g.t + b] = dr * span + dc;
    }
  return g;
}

template <typename T>
Codec<T>::Codec(const CodecConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  s1_ = make_stage_geom(cfg_.h / 4, cfg_.w / 4, cfg_.c, cfg_.window);
  s2_ = make_stage_geom(cfg_.h / 8, cfg_.w / 8, 2 * cfg_.c, cfg_.window);
  part_ = patch_partition_order(cfg_.h, cfg_.w);
  merge_src_ = patch_merge_sources(cfg_.h / 4, cfg_.w / 4);

  auto layout = std::make_shared<ParamLayout>();
  auto add_block = [&](const std::string& prefix, int dim, int weff,
                       bool shifted) -> codec_detail::BlockIds {
    codec_detail::BlockIds ids;
    int hd = dim * cfg_.mlp_ratio;
    ids.ln1g = layout->add(prefix + ".ln1.g", {dim});
    ids.ln1b = layout->add(prefix + ".ln1.b", {dim});
    ids.qkvw = layout->add(prefix + ".qkv.w", {dim, 3 * dim});
    ids.qkvb = layout->add(prefix + ".qkv.b", {3 * dim});
    ids.projw = layout->add(prefix + ".proj.w", {dim, dim});
    ids.projb = layout->add(prefix + ".proj.b", {dim});
    ids.ln2g = layout->add(prefix + ".ln2.g", {dim});
    ids.ln2b = layout->add(prefix + ".ln2.b", {dim});
    ids.mlp1w = layout->add(prefix + ".mlp1.w", {dim, hd});
    ids.mlp1b = layout->add(prefix + ".mlp1.b", {hd});
    ids.mlp2w = layout->add(prefix + ".mlp2.w", {hd, dim});
    ids.mlp2b = layout->add(prefix + ".mlp2.b", {dim});
    if (shifted) {
      int span = 2 * weff - 1;
      ids.rpb = layout->add(prefix + ".rpb", {cfg_.heads, span * span});
    }
    return ids;
  };
  auto add_stage = [&](const std::string& prefix, const StageGeom& g,
                       std::vector<codec_detail::BlockIds>& out) {
    for (int l = 0; l < cfg_.depth; ++l) {
      std::string lp = prefix + ".l" + std::to_string(l);
      out.push_back(add_block(lp + ".b0", g.dim, g.weff, false));
      out.push_back(add_block(lp + ".b1", g.dim, g.weff, true));
    }
  };

  int n = cfg_.n_real();
  embed_w_ = layout->add("enc.embed.w", {48, cfg_.c});
  embed_b_ = layout->add("enc.embed.b", {cfg_.c});
  add_stage("enc.s1", s1_, enc_s1_ids_);
  merge_w_ = layout->add("enc.merge.w", {4 * cfg_.c, 2 * cfg_.c});
  merge_b_ = layout->add("enc.merge.b", {2 * cfg_.c});
  add_stage("enc.s2", s2_, enc_s2_ids_);
  chan_w_ = layout->add("enc.chan.w", {n, n});
  chan_b_ = layout->add("enc.chan.b", {n});
  lift_w_ = layout->add("dec.lift.w", {n, n});
  lift_b_ = layout->add("dec.lift.b", {n});
  add_stage("dec.s2", s2_, dec_s2_ids_);
  expand_w_ = layout->add("dec.expand.w", {2 * cfg_.c, 4 * cfg_.c});
  expand_b_ = layout->add("dec.expand.b", {4 * cfg_.c});
  add_stage("dec.s1", s1_, dec_s1_ids_);
  head_w_ = layout->add("dec.head.w", {cfg_.c, 48});
  head_b_ = layout->add("dec.head.b", {48});
  layout_ = std::move(layout);
}

template <typename T>
void Codec<T>::init_params(ParamPack<T>& p, std::uint64_t seed) const {
  require<shape_error>(p.layout && p.layout->same_shapes(*layout_), "param pack layout mismatch");
  Rng rng(derive_seed(seed, "init"));
  auto trunc_normal = [&rng]() {
    double z;
    do {
      z = rng.normal();
    } while (std::abs(z) > 2.0);
    return 0.02 * z;
  };
  for (const auto& a : p.layout->arrays()) {
    T* dst = p.data.data() + a.offset;
    if (a.name.ends_with(".rpb")) {
      std::fill_n(dst, a.size, T(0));
    } else if (a.name.ends_with(".g")) {
      std::fill_n(dst, a.size, T(1));
    } else if (a.name.ends_with(".w")) {
      for (std::int64_t i = 0; i < a.size; ++i) dst[i] = static_cast<T>(trunc_normal());
    } else {
      std::fill_n(dst, a.size, T(0));
    }
  }
}

namespace {

template <typename T>
void gather_rows(const T* src, const std::vector<int>& perm, T* dst, int batch, int tokens,
                 int dim) {
  for (int b = 0; b < batch; ++b) {
    const T* sb = src + static_cast<std::size_t>(b) * tokens * dim;
    T* db = dst + static_cast<std::size_t>(b) * tokens * dim;
    for (int r = 0; r < tokens; ++r)
      std::copy_n(sb + static_cast<std::size_t>(perm[r]) * dim, dim,
                  db + static_cast<std::size_t>(r) * dim);
  }
}

template <typename T>
void scatter_rows(const T* src, const std::vector<int>& perm, T* dst, int batch, int tokens,
                  int dim) {
  for (int b = 0; b < batch; ++b) {
    const T* sb = src + static_cast<std::size_t>(b) * tokens * dim;
    T* db = dst + static_cast<std::size_t>(b) * tokens * dim;
    for (int r = 0; r < tokens; ++r)
      std::copy_n(sb + static_cast<std::size_t>(r) * dim, dim,
                  db + static_cast<std::size_t>(perm[r]) * dim);
  }
}

template <typename T>
void resize_block_work(BlockWork<T>& bw, int batch, const StageGeom& g, int heads,
                       int mlp_ratio) {
  std::size_t bt = static_cast<std::size_t>(batch) * g.grid_h * g.grid_w;
  std::size_t d = g.dim, hd = d * mlp_ratio;
  auto ensure = [](std::vector<T>& v, std::size_t n) {
    if (v.size() < n) v.resize(n);
  };
  ensure(bw.x, bt * d);
  ensure(bw.xw, bt * d);
  ensure(bw.qkv, bt * 3 * d);
  ensure(bw.p, static_cast<std::size_t>(batch) * g.nwin * heads * g.t * g.t);
  ensure(bw.xa, bt * d);
  ensure(bw.x1, bt * d);
  ensure(bw.x1l, bt * d);
  ensure(bw.m1, bt * hd);
  ensure(bw.m1r, bt * hd);
  ensure(bw.ln1_mean, bt);
  ensure(bw.ln1_rstd, bt);
  ensure(bw.ln2_mean, bt);
  ensure(bw.ln2_rstd, bt);
  ensure(bw.d1, bt * d);
  ensure(bw.d2, bt * d);
  ensure(bw.da, bt * d);
  ensure(bw.d3, bt * 3 * d);
  ensure(bw.d4, bt * hd);
  ensure(bw.dp, static_cast<std::size_t>(g.t) * g.t);
  ensure(bw.ds, static_cast<std::size_t>(g.t) * g.t);
}

}  // namespace

template <typename T>
void Codec<T>::ensure_workspace(Workspace<T>& ws, int batch) const {
  if (ws.batch >= batch) return;
  ws.batch = batch;
  std::size_t b = batch;
  std::size_t t1 = cfg_.tokens1(), t2 = cfg_.tokens2(), c = cfg_.c, n = cfg_.n_real();
  auto ensure = [](std::vector<T>& v, std::size_t sz) {
    if (v.size() < sz) v.resize(sz);
  };
  ensure(ws.tokens48, b * t1 * 48);
  ensure(ws.emb, b * t1 * c);
  ensure(ws.merged, b * t2 * 4 * c);
  ensure(ws.proj2, b * t2 * 2 * c);
  ensure(ws.prenorm, b * n);
  ensure(ws.sumsq, b);
  ensure(ws.dec_in, b * n);
  ensure(ws.lift, b * n);
  ensure(ws.expand4c, b * t2 * 4 * c);
  ensure(ws.expand_c, b * t1 * c);
  ensure(ws.head48, b * t1 * 48);
  ensure(ws.xhat, b * cfg_.pixels());
  ensure(ws.g_pix, b * cfg_.pixels());
  ensure(ws.g_tok, b * t1 * 48);
  ensure(ws.g_vec, b * t1 * c);
  ensure(ws.g_vec2, b * n);
  ensure(ws.g_wide, b * t2 * 4 * c);
  ensure(ws.g_chan, b * n);
  auto ensure_blocks = [&](std::vector<BlockWork<T>>& blocks, const StageGeom& g) {
    blocks.resize(static_cast<std::size_t>(cfg_.depth) * 2);
    for (auto& bw : blocks) resize_block_work(bw, batch, g, cfg_.heads, cfg_.mlp_ratio);
  };
  ensure_blocks(ws.enc_s1, s1_);
  ensure_blocks(ws.enc_s2, s2_);
  ensure_blocks(ws.dec_s2, s2_);
  ensure_blocks(ws.dec_s1, s1_);
}

template <typename T>
void Codec<T>::block_forward(const StageGeom& g, const codec_detail::BlockIds& ids, bool shifted,
                             const T* params, const T* x_in, T* x_out, int batch,
                             BlockWork<T>& bw) const {
  const auto& ops = kernels::ops<T>();
  const auto& perm = shifted ? g.perm1 : g.perm0;
  const int tokens = g.grid_h * g.grid_w;
  const int bt = batch * tokens;
  const int d = g.dim, hd = d * cfg_.mlp_ratio;
  const int dh = d / cfg_.heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  auto P = [&](int id) { return params + layout_->at(id).offset; };

  std::copy_n(x_in, static_cast<std::size_t>(bt) * d, bw.x.data());
  ops.layernorm_fwd(bw.x.data(), P(ids.ln1g), P(ids.ln1b), bw.d1.data(), bw.ln1_mean.data(),
                    bw.ln1_rstd.data(), bt, d, static_cast<T>(1e-5));
  gather_rows(bw.d1.data(), perm, bw.xw.data(), batch, tokens, d);
  ops.gemm_nn(bw.xw.data(), P(ids.qkvw), bw.qkv.data(), bt, d, 3 * d, false);
  ops.add_bias(bw.qkv.data(), P(ids.qkvb), bt, 3 * d);

  const T* rpb = ids.rpb >= 0 ? P(ids.rpb) : nullptr;
  const int span2 = shifted ? (2 * g.weff - 1) * (2 * g.weff - 1) : 0;
  for (int b = 0; b < batch; ++b)
    for (int win = 0; win < g.nwin; ++win) {
      const int row0 = b * tokens + win * g.t;
      const double* mask =
          (shifted && !g.mask.empty()) ? g.mask.data() + static_cast<std::size_t>(win) * g.t * g.t
                                       : nullptr;
      for (int h = 0; h < cfg_.heads; ++h) {
        const T* q = bw.qkv.data() + static_cast<std::size_t>(row0) * 3 * d + h * dh;
        const T* k = q + d;
        const T* v = q + 2 * d;
        T* p = bw.p.data() +
               (static_cast<std::size_t>(b) * g.nwin * cfg_.heads + win * cfg_.heads + h) * g.t *
                   g.t;
        ops.attn_scores(q, 3 * d, k, 3 * d, p, g.t, dh, scale, false);
        if (shifted) {
          const T* bias = rpb + static_cast<std::size_t>(h) * span2;
          for (int a = 0; a < g.t; ++a)
            for (int bb = 0; bb < g.t; ++bb) {
              T add = bias[g.bias_index[a * g.t + bb]];
              if (mask) add += static_cast<T>(mask[a * g.t + bb]);
              p[a * g.t + bb] += add;
            }
        }
        ops.softmax_rows(p, g.t, g.t);
        ops.attn_mix(p, v, 3 * d, bw.xa.data() + static_cast<std::size_t>(row0) * d + h * dh, d,
                     g.t, dh, T(1), false);
      }
    }

  ops.gemm_nn(bw.xa.data(), P(ids.projw), bw.d1.data(), bt, d, d, false);
  ops.add_bias(bw.d1.data(), P(ids.projb), bt, d);
  scatter_rows(bw.d1.data(), perm, bw.x1.data(), batch, tokens, d);
  ops.axpy(T(1), bw.x.data(), bw.x1.data(), bt * d);

  ops.layernorm_fwd(bw.x1.data(), P(ids.ln2g), P(ids.ln2b), bw.x1l.data(), bw.ln2_mean.data(),
                    bw.ln2_rstd.data(), bt, d, static_cast<T>(1e-5));
  ops.gemm_nn(bw.x1l.data(), P(ids.mlp1w), bw.m1.data(), bt, d, hd, false);
  ops.add_bias(bw.m1.data(), P(ids.mlp1b), bt, hd);
  ops.relu_fwd(bw.m1.data(), bw.m1r.data(), bt * hd);
  ops.gemm_nn(bw.m1r.data(), P(ids.mlp2w), bw.d1.data(), bt, hd, d, false);
  ops.add_bias(bw.d1.data(), P(ids.mlp2b), bt, d);

  std::copy_n(bw.x1.data(), static_cast<std::size_t>(bt) * d, x_out);
  ops.axpy(T(1), bw.d1.data(), x_out, bt * d);
}

template <typename T>
void Codec<T>::block_backward(const StageGeom& g, const codec_detail::BlockIds& ids, bool shifted,
                              const T* params, T* d_inout, T* grad, int batch,
                              BlockWork<T>& bw) const {
  const auto& ops = kernels::ops<T>();
  const auto& perm = shifted ? g.perm1 : g.perm0;
  const int tokens = g.grid_h * g.grid_w;
  const int bt = batch * tokens;
  const int d = g.dim, hd = d * cfg_.mlp_ratio;
  const int dh = d / cfg_.heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  auto P = [&](int id) { return params + layout_->at(id).offset; };
  auto G = [&](int id) { return grad + layout_->at(id).offset; };

  // mlp branch
  ops.gemm_tn_acc(bw.m1r.data(), d_inout, G(ids.mlp2w), hd, bt, d);
  ops.bias_grad_acc(d_inout, G(ids.mlp2b), bt, d);
  ops.gemm_nt(d_inout, P(ids.mlp2w), bw.d4.data(), bt, d, hd, false);
  ops.relu_bwd(bw.m1.data(), bw.d4.data(), bw.d4.data(), bt * hd);
  ops.gemm_tn_acc(bw.x1l.data(), bw.d4.data(), G(ids.mlp1w), d, bt, hd);
  ops.bias_grad_acc(bw.d4.data(), G(ids.mlp1b), bt, hd);
  ops.gemm_nt(bw.d4.data(), P(ids.mlp1w), bw.d1.data(), bt, hd, d, false);
  ops.layernorm_bwd(bw.d1.data(), bw.x1.data(), P(ids.ln2g), bw.ln2_mean.data(),
                    bw.ln2_rstd.data(), bw.d2.data(), G(ids.ln2g), G(ids.ln2b), bt, d);
  ops.axpy(T(1), d_inout, bw.d2.data(), bt * d);  // residual: d2 = d(x1)

  // attention branch
  gather_rows(bw.d2.data(), perm, bw.d1.data(), batch, tokens, d);  // d1 = d(proj out)
  ops.gemm_tn_acc(bw.xa.data(), bw.d1.data(), G(ids.projw), d, bt, d);
  ops.bias_grad_acc(bw.d1.data(), G(ids.projb), bt, d);
  ops.gemm_nt(bw.d1.data(), P(ids.projw), bw.da.data(), bt, d, d, false);  // da = d(attn out)

  std::fill_n(bw.d3.data(), static_cast<std::size_t>(bt) * 3 * d, T(0));
  T* rpb_grad = ids.rpb >= 0 ? G(ids.rpb) : nullptr;
  const int span2 = shifted ? (2 * g.weff - 1) * (2 * g.weff - 1) : 0;
  for (int b = 0; b < batch; ++b)
    for (int win = 0; win < g.nwin; ++win) {
      const int row0 = b * tokens + win * g.t;
      for (int h = 0; h < cfg_.heads; ++h) {
        const T* q = bw.qkv.data() + static_cast<std::size_t>(row0) * 3 * d + h * dh;
        const T* k = q + d;
        const T* v = q + 2 * d;
        T* dq = bw.d3.data() + static_cast<std::size_t>(row0) * 3 * d + h * dh;
        T* dk = dq + d;
        T* dv = dq + 2 * d;
        const T* p = bw.p.data() +
                     (static_cast<std::size_t>(b) * g.nwin * cfg_.heads + win * cfg_.heads + h) *
                         g.t * g.t;
        const T* dout = bw.da.data() + static_cast<std::size_t>(row0) * d + h * dh;

        ops.attn_scores(dout, d, v, 3 * d, bw.dp.data(), g.t, dh, T(1), false);
        for (int a = 0; a < g.t; ++a) {
          const T* pr = p + a * g.t;
          T* dpr = bw.dp.data() + a * g.t;
          T* dsr = bw.ds.data() + a * g.t;
          T dot = T(0);
          for (int j = 0; j < g.t; ++j) dot += pr[j] * dpr[j];
          for (int j = 0; j < g.t; ++j) dsr[j] = pr[j] * (dpr[j] - dot);
        }
        if (shifted && rpb_grad) {
          T* bg = rpb_grad + static_cast<std::size_t>(h) * span2;
          for (int a = 0; a < g.t * g.t; ++a) bg[g.bias_index[a]] += bw.ds[a];
        }
        ops.attn_mix_tn(p, dout, d, dv, 3 * d, g.t, dh, T(1));
        ops.attn_mix(bw.ds.data(), k, 3 * d, dq, 3 * d, g.t, dh, scale, true);
        ops.attn_mix_tn(bw.ds.data(), q, 3 * d, dk, 3 * d, g.t, dh, scale);
      }
    }

  ops.gemm_tn_acc(bw.xw.data(), bw.d3.data(), G(ids.qkvw), d, bt, 3 * d);
  ops.bias_grad_acc(bw.d3.data(), G(ids.qkvb), bt, 3 * d);
  ops.gemm_nt(bw.d3.data(), P(ids.qkvw), bw.d1.data(), bt, 3 * d, d, false);  // d1 = d(xw)
  scatter_rows(bw.d1.data(), perm, bw.da.data(), batch, tokens, d);           // da = d(ln1 out)
  ops.layernorm_bwd(bw.da.data(), bw.x.data(), P(ids.ln1g), bw.ln1_mean.data(),
                    bw.ln1_rstd.data(), bw.d1.data(), G(ids.ln1g), G(ids.ln1b), bt, d);
  for (int i = 0; i < bt * d; ++i) d_inout[i] = bw.d1[i] + bw.d2[i];
}

template <typename T>
void Codec<T>::encode(const T* images, int batch, const T* params, T* symbols,
                      Workspace<T>& ws) const {
  require<shape_error>(batch >= 1, "batch must be >= 1");
  ensure_workspace(ws, batch);
  const auto& ops = kernels::ops<T>();
  const int t1 = cfg_.tokens1(), t2 = cfg_.tokens2(), c = cfg_.c, n = cfg_.n_real();
  const int pix = cfg_.pixels();
  auto P = [&](int id) { return params + layout_->at(id).offset; };

  for (int b = 0; b < batch; ++b) {
    const T* img = images + static_cast<std::size_t>(b) * pix;
    T* tok = ws.tokens48.data() + static_cast<std::size_t>(b) * t1 * 48;
    for (std::size_t i = 0; i < part_.size(); ++i) tok[i] = img[part_[i]];
  }
  ops.gemm_nn(ws.tokens48.data(), P(embed_w_), ws.emb.data(), batch * t1, 48, c, false);
  ops.add_bias(ws.emb.data(), P(embed_b_), batch * t1, c);

  for (std::size_t i = 0; i < enc_s1_ids_.size(); ++i)
    block_forward(s1_, enc_s1_ids_[i], i % 2 == 1, params, ws.emb.data(), ws.emb.data(), batch,
                  ws.enc_s1[i]);

  for (int b = 0; b < batch; ++b) {
    const T* src = ws.emb.data() + static_cast<std::size_t>(b) * t1 * c;
    T* dst = ws.merged.data() + static_cast<std::size_t>(b) * t2 * 4 * c;
    for (int m = 0; m < t2; ++m)
      for (int q = 0; q < 4; ++q)
        std::copy_n(src + static_cast<std::size_t>(merge_src_[m * 4 + q]) * c, c,
                    dst + static_cast<std::size_t>(m) * 4 * c + q * c);
  }
  ops.gemm_nn(ws.merged.data(), P(merge_w_), ws.proj2.data(), batch * t2, 4 * c, 2 * c, false);
  ops.add_bias(ws.proj2.data(), P(merge_b_), batch * t2, 2 * c);

  for (std::size_t i = 0; i < enc_s2_ids_.size(); ++i)
    block_forward(s2_, enc_s2_ids_[i], i % 2 == 1, params, ws.proj2.data(), ws.proj2.data(),
                  batch, ws.enc_s2[i]);

  // rows of proj2 for one image are contiguous, so the flatten is a reinterpret
  ops.gemm_nn(ws.proj2.data(), P(chan_w_), ws.prenorm.data(), batch, n, n, false);
  ops.add_bias(ws.prenorm.data(), P(chan_b_), batch, n);

  const double n_sym = cfg_.n_sym();
  for (int b = 0; b < batch; ++b) {
    const T* x = ws.prenorm.data() + static_cast<std::size_t>(b) * n;
    T s = ops.sum_sq(x, n);
    require<numeric_error>(s > T(0), "zero-power encoder output cannot be normalized");
    ws.sumsq[b] = s;
    T alpha = static_cast<T>(std::sqrt(n_sym / static_cast<double>(s)));
    T* out = symbols + static_cast<std::size_t>(b) * n;
    for (int j = 0; j < n; ++j) out[j] = alpha * x[j];
  }
}

template <typename T>
void Codec<T>::encode_backward(const T* d_symbols, int batch, const T* params, T* d_images,
                               T* grad, Workspace<T>& ws) const {
  const auto& ops = kernels::ops<T>();
  const int t1 = cfg_.tokens1(), t2 = cfg_.tokens2(), c = cfg_.c, n = cfg_.n_real();
  const int pix = cfg_.pixels();
  auto P = [&](int id) { return params + layout_->at(id).offset; };
  auto G = [&](int id) { return grad + layout_->at(id).offset; };

  const double n_sym = cfg_.n_sym();
  for (int b = 0; b < batch; ++b) {
    const T* gsym = d_symbols + static_cast<std::size_t>(b) * n;
    const T* x = ws.prenorm.data() + static_cast<std::size_t>(b) * n;
    T* out = ws.g_chan.data() + static_cast<std::size_t>(b) * n;
    T s = ws.sumsq[b];
    T alpha = static_cast<T>(std::sqrt(n_sym / static_cast<double>(s)));
    T gx = ops.dot(gsym, x, n);
    T coef = alpha * gx / s;
    for (int j = 0; j < n; ++j) out[j] = alpha * gsym[j] - coef * x[j];
  }

  ops.gemm_tn_acc(ws.proj2.data(), ws.g_chan.data(), G(chan_w_), n, batch, n);
  ops.bias_grad_acc(ws.g_chan.data(), G(chan_b_), batch, n);
  ops.gemm_nt(ws.g_chan.data(), P(chan_w_), ws.g_vec2.data(), batch, n, n, false);

  for (int i = static_cast<int>(enc_s2_ids_.size()) - 1; i >= 0; --i)
    block_backward(s2_, enc_s2_ids_[i], i % 2 == 1, params, ws.g_vec2.data(), grad, batch,
                   ws.enc_s2[i]);

  ops.gemm_tn_acc(ws.merged.data(), ws.g_vec2.data(), G(merge_w_), 4 * c, batch * t2, 2 * c);
  ops.bias_grad_acc(ws.g_vec2.data(), G(merge_b_), batch * t2, 2 * c);
  ops.gemm_nt(ws.g_vec2.data(), P(merge_w_), ws.g_wide.data(), batch * t2, 2 * c, 4 * c, false);

  for (int b = 0; b < batch; ++b) {
    const T* src = ws.g_wide.data() + static_cast<std::size_t>(b) * t2 * 4 * c;
    T* dst = ws.g_vec.data() + static_cast<std::size_t>(b) * t1 * c;
    for (int m = 0; m < t2; ++m)
      for (int q = 0; q < 4; ++q)
        std::copy_n(src + static_cast<std::size_t>(m) * 4 * c + q * c, c,
                    dst + static_cast<std::size_t>(merge_src_[m * 4 + q]) * c);
  }

  for (int i = static_cast<int>(enc_s1_ids_.size()) - 1; i >= 0; --i)
    block_backward(s1_, enc_s1_ids_[i], i % 2 == 1, params, ws.g_vec.data(), grad, batch,
                   ws.enc_s1[i]);

  ops.gemm_tn_acc(ws.tokens48.data(), ws.g_vec.data(), G(embed_w_), 48, batch * t1, c);
  ops.bias_grad_acc(ws.g_vec.data(), G(embed_b_), batch * t1, c);
  if (d_images) {
    ops.gemm_nt(ws.g_vec.data(), P(embed_w_), ws.g_tok.data(), batch * t1, c, 48, false);
    for (int b = 0; b < batch; ++b) {
      const T* gt = ws.g_tok.data() + static_cast<std::size_t>(b) * t1 * 48;
      T* gi = d_images + static_cast<std::size_t>(b) * pix;
      for (std::size_t i = 0; i < part_.size(); ++i) gi[part_[i]] = gt[i];
    }
  }
}

template <typename T>
void Codec<T>::decode(const T* symbols, int batch, const T* params, T* images_out,
                      Workspace<T>& ws) const {
  require<shape_error>(batch >= 1, "batch must be >= 1");
  ensure_workspace(ws, batch);
  const auto& ops = kernels::ops<T>();
  const int t1 = cfg_.tokens1(), t2 = cfg_.tokens2(), c = cfg_.c, n = cfg_.n_real();
  const int pix = cfg_.pixels();
  auto P = [&](int id) { return params + layout_->at(id).offset; };

  std::copy_n(symbols, static_cast<std::size_t>(batch) * n, ws.dec_in.data());
  ops.gemm_nn(ws.dec_in.data(), P(lift_w_), ws.lift.data(), batch, n, n, false);
  ops.add_bias(ws.lift.data(), P(lift_b_), batch, n);

  for (std::size_t i = 0; i < dec_s2_ids_.size(); ++i)
    block_forward(s2_, dec_s2_ids_[i], i % 2 == 1, params, ws.lift.data(), ws.lift.data(), batch,
                  ws.dec_s2[i]);

  ops.gemm_nn(ws.lift.data(), P(expand_w_), ws.expand4c.data(), batch * t2, 2 * c, 4 * c, false);
  ops.add_bias(ws.expand4c.data(), P(expand_b_), batch * t2, 4 * c);

  for (int b = 0; b < batch; ++b) {
    const T* src = ws.expand4c.data() + static_cast<std::size_t>(b) * t2 * 4 * c;
    T* dst = ws.expand_c.data() + static_cast<std::size_t>(b) * t1 * c;
    for (int m = 0; m < t2; ++m)
      for (int q = 0; q < 4; ++q)
        std::copy_n(src + static_cast<std::size_t>(m) * 4 * c + q * c, c,
                    dst + static_cast<std::size_t>(merge_src_[m * 4 + q]) * c);
  }

  for (std::size_t i = 0; i < dec_s1_ids_.size(); ++i)
    block_forward(s1_, dec_s1_ids_[i], i % 2 == 1, params, ws.expand_c.data(),
                  ws.expand_c.data(), batch, ws.dec_s1[i]);

  ops.gemm_nn(ws.expand_c.data(), P(head_w_), ws.head48.data(), batch * t1, c, 48, false);
  ops.add_bias(ws.head48.data(), P(head_b_), batch * t1, 48);

  for (int b = 0; b < batch; ++b) {
    const T* tok = ws.head48.data() + static_cast<std::size_t>(b) * t1 * 48;
    T* img = ws.xhat.data() + static_cast<std::size_t>(b) * pix;
    for (std::size_t i = 0; i < part_.size(); ++i) img[part_[i]] = tok[i];
  }
  ops.sigmoid_fwd(ws.xhat.data(), ws.xhat.data(), batch * pix);
  std::copy_n(ws.xhat.data(), static_cast<std::size_t>(batch) * pix, images_out);
}

template <typename T>
void Codec<T>::decode_backward(const T* d_images, int batch, const T* params, T* d_symbols,
                               T* grad, Workspace<T>& ws) const {
  const auto& ops = kernels::ops<T>();
  const int t1 = cfg_.tokens1(), t2 = cfg_.tokens2(), c = cfg_.c, n = cfg_.n_real();
  const int pix = cfg_.pixels();
  auto P = [&](int id) { return params + layout_->at(id).offset; };
  auto G = [&](int id) { return grad + layout_->at(id).offset; };

  ops.sigmoid_bwd(ws.xhat.data(), d_images, ws.g_pix.data(), batch * pix);
  for (int b = 0; b < batch; ++b) {
    const T* gp = ws.g_pix.data() + static_cast<std::size_t>(b) * pix;
    T* gt = ws.g_tok.data() + static_cast<std::size_t>(b) * t1 * 48;
    for (std::size_t i = 0; i < part_.size(); ++i) gt[i] = gp[part_[i]];
  }

  ops.gemm_tn_acc(ws.expand_c.data(), ws.g_tok.data(), G(head_w_), c, batch * t1, 48);
  ops.bias_grad_acc(ws.g_tok.data(), G(head_b_), batch * t1, 48);
  ops.gemm_nt(ws.g_tok.data(), P(head_w_), ws.g_vec.data(), batch * t1, 48, c, false);

  for (int i = static_cast<int>(dec_s1_ids_.size()) - 1; i >= 0; --i)
    block_backward(s1_, dec_s1_ids_[i], i % 2 == 1, params, ws.g_vec.data(), grad, batch,
                   ws.dec_s1[i]);

  for (int b = 0; b < batch; ++b) {
    const T* src = ws.g_vec.data() + static_cast<std::size_t>(b) * t1 * c;
    T* dst = ws.g_wide.data() + static_cast<std::size_t>(b) * t2 * 4 * c;
    for (int m = 0; m < t2; ++m)
      for (int q = 0; q < 4; ++q)
        std::copy_n(src + static_cast<std::size_t>(merge_src_[m * 4 + q]) * c, c,
                    dst + static_cast<std::size_t>(m) * 4 * c + q * c);
  }

  ops.gemm_tn_acc(ws.lift.data(), ws.g_wide.data(), G(expand_w_), 2 * c, batch * t2, 4 * c);
  ops.bias_grad_acc(ws.g_wide.data(), G(expand_b_), batch * t2, 4 * c);
  ops.gemm_nt(ws.g_wide.data(), P(expand_w_), ws.g_vec2.data(), batch * t2, 4 * c, 2 * c, false);

  for (int i = static_cast<int>(dec_s2_ids_.size()) - 1; i >= 0; --i)
    block_backward(s2_, dec_s2_ids_[i], i % 2 == 1, params, ws.g_vec2.data(), grad, batch,
                   ws.dec_s2[i]);

  ops.gemm_tn_acc(ws.dec_in.data(), ws.g_vec2.data(), G(lift_w_), n, batch, n);
  ops.bias_grad_acc(ws.g_vec2.data(), G(lift_b_), batch, n);
  ops.gemm_nt(ws.g_vec2.data(), P(lift_w_), d_symbols, batch, n, n, false);
}

template <typename T>
void multi_head_attention(const T* z, int t, int dim, int heads, const T* wqkv, const T* bqkv,
                          const T* wproj, const T* bproj, const T* mask, const T* bias_table,
                          const int* bias_index, T* out) {
  require<shape_error>(dim % heads == 0, "dim must divide by heads");
  const auto& ops = kernels::ops<T>();
  const int dh = dim / heads;
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  int weff = static_cast<int>(std::lround(std::sqrt(static_cast<double>(t))));
  require<shape_error>(weff * weff == t, "token count must be a square window");
  const int span2 = (2 * weff - 1) * (2 * weff - 1);
  std::vector<T> qkv(static_cast<std::size_t>(t) * 3 * dim);
  std::vector<T> attn(static_cast<std::size_t>(t) * dim);
  std::vector<T> p(static_cast<std::size_t>(t) * t);
  ops.gemm_nn(z, wqkv, qkv.data(), t, dim, 3 * dim, false);
  ops.add_bias(qkv.data(), bqkv, t, 3 * dim);
  for (int h = 0; h < heads; ++h) {
    const T* q = qkv.data() + h * dh;
    const T* k = q + dim;
    const T* v = q + 2 * dim;
    ops.attn_scores(q, 3 * dim, k, 3 * dim, p.data(), t, dh, scale, false);
    for (int a = 0; a < t * t; ++a) {
      if (bias_table && bias_index) p[a] += bias_table[h * span2 + bias_index[a]];
      if (mask) p[a] += mask[a];
    }
    ops.softmax_rows(p.data(), t, t);
    ops.attn_mix(p.data(), v, 3 * dim, attn.data() + h * dh, dim, t, dh, T(1), false);
  }
  ops.gemm_nn(attn.data(), wproj, out, t, dim, dim, false);
  ops.add_bias(out, bproj, t, dim);
}

template class Codec<float>;
template class Codec<double>;
template void multi_head_attention<float>(const float*, int, int, int, const float*, const float*,
                                          const float*, const float*, const float*, const float*,
                                          const int*, float*);
template void multi_head_attention<double>(const double*, int, int, int, const double*,
                                           const double*, const double*, const double*,
                                           const double*, const double*, const int*, double*);

}  // namespace stsc
