#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "stsc/params.hpp"
#include "stsc/rng.hpp"

namespace stsc {

// Image tensors are row major (batch, channel, height, width) flattened per
// image to 3*H*W values in [0,1].  Channel-facing vectors hold n_real() reals
// per image; consecutive pairs form one complex symbol.
struct CodecConfig {
  int h = 32;
  int w = 32;
  int c = 32;           // embedding dim after patch embed
  int window = 4;       // window side in tokens
  int heads = 4;        // attention heads (both stages)
  int depth = 1;        // swin layers per stage; each layer = plain + shifted block
  int mlp_ratio = 4;    // hidden width multiplier in the block MLPs
  std::uint64_t seed = 0;

  void validate() const;

  int grid1() const { return h / 4; }  // stage-1 token grid side (input is square-checked)
  int grid2() const { return h / 8; }
  int tokens1() const { return (h / 4) * (w / 4); }
  int tokens2() const { return (h / 8) * (w / 8); }
  int n_real() const { return tokens2() * 2 * c; }
  int n_sym() const { return n_real() / 2; }
  int pixels() const { return 3 * h * w; }
  double compression_ratio() const;
};

// Geometry precomputed per stage: window gather orders for the plain and
// shifted blocks, the additive shift mask, and the relative-offset index
// table for the position bias.
struct StageGeom {
  int grid_h = 0, grid_w = 0;
  int dim = 0;
  int weff = 0;   // effective window side, min(window, grid)
  int shift = 0;  // weff / 2
  int t = 0;      // tokens per window
  int nwin = 0;
  std::vector<int> perm0;       // window-order row -> grid-order row (plain)
  std::vector<int> perm1;       // same for the shifted block
  std::vector<double> mask;     // [nwin][t][t], 0 or -1e4; empty when shift == 0
  std::vector<int> bias_index;  // [t][t] -> row in the (2*weff-1)^2 bias table
};

namespace codec_detail {
struct BlockIds {
  int ln1g, ln1b, qkvw, qkvb, projw, projb, ln2g, ln2b, mlp1w, mlp1b, mlp2w, mlp2b;
  int rpb = -1;  // shifted blocks only
};
}  // namespace codec_detail

template <typename T>
struct BlockWork {
  // forward saves
  std::vector<T> x, xw, qkv, p, xa, x1, x1l, m1, m1r;
  std::vector<T> ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
  // backward scratch
  std::vector<T> d1, d2, da, d3, d4, dp, ds;
};

template <typename T>
struct Workspace {
  int batch = 0;
  std::vector<T> tokens48, emb, merged, proj2;
  std::vector<T> prenorm, sumsq;        // pre-normalization channel vector and its power
  std::vector<T> dec_in, lift, expand4c, expand_c, head48, xhat;
  std::vector<BlockWork<T>> enc_s1, enc_s2, dec_s2, dec_s1;
  std::vector<T> g_pix, g_tok, g_vec, g_vec2, g_wide, g_chan;  // gradient scratch
};

// Standalone windowed multi-head attention over one token block, matching the
// in-pipeline computation; used directly by tests and small tools.
template <typename T>
void multi_head_attention(const T* z, int t, int dim, int heads, const T* wqkv, const T* bqkv,
                          const T* wproj, const T* bproj, const T* mask, const T* bias_table,
                          const int* bias_index, T* out);

template <typename T>
class Codec {
 public:
  explicit Codec(const CodecConfig& cfg);

  const CodecConfig& config() const { return cfg_; }
  const std::shared_ptr<const ParamLayout>& layout() const { return layout_; }
  const StageGeom& stage1() const { return s1_; }
  const StageGeom& stage2() const { return s2_; }

  ParamPack<T> make_params() const { return ParamPack<T>(layout_); }
  void init_params(ParamPack<T>& p, std::uint64_t seed) const;

  // images: [batch, 3*h*w]; symbols: [batch, n_real]
  void encode(const T* images, int batch, const T* params, T* symbols, Workspace<T>& ws) const;
  void decode(const T* symbols, int batch, const T* params, T* images_out,
              Workspace<T>& ws) const;

  // Backward passes consume the saves left by the immediately preceding
  // encode/decode on the same workspace.  grad accumulates (caller zeroes).
  // decode_backward: d(images_out) -> d(symbols); encode_backward: d(symbols)
  // -> optional d(images) for input-space attacks.
  void decode_backward(const T* d_images, int batch, const T* params, T* d_symbols, T* grad,
                       Workspace<T>& ws) const;
  void encode_backward(const T* d_symbols, int batch, const T* params, T* d_images, T* grad,
                       Workspace<T>& ws) const;

 private:
  void block_forward(const StageGeom& g, const codec_detail::BlockIds& ids, bool shifted,
                     const T* params, const T* x_in, T* x_out, int batch, BlockWork<T>& bw) const;
  void block_backward(const StageGeom& g, const codec_detail::BlockIds& ids, bool shifted,
                      const T* params, T* d_inout, T* grad, int batch, BlockWork<T>& bw) const;
  void ensure_workspace(Workspace<T>& ws, int batch) const;

  CodecConfig cfg_;
  StageGeom s1_, s2_;
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<codec_detail::BlockIds> enc_s1_ids_, enc_s2_ids_, dec_s2_ids_, dec_s1_ids_;
  int embed_w_, embed_b_, merge_w_, merge_b_, chan_w_, chan_b_;
  int lift_w_, lift_b_, expand_w_, expand_b_, head_w_, head_b_;
  std::vector<int> part_;       // token-element -> pixel offset within one image
  std::vector<int> merge_src_;  // [tokens2 * 4] source stage-1 token per quadrant
};

// Patch pipeline primitives, exposed for direct testing; all are exact
// permutations or concatenations.
std::vector<int> patch_partition_order(int h, int w);
std::vector<int> patch_merge_sources(int grid_h, int grid_w);
StageGeom make_stage_geom(int grid_h, int grid_w, int dim, int window);

extern template class Codec<float>;
extern template class Codec<double>;

}  // namespace stsc
