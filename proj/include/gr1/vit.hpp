#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "gr1/nn.hpp"
#include "gr1/patches.hpp"
#include "gr1/tensor.hpp"
#include "gr1/types.hpp"

namespace gr1 {

// CLS vector plus per-patch token matrix (P x d_img).
template <class S>
struct ImageEmbedding {
  Eigen::Matrix<S, Eigen::Dynamic, 1> cls;
  MatX<S> patches;
};

struct VitConfig {
  int image_size = 64;
  int patch_size = 8;
  int d_img = 64;
  int layers = 2;
  int heads = 4;
  int n_patches() const {
    return (image_size / patch_size) * (image_size / patch_size);
  }
  int patch_dim() const { return 3 * patch_size * patch_size; }
};

// Small image transformer. Pre-trained in-repo by masked patch
// reconstruction, then frozen: encode() never tracks gradients.
template <class S>
class VitEncoder {
 public:
  VitEncoder(ParamStore<S>& store, const VitConfig& cfg, Rng& rng,
             bool trainable)
      : cfg_(cfg), store_(&store) {
    const std::string p = "frozen/vit.";
    patch_embed_ = LinearParams<S>::create(store, p + "patch_embed",
                                           cfg.patch_dim(), cfg.d_img, true,
                                           rng, trainable, 0.02);
    cls_ = &store.add(p + "cls", 1, cfg.d_img, trainable);
    init_normal(*cls_, rng, 0.02);
    pos_ = &store.add(p + "pos", cfg.n_patches() + 1, cfg.d_img, trainable);
    init_normal(*pos_, rng, 0.02);
    for (int i = 0; i < cfg.layers; ++i)
      blocks_.push_back(TransformerBlock<S>::create(
          store, p + "block" + std::to_string(i), cfg.d_img, cfg.heads, 4, rng,
          trainable));
    ln_f_ = LayerNormParams<S>::create(store, p + "ln_f", cfg.d_img, trainable);

    // reconstruction head, used only while pre-training the encoder
    const std::string d = "frozen/vit_dec.";
    dec_embed_ = LinearParams<S>::create(store, d + "embed", cfg.d_img,
                                         cfg.d_img, true, rng, trainable, 0.02);
    mask_token_ = &store.add(d + "mask", 1, cfg.d_img, trainable);
    init_normal(*mask_token_, rng, 0.02);
    dec_pos_ = &store.add(d + "pos", cfg.n_patches(), cfg.d_img, trainable);
    init_normal(*dec_pos_, rng, 0.02);
    dec_block_ = TransformerBlock<S>::create(store, d + "block", cfg.d_img,
                                             cfg.heads, 4, rng, trainable);
    dec_out_ = LinearParams<S>::create(store, d + "out", cfg.d_img,
                                       cfg.patch_dim(), true, rng, trainable,
                                       0.02);
  }

  const VitConfig& config() const { return cfg_; }

  void set_trainable(bool trainable) {
    for (size_t i = 0; i < store_->size(); ++i) {
      auto& p = (*store_)[i];
      if (p.name.rfind("frozen/vit", 0) == 0) p.trainable = trainable;
    }
  }

  // Frozen embedding of a full frame. Uses a throwaway eval-mode tape; no
  // gradients can flow into encoder parameters.
  ImageEmbedding<S> encode(const ImageFrame& frame) const {
    if (frame.size != cfg_.image_size)
      throw std::invalid_argument("VitEncoder: frame size mismatch");
    Graph<S> g(false, nullptr);
    auto out = encode_on_graph(g, patchify<S>(frame, cfg_.patch_size));
    ImageEmbedding<S> e;
    e.cls = g.value(out).row(0).transpose();
    e.patches = g.value(out).bottomRows(cfg_.n_patches());
    return e;
  }

  // Full-sequence forward on an existing tape (patches: P x patch_dim rows in
  // grid order). Row 0 of the result is CLS.
  typename Graph<S>::Tensor encode_on_graph(Graph<S>& g,
                                            const MatX<S>& patches) const {
    auto x = patch_embed_.apply(g, g.input(patches));
    auto seq = g.concat_rows({g.param(*cls_), x});
    seq = g.add(seq, g.param(*pos_));
    for (const auto& b : blocks_) seq = b.apply(g, seq, nullptr, 0.0);
    return ln_f_.apply(g, seq);
  }

  // Masked-reconstruction training loss for one frame. Visible patches are a
  // random subset of size ceil(P*(1-mask_ratio)); the loss is the MSE over
  // masked patches against patch-normalized targets (over all patches when
  // nothing is masked).
  typename Graph<S>::Tensor mae_loss(Graph<S>& g, const ImageFrame& frame,
                                     double mask_ratio, Rng& rng) const {
    const int P = cfg_.n_patches();
    MatX<S> patches = patchify<S>(frame, cfg_.patch_size);
    MatX<S> target = normalize_patches(patches);

    std::vector<int> perm(P);
    for (int i = 0; i < P; ++i) perm[i] = i;
    rng.shuffle(perm);
    int n_vis = P - int(mask_ratio * P);
    if (n_vis < 1) n_vis = 1;
    std::vector<int> visible(perm.begin(), perm.begin() + n_vis);
    std::sort(visible.begin(), visible.end());
    std::vector<uint8_t> is_visible(P, 0);
    for (int v : visible) is_visible[size_t(v)] = 1;

    MatX<S> vis_patches(n_vis, cfg_.patch_dim());
    MatX<S> vis_pos(n_vis, cfg_.d_img);
    for (int i = 0; i < n_vis; ++i) {
      vis_patches.row(i) = patches.row(visible[size_t(i)]);
      vis_pos.row(i) = pos_->value.row(visible[size_t(i)] + 1);
    }

    auto x = patch_embed_.apply(g, g.input(vis_patches));
    x = g.add(x, g.input(vis_pos));
    auto cls_in = g.add(g.param(*cls_), g.input(MatX<S>(pos_->value.row(0))));
    auto seq = g.concat_rows({cls_in, x});
    for (const auto& b : blocks_) seq = b.apply(g, seq, nullptr, 0.0);
    seq = ln_f_.apply(g, seq);

    auto enc_vis = dec_embed_.apply(g, g.slice_rows(seq, 1, n_vis));

    // scatter encoded visible rows and mask tokens into grid order
    std::vector<typename Graph<S>::Tensor> rows;
    rows.reserve(size_t(P));
    auto mask_tok = g.param(*mask_token_);
    int vi = 0;
    for (int i = 0; i < P; ++i) {
      if (is_visible[size_t(i)])
        rows.push_back(g.slice_rows(enc_vis, vi++, 1));
      else
        rows.push_back(mask_tok);
    }
    auto dec = g.concat_rows(rows);
    dec = g.add(dec, g.param(*dec_pos_));
    dec = dec_block_.apply(g, dec, nullptr, 0.0);
    auto pred = dec_out_.apply(g, dec);

    int n_masked = P - n_vis;
    if (n_masked == 0) return g.mse_loss(pred, target);

    MatX<S> masked_target(n_masked, cfg_.patch_dim());
    std::vector<typename Graph<S>::Tensor> masked_rows;
    int mi = 0;
    for (int i = 0; i < P; ++i) {
      if (is_visible[size_t(i)]) continue;
      masked_target.row(mi++) = target.row(i);
      masked_rows.push_back(g.slice_rows(pred, i, 1));
    }
    return g.mse_loss(g.concat_rows(masked_rows), masked_target);
  }

 private:
  VitConfig cfg_;
  ParamStore<S>* store_;
  LinearParams<S> patch_embed_;
  Param<S>* cls_ = nullptr;
  Param<S>* pos_ = nullptr;
  std::vector<TransformerBlock<S>> blocks_;
  LayerNormParams<S> ln_f_;

  LinearParams<S> dec_embed_;
  Param<S>* mask_token_ = nullptr;
  Param<S>* dec_pos_ = nullptr;
  TransformerBlock<S> dec_block_;
  LinearParams<S> dec_out_;
};

}  // namespace gr1
