#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gr1/config.hpp"
#include "gr1/layout.hpp"
#include "gr1/nn.hpp"
#include "gr1/patches.hpp"
#include "gr1/tensor.hpp"
#include "gr1/textenc.hpp"
#include "gr1/types.hpp"
#include "gr1/vit.hpp"

namespace gr1 {

// One timestep of model input: frozen image embedding plus (finetune only)
// the robot state.
template <class S>
struct StepInput {
  Eigen::Matrix<S, Eigen::Dynamic, 1> cls;  // d_img
  MatX<S> patches;                          // P x d_img
  RobotState state;
};

template <class S>
struct SampleInput {
  Eigen::VectorXd lang;             // frozen text embedding, d_text
  std::vector<StepInput<S>> steps;  // oldest first, size = present_len <= h
};

template <class S>
struct SampleTargets {
  std::vector<MatX<S>> video;  // normalized patch targets per supervised slot
  MatX<S> arm;                 // n_supervised x d_arm, normalized to [-1,1]
  MatX<S> grip;                // n_supervised x 1, labels in {0,1}
};

struct LossBreakdown {
  double l_video = 0;
  double l_arm = 0;
  double l_gripper = 0;
  double l_total = 0;
};

template <class S>
struct SequenceTensors {
  TokenLayout layout;
  typename Graph<S>::Tensor embedded;  // N x d_model, timestep embeddings added
  typename Graph<S>::Tensor modality;  // N x d_model, before timestep embeddings
  typename Graph<S>::Tensor timestep;  // N x d_model, the added embeddings
};

template <class S>
struct ForwardResult {
  TokenLayout layout;
  typename Graph<S>::Tensor outputs;  // N x d_model
};

// The policy/video model: frozen text and image encoders in front of a causal
// transformer with prediction-query tokens, a patch decoder for future-frame
// prediction, and an action head.
template <class S>
class Gr1Model {
 public:
  Gr1Model(const Config& cfg, uint64_t init_seed)
      : cfg_(validate_config(cfg)), text_enc_(cfg.d_text) {
    Rng rng(hash_combine(init_seed, 0x6e0dull));

    VitConfig vc;
    vc.image_size = cfg_.image_size;
    vc.patch_size = cfg_.patch_size;
    vc.d_img = cfg_.d_img;
    vc.layers = cfg_.enc_layers;
    vc.heads = cfg_.enc_heads;
    vit_ = std::make_unique<VitEncoder<S>>(store_, vc, rng, false);

    auto& text_table = store_.add("frozen/text.table", TextEncoder::kBuckets,
                                  cfg_.d_text, false);
    text_table.value = text_enc_.table().template cast<S>();

    const int d = cfg_.d_model;
    const int P = cfg_.n_patches();
    lang_align_ = LinearParams<S>::create(store_, "model/lang_align",
                                          cfg_.d_text, d, true, rng);
    cls_align_ = LinearParams<S>::create(store_, "model/cls_align", cfg_.d_img,
                                         d, true, rng);
    // arm map is bias-free so pose encoding is linear
    state_arm_ = LinearParams<S>::create(store_, "model/state.arm", cfg_.d_arm,
                                         d, false, rng);
    state_grip_ =
        LinearParams<S>::create(store_, "model/state.grip", 1, d, true, rng);

    resampler_latents_ = &store_.add("model/resampler.latents",
                                     cfg_.n_resampler_tokens, d, true);
    init_normal(*resampler_latents_, rng, 0.02);
    resampler_posenc_ = &store_.add("model/resampler.posenc", P, cfg_.d_img,
                                    true);
    init_normal(*resampler_posenc_, rng, 0.02);
    resampler_kv_ = LinearParams<S>::create(store_, "model/resampler.kv",
                                            cfg_.d_img, d, true, rng);
    for (int i = 0; i < kResamplerBlocks; ++i) {
      ResamplerBlock rb;
      rb.ln_q = LayerNormParams<S>::create(
          store_, "model/resampler.block" + std::to_string(i) + ".ln_q", d);
      rb.ln_kv = LayerNormParams<S>::create(
          store_, "model/resampler.block" + std::to_string(i) + ".ln_kv", d);
      rb.attn = AttentionParams<S>::create(
          store_, "model/resampler.block" + std::to_string(i) + ".attn", d,
          cfg_.heads, rng);
      rb.ln2 = LayerNormParams<S>::create(
          store_, "model/resampler.block" + std::to_string(i) + ".ln2", d);
      rb.fc1 = LinearParams<S>::create(
          store_, "model/resampler.block" + std::to_string(i) + ".fc1", d,
          4 * d, true, rng);
      rb.fc2 = LinearParams<S>::create(
          store_, "model/resampler.block" + std::to_string(i) + ".fc2", 4 * d,
          d, true, rng);
      resampler_blocks_.push_back(std::move(rb));
    }

    te_ = &store_.add("model/te", cfg_.history_len, d, true);
    init_normal(*te_, rng, 0.02);
    if (cfg_.video_prediction) {
      obs_embed_ = &store_.add("model/obs_embed", cfg_.n_obs_tokens, d, true);
      init_normal(*obs_embed_, rng, 0.02);
    }
    act_embed_ = &store_.add("model/act_embed", 1, d, true);
    init_normal(*act_embed_, rng, 0.02);

    for (int i = 0; i < cfg_.layers; ++i)
      trunk_.push_back(TransformerBlock<S>::create(
          store_, "model/trunk.block" + std::to_string(i), d, cfg_.heads, 4,
          rng));

    if (cfg_.video_prediction) {
      dec_mask_ = &store_.add("model/dec.mask", 1, d, true);
      init_normal(*dec_mask_, rng, 0.02);
      dec_pos_ = &store_.add("model/dec.pos", P, d, true);
      init_normal(*dec_pos_, rng, 0.02);
      for (int i = 0; i < cfg_.dec_layers; ++i)
        dec_blocks_.push_back(TransformerBlock<S>::create(
            store_, "model/dec.block" + std::to_string(i), d, cfg_.dec_heads,
            4, rng));
      dec_out_ = LinearParams<S>::create(store_, "model/dec.out", d,
                                         cfg_.patch_dim(), true, rng, true,
                                         0.02);
    }

    act_fc1_ = LinearParams<S>::create(store_, "model/act_head.fc1", d, d,
                                       true, rng);
    act_fc2_ = LinearParams<S>::create(store_, "model/act_head.fc2", d, d,
                                       true, rng);
    act_arm_ = LinearParams<S>::create(store_, "model/act_head.arm", d,
                                       cfg_.d_arm, true, rng, true, 0.02);
    act_grip_ = LinearParams<S>::create(store_, "model/act_head.grip", d, 1,
                                        true, rng, true, 0.02);
  }

  static constexpr int kResamplerBlocks = 2;

  const Config& config() const { return cfg_; }
  ParamStore<S>& store() { return store_; }
  const ParamStore<S>& store() const { return store_; }
  const TextEncoder& text_encoder() const { return text_enc_; }
  VitEncoder<S>& vit() { return *vit_; }
  const VitEncoder<S>& vit() const { return *vit_; }

  std::string frozen_hash() const { return store_.hash_subset(true); }

  Eigen::VectorXd encode_instruction(const std::string& text) const {
    return text_enc_.encode(text);
  }

  StepInput<S> encode_step(const ImageFrame& frame,
                           const RobotState& state = RobotState()) const {
    auto emb = vit_->encode(frame);
    return StepInput<S>{std::move(emb.cls), std::move(emb.patches), state};
  }

  // Latent queries cross-attend to the projected patch tokens.
  typename Graph<S>::Tensor resample(Graph<S>& g,
                                     typename Graph<S>::Tensor patches) const {
    if (int(g.value(patches).rows()) < cfg_.n_resampler_tokens)
      throw std::invalid_argument("resample: fewer patches than latents");
    auto kv = g.add(patches, g.param(*resampler_posenc_));
    auto kv_base = resampler_kv_.apply(g, kv);
    auto x = g.param(*resampler_latents_);
    for (const auto& rb : resampler_blocks_) {
      auto a = rb.attn.apply(g, rb.ln_q.apply(g, x), rb.ln_kv.apply(g, kv_base),
                             nullptr, 0.0);
      x = g.add(x, a);
      auto h = rb.fc2.apply(g, g.gelu(rb.fc1.apply(g, rb.ln2.apply(g, x))));
      x = g.add(x, h);
    }
    return x;
  }

  // arm pose and gripper each map to one token
  typename Graph<S>::Tensor encode_state(Graph<S>& g,
                                         const RobotState& st) const {
    MatX<S> pose(1, cfg_.d_arm);
    for (int i = 0; i < cfg_.d_arm; ++i) pose(0, i) = S(st.arm_pose[i]);
    MatX<S> grip(1, 1);
    grip(0, 0) = S(st.gripper);
    auto arm_tok = state_arm_.apply(g, g.input(pose));
    auto grip_tok = state_grip_.apply(g, g.input(grip));
    return g.concat_rows({arm_tok, grip_tok});
  }

  // Embedded token sequence with left padding; every token of a timestep
  // shares that slot's learned timestep embedding.
  SequenceTensors<S> build_token_sequence(Graph<S>& g,
                                          const SampleInput<S>& in,
                                          SequenceMode mode) const {
    const int h = cfg_.history_len;
    const int present = int(in.steps.size());
    if (present < 1 || present > h)
      throw std::invalid_argument("build_token_sequence: bad history length");

    TokenLayout layout =
        build_layout(mode, h, present, cfg_.n_resampler_tokens,
                     cfg_.n_obs_tokens, cfg_.video_prediction);
    const int per_step = layout.tokens_per_step();
    const int d = cfg_.d_model;

    MatX<S> lang_in(1, cfg_.d_text);
    for (int i = 0; i < cfg_.d_text; ++i) lang_in(0, i) = S(in.lang(i));
    auto lang_tok = lang_align_.apply(g, g.input(lang_in));

    std::vector<typename Graph<S>::Tensor> blocks;
    const int first_real = layout.first_real_slot();
    for (int slot = 0; slot < h; ++slot) {
      if (slot < first_real) {
        blocks.push_back(g.input(MatX<S>::Zero(per_step, d)));
        continue;
      }
      const StepInput<S>& step = in.steps[size_t(slot - first_real)];
      if (int(step.patches.rows()) != cfg_.n_patches() ||
          int(step.patches.cols()) != cfg_.d_img)
        throw std::invalid_argument("build_token_sequence: patch shape");

      std::vector<typename Graph<S>::Tensor> parts;
      parts.push_back(lang_tok);
      if (mode == SequenceMode::Finetune)
        parts.push_back(encode_state(g, step.state));
      MatX<S> cls_in(1, cfg_.d_img);
      for (int i = 0; i < cfg_.d_img; ++i) cls_in(0, i) = step.cls(i);
      parts.push_back(cls_align_.apply(g, g.input(cls_in)));
      parts.push_back(resample(g, g.input(step.patches)));
      if (cfg_.video_prediction) parts.push_back(g.param(*obs_embed_));
      if (mode == SequenceMode::Finetune) parts.push_back(g.param(*act_embed_));
      blocks.push_back(g.concat_rows(parts));
    }
    auto modality = g.concat_rows(blocks);

    std::vector<typename Graph<S>::Tensor> te_rows;
    auto te_all = g.param(*te_);
    for (int slot = 0; slot < h; ++slot)
      te_rows.push_back(g.repeat_row(g.slice_rows(te_all, slot, 1), per_step));
    auto te_seq = g.concat_rows(te_rows);

    SequenceTensors<S> out;
    out.layout = std::move(layout);
    out.modality = modality;
    out.timestep = te_seq;
    out.embedded = g.add(modality, te_seq);
    return out;
  }

  // Causal trunk with prediction-token masking. With zero layers the trunk is
  // the identity.
  ForwardResult<S> forward(Graph<S>& g, const SampleInput<S>& in,
                           SequenceMode mode) const {
    auto seq = build_token_sequence(g, in, mode);
    auto mask = build_attention_mask(seq.layout);
    auto x = g.dropout(seq.embedded, cfg_.dropout);
    for (const auto& b : trunk_) x = b.apply(g, x, &mask, cfg_.dropout);
    if (!g.value(x).allFinite())
      throw std::runtime_error("forward: non-finite trunk outputs");
    return {std::move(seq.layout), x};
  }

  // Prediction head over one timestep's observation-query outputs: decoder
  // self-attention over those outputs plus P positional mask tokens, read at
  // the mask positions.
  typename Graph<S>::Tensor decode_video(Graph<S>& g,
                                         const ForwardResult<S>& fwd,
                                         int slot) const {
    if (!cfg_.video_prediction)
      throw std::logic_error("decode_video: video prediction disabled");
    const int P = cfg_.n_patches();
    auto obs_pos = fwd.layout.positions(TokenKind::Obs, slot);
    auto obs_rows = g.slice_rows(fwd.outputs, obs_pos.front(),
                                 int(obs_pos.size()));
    auto masks = g.add(g.repeat_row(g.param(*dec_mask_), P),
                       g.param(*dec_pos_));
    auto x = g.concat_rows({obs_rows, masks});
    for (const auto& b : dec_blocks_) x = b.apply(g, x, nullptr, cfg_.dropout);
    auto pred_tokens = g.slice_rows(x, int(obs_pos.size()), P);
    return dec_out_.apply(g, pred_tokens);
  }

  struct ActionDecode {
    typename Graph<S>::Tensor arm;         // 1 x d_arm in (-1, 1)
    typename Graph<S>::Tensor grip_logit;  // 1 x 1
  };

  ActionDecode decode_action(Graph<S>& g, const ForwardResult<S>& fwd,
                             int slot) const {
    auto act_pos = fwd.layout.positions(TokenKind::Act, slot);
    if (act_pos.empty())
      throw std::logic_error("decode_action: no action token in this mode");
    auto x = g.slice_rows(fwd.outputs, act_pos.front(), 1);
    auto h1 = g.gelu(act_fc1_.apply(g, x));
    auto h2 = g.gelu(act_fc2_.apply(g, h1));
    return {g.tanh_op(act_arm_.apply(g, h2)), act_grip_.apply(g, h2)};
  }

  struct LossTensors {
    typename Graph<S>::Tensor l_video;
    typename Graph<S>::Tensor l_arm;
    typename Graph<S>::Tensor l_gripper;
    typename Graph<S>::Tensor l_total;
    bool has_video = false;
    bool has_action = false;
  };

  // Combined training loss over the supervised slots (all real timesteps, or
  // only the last one).
  LossTensors loss(Graph<S>& g, const SampleInput<S>& in,
                   const SampleTargets<S>& targets, SequenceMode mode,
                   bool all_timesteps) const {
    auto fwd = forward(g, in, mode);
    const int first_real = fwd.layout.first_real_slot();
    const int h = cfg_.history_len;

    std::vector<int> slots;
    if (all_timesteps)
      for (int s = first_real; s < h; ++s) slots.push_back(s);
    else
      slots.push_back(h - 1);

    LossTensors out;
    if (cfg_.video_prediction) {
      if (int(targets.video.size()) != int(slots.size()))
        throw std::invalid_argument("loss: video target count mismatch");
      std::vector<typename Graph<S>::Tensor> preds;
      MatX<S> stacked(int(slots.size()) * cfg_.n_patches(), cfg_.patch_dim());
      for (size_t i = 0; i < slots.size(); ++i) {
        preds.push_back(decode_video(g, fwd, slots[i]));
        stacked.middleRows(int(i) * cfg_.n_patches(), cfg_.n_patches()) =
            targets.video[i];
      }
      out.l_video = g.mse_loss(g.concat_rows(preds), stacked);
      out.has_video = true;
    }

    if (mode == SequenceMode::Finetune) {
      if (int(targets.arm.rows()) != int(slots.size()) ||
          int(targets.grip.rows()) != int(slots.size()))
        throw std::invalid_argument("loss: action target count mismatch");
      std::vector<typename Graph<S>::Tensor> arms, grips;
      for (int s : slots) {
        auto dec = decode_action(g, fwd, s);
        arms.push_back(dec.arm);
        grips.push_back(dec.grip_logit);
      }
      out.l_arm = g.smooth_l1_loss(g.concat_rows(arms), targets.arm, S(1));
      out.l_gripper = g.bce_with_logits(g.concat_rows(grips), targets.grip);
      out.has_action = true;
    }

    if (out.has_action && out.has_video)
      out.l_total = g.add(g.add(out.l_arm, out.l_gripper), out.l_video);
    else if (out.has_action)
      out.l_total = g.add(out.l_arm, out.l_gripper);
    else
      out.l_total = out.l_video;

    if (!std::isfinite(double(g.value(out.l_total)(0, 0))))
      throw std::runtime_error("loss: non-finite loss value");
    return out;
  }

  // Last-timestep action prediction for closed-loop control.
  std::pair<std::vector<double>, double> predict_action(
      const SampleInput<S>& in) const {
    Graph<S> g(false, nullptr);
    auto fwd = forward(g, in, SequenceMode::Finetune);
    auto dec = decode_action(g, fwd, cfg_.history_len - 1);
    std::vector<double> arm(cfg_.d_arm);
    for (int i = 0; i < cfg_.d_arm; ++i)
      arm[size_t(i)] = double(g.value(dec.arm)(0, i));
    return {arm, double(g.value(dec.grip_logit)(0, 0))};
  }

 private:
  struct ResamplerBlock {
    LayerNormParams<S> ln_q, ln_kv, ln2;
    AttentionParams<S> attn;
    LinearParams<S> fc1, fc2;
  };

  Config cfg_;
  TextEncoder text_enc_;
  ParamStore<S> store_;
  std::unique_ptr<VitEncoder<S>> vit_;

  LinearParams<S> lang_align_, cls_align_, state_arm_, state_grip_;
  Param<S>* resampler_latents_ = nullptr;
  Param<S>* resampler_posenc_ = nullptr;
  LinearParams<S> resampler_kv_;
  std::vector<ResamplerBlock> resampler_blocks_;
  Param<S>* te_ = nullptr;
  Param<S>* obs_embed_ = nullptr;
  Param<S>* act_embed_ = nullptr;
  std::vector<TransformerBlock<S>> trunk_;
  Param<S>* dec_mask_ = nullptr;
  Param<S>* dec_pos_ = nullptr;
  std::vector<TransformerBlock<S>> dec_blocks_;
  LinearParams<S> dec_out_;
  LinearParams<S> act_fc1_, act_fc2_, act_arm_, act_grip_;
};

}  // namespace gr1
