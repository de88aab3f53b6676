#pragma once

#include <cstdint>
#include <vector>

namespace gr1 {

enum class TokenKind : uint8_t {
  Lang,
  StateArm,
  StateGrip,
  ImgCls,
  ImgPatch,
  Obs,
  Act,
};

enum class SequenceMode : uint8_t { Pretrain, Finetune };

inline bool is_prediction_token(TokenKind k) {
  return k == TokenKind::Obs || k == TokenKind::Act;
}

struct TokenDesc {
  TokenKind kind;
  int slot;      // timestep slot in [0, h)
  int within;    // index among same-kind tokens of this slot
  bool padding;  // slot precedes the first real timestep
};

// Per-timestep order: LANG, (STATE_ARM, STATE_GRIP), IMG_CLS, IMG_PATCH x M,
// OBS x n_obs, (ACT). State and ACT appear only in finetune mode; OBS tokens
// can be disabled for the no-video-prediction variant.
struct TokenLayout {
  SequenceMode mode;
  int history_len = 0;   // h slots
  int present_len = 0;   // trailing slots holding real data
  int n_patch_tokens = 0;
  int n_obs = 0;
  std::vector<TokenDesc> tokens;

  int size() const { return int(tokens.size()); }
  int tokens_per_step() const { return size() / history_len; }
  int first_real_slot() const { return history_len - present_len; }
  bool is_prediction(int i) const {
    return is_prediction_token(tokens[size_t(i)].kind);
  }

  // positions of every token of `kind` in `slot`, in sequence order
  std::vector<int> positions(TokenKind kind, int slot) const;
  // positions of all tokens in `slot`
  std::vector<int> slot_positions(int slot) const;
};

TokenLayout build_layout(SequenceMode mode, int history_len, int present_len,
                         int n_patch_tokens, int n_obs, bool video_prediction);

// (q, k) is allowed iff k <= q, k is not a prediction token, and k is not
// padding; additionally any non-padding prediction token may attend itself.
// Row-major N x N, nonzero = allowed.
std::vector<uint8_t> build_attention_mask(const TokenLayout& layout);

}  // namespace gr1
