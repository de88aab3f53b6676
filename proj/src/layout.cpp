#include "gr1/layout.hpp"

#include <stdexcept>

namespace gr1 {

std::vector<int> TokenLayout::positions(TokenKind kind, int slot) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (tokens[size_t(i)].kind == kind && tokens[size_t(i)].slot == slot)
      out.push_back(i);
  return out;
}

std::vector<int> TokenLayout::slot_positions(int slot) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (tokens[size_t(i)].slot == slot) out.push_back(i);
  return out;
}

TokenLayout build_layout(SequenceMode mode, int history_len, int present_len,
                         int n_patch_tokens, int n_obs,
                         bool video_prediction) {
  if (history_len < 1)
    throw std::invalid_argument("build_layout: history_len must be >= 1");
  if (present_len < 1 || present_len > history_len)
    throw std::invalid_argument(
        "build_layout: present_len must be in [1, history_len]");

  TokenLayout layout;
  layout.mode = mode;
  layout.history_len = history_len;
  layout.present_len = present_len;
  layout.n_patch_tokens = n_patch_tokens;
  layout.n_obs = video_prediction ? n_obs : 0;

  const int first_real = history_len - present_len;
  for (int slot = 0; slot < history_len; ++slot) {
    const bool pad = slot < first_real;
    auto push = [&](TokenKind kind, int within) {
      layout.tokens.push_back({kind, slot, within, pad});
    };
    push(TokenKind::Lang, 0);
    if (mode == SequenceMode::Finetune) {
      push(TokenKind::StateArm, 0);
      push(TokenKind::StateGrip, 0);
    }
    push(TokenKind::ImgCls, 0);
    for (int i = 0; i < n_patch_tokens; ++i) push(TokenKind::ImgPatch, i);
    if (video_prediction)
      for (int i = 0; i < n_obs; ++i) push(TokenKind::Obs, i);
    if (mode == SequenceMode::Finetune) push(TokenKind::Act, 0);
  }
  return layout;
}

std::vector<uint8_t> build_attention_mask(const TokenLayout& layout) {
  const int n = layout.size();
  std::vector<uint8_t> mask(size_t(n) * n, 0);
  // column-wise: a non-padding, non-prediction key is visible to all later
  // queries; prediction tokens contribute only their own diagonal entry
  for (int k = 0; k < n; ++k) {
    const TokenDesc& key = layout.tokens[size_t(k)];
    if (key.padding) continue;
    if (is_prediction_token(key.kind)) {
      mask[size_t(k) * n + k] = 1;
      continue;
    }
    for (int q = k; q < n; ++q) mask[size_t(q) * n + k] = 1;
  }
  return mask;
}

}  // namespace gr1
