#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gr1/layout.hpp"
#include "gr1/rng.hpp"

using namespace gr1;

namespace {

// Independent O(N^2) evaluation of the masking rule, written directly from
// its definition.
std::vector<uint8_t> mask_oracle(const TokenLayout& layout) {
  const int n = layout.size();
  std::vector<uint8_t> mask(size_t(n) * n, 0);
  for (int q = 0; q < n; ++q)
    for (int k = 0; k < n; ++k) {
      const TokenDesc& key = layout.tokens[size_t(k)];
      const TokenDesc& query = layout.tokens[size_t(q)];
      bool allowed = k <= q && !is_prediction_token(key.kind) && !key.padding;
      if (k == q && is_prediction_token(query.kind) && !query.padding)
        allowed = true;
      mask[size_t(q) * n + k] = allowed ? 1 : 0;
    }
  return mask;
}

}  // namespace

TEST_CASE("token counts per timestep match the sequence definition") {
  // finetune: LANG + 2 state + CLS + M patches + n_obs OBS + ACT
  TokenLayout ft = build_layout(SequenceMode::Finetune, 10, 10, 8, 4, true);
  CHECK(ft.tokens_per_step() == 1 + 2 + 1 + 8 + 4 + 1);
  CHECK(ft.size() == 170);

  TokenLayout pt = build_layout(SequenceMode::Pretrain, 10, 10, 8, 4, true);
  CHECK(pt.tokens_per_step() == 1 + 1 + 8 + 4);
  CHECK(pt.size() == 140);

  // no-video variant removes the OBS tokens
  TokenLayout nv = build_layout(SequenceMode::Finetune, 10, 10, 8, 4, false);
  CHECK(nv.tokens_per_step() == 1 + 2 + 1 + 8 + 1);
}

TEST_CASE("single-timestep layout is valid") {
  TokenLayout l = build_layout(SequenceMode::Finetune, 1, 1, 2, 1, true);
  CHECK(l.history_len == 1);
  CHECK(l.first_real_slot() == 0);
  for (const auto& t : l.tokens) CHECK_FALSE(t.padding);
}

TEST_CASE("per-timestep kind order and language-per-timestep invariants") {
  TokenLayout l = build_layout(SequenceMode::Finetune, 3, 2, 4, 2, true);
  const int per = l.tokens_per_step();
  for (int slot = 0; slot < 3; ++slot) {
    auto langs = l.positions(TokenKind::Lang, slot);
    CHECK(langs.size() == 1);
    CHECK(langs[0] == slot * per);
    CHECK(l.positions(TokenKind::Obs, slot).size() == 2);
    CHECK(l.positions(TokenKind::Act, slot).size() == 1);
    CHECK(l.positions(TokenKind::ImgPatch, slot).size() == 4);
  }
  // padding flags cover exactly the first (h - present) slots
  for (const auto& t : l.tokens) CHECK(t.padding == (t.slot < 1));
}

TEST_CASE("mask base case: one ordinary token attends itself") {
  TokenLayout l;
  l.mode = SequenceMode::Pretrain;
  l.history_len = 1;
  l.present_len = 1;
  l.tokens = {{TokenKind::Lang, 0, 0, false}};
  auto mask = build_attention_mask(l);
  REQUIRE(mask.size() == 1);
  CHECK(mask[0] == 1);
}

TEST_CASE("OBS columns are closed to every other query") {
  TokenLayout l = build_layout(SequenceMode::Finetune, 4, 4, 3, 2, true);
  auto mask = build_attention_mask(l);
  const int n = l.size();
  for (int k = 0; k < n; ++k) {
    if (!l.is_prediction(k)) continue;
    for (int q = 0; q < n; ++q) {
      bool expected = (q == k);
      CHECK(mask[size_t(q) * n + k] == (expected ? 1 : 0));
    }
  }
}

TEST_CASE("mask equals the brute-force oracle on 200 random layouts") {
  Rng rng(0xabc);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int h = 1 + int(rng.uniform_int(10));
    int present = 1 + int(rng.uniform_int(uint64_t(h)));
    int m = 1 + int(rng.uniform_int(8));
    int n_obs = 1 + int(rng.uniform_int(4));
    bool video = rng.bernoulli(0.9);
    SequenceMode mode = rng.bernoulli(0.5) ? SequenceMode::Pretrain
                                           : SequenceMode::Finetune;
    TokenLayout l = build_layout(mode, h, present, m, n_obs, video);
    auto got = build_attention_mask(l);
    auto want = mask_oracle(l);
    REQUIRE(got.size() == want.size());
    for (size_t i = 0; i < got.size(); ++i)
      if (got[i] != want[i]) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("layout argument validation") {
  CHECK_THROWS_AS(build_layout(SequenceMode::Pretrain, 0, 0, 2, 2, true),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_layout(SequenceMode::Pretrain, 4, 5, 2, 2, true),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_layout(SequenceMode::Pretrain, 4, 0, 2, 2, true),
                  std::invalid_argument);
}
