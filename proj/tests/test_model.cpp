#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gr1/model.hpp"
#include "gr1/patches.hpp"

using namespace gr1;

namespace {

Config tiny_cfg() {
  Config cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;  // P = 4
  cfg.d_img = 16;
  cfg.d_text = 16;
  cfg.d_model = 16;
  cfg.layers = 1;
  cfg.heads = 4;
  cfg.enc_layers = 1;
  cfg.enc_heads = 4;
  cfg.dec_layers = 1;
  cfg.dec_heads = 4;
  cfg.n_resampler_tokens = 2;
  cfg.n_obs_tokens = 2;
  cfg.history_len = 2;
  cfg.dropout = 0.0;
  return validate_config(cfg);
}

ImageFrame random_frame(int size, uint64_t seed) {
  Rng rng(seed);
  ImageFrame f(size);
  for (auto& p : f.pixels) p = float(rng.uniform());
  return f;
}

template <class S>
SampleInput<S> random_input(const Gr1Model<S>& model, int present,
                            uint64_t seed) {
  const Config& cfg = model.config();
  SampleInput<S> in;
  in.lang = model.encode_instruction("push the red block to the left");
  Rng rng(seed);
  for (int i = 0; i < present; ++i) {
    RobotState st({rng.uniform(), rng.uniform()}, rng.bernoulli(0.5) ? 1 : 0);
    in.steps.push_back(
        model.encode_step(random_frame(cfg.image_size, seed * 100 + i), st));
  }
  return in;
}

template <class S>
SampleTargets<S> random_targets(const Gr1Model<S>& model, int n_supervised,
                                uint64_t seed) {
  const Config& cfg = model.config();
  SampleTargets<S> t;
  Rng rng(seed);
  for (int i = 0; i < n_supervised; ++i)
    t.video.push_back(
        patch_target<S>(random_frame(cfg.image_size, seed * 7 + i),
                        cfg.patch_size));
  t.arm.resize(n_supervised, cfg.d_arm);
  t.grip.resize(n_supervised, 1);
  for (int i = 0; i < n_supervised; ++i) {
    for (int k = 0; k < cfg.d_arm; ++k)
      t.arm(i, k) = S(rng.uniform(-1, 1));
    t.grip(i, 0) = S(rng.bernoulli(0.5) ? 1 : 0);
  }
  return t;
}

}  // namespace

TEST_CASE("patch_target normalization and round trip") {
  SUBCASE("constant image maps to zero targets") {
    ImageFrame flat(16, 0.37f);
    MatX<double> t = patch_target<double>(flat, 8);
    CHECK(t.cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("rows have zero mean and unit std") {
    ImageFrame f = random_frame(16, 3);
    MatX<double> t = patch_target<double>(f, 8);
    for (int r = 0; r < t.rows(); ++r) {
      CHECK(std::abs(t.row(r).mean()) < 1e-5);
      double std_dev = std::sqrt((t.row(r).array() - t.row(r).mean())
                                     .square()
                                     .mean());
      CHECK(std_dev == doctest::Approx(1.0).epsilon(1e-3));
    }
  }

  SUBCASE("denormalize inverts normalize") {
    ImageFrame f = random_frame(16, 4);
    MatX<double> patches = patchify<double>(f, 8);
    MatX<double> means, stds;
    MatX<double> normed = normalize_patches(patches, &means, &stds);
    MatX<double> back = denormalize_patches(normed, means, stds);
    CHECK((back - patches).cwiseAbs().maxCoeff() < 1e-6);
    ImageFrame img = unpatchify(back, 8);
    for (size_t i = 0; i < f.pixels.size(); ++i)
      CHECK(std::abs(img.pixels[i] - f.pixels[i]) < 1e-5f);
  }
}

TEST_CASE("token sequence counts and timestep embedding sharing") {
  Config cfg = tiny_cfg();
  Gr1Model<float> model(cfg, 0);
  SampleInput<float> in = random_input(model, 2, 1);

  Graph<float> g;
  auto seq = model.build_token_sequence(g, in, SequenceMode::Finetune);
  // per-timestep: LANG + 2 state + CLS + M + n_obs + ACT
  CHECK(seq.layout.tokens_per_step() == 1 + 2 + 1 + 2 + 2 + 1);
  CHECK(g.value(seq.embedded).rows() == seq.layout.size());
  CHECK(g.value(seq.embedded).cols() == cfg.d_model);

  // embedded == modality + per-slot timestep embedding, bitwise
  MatX<float> reconstructed =
      g.value(seq.modality) + g.value(seq.timestep);
  CHECK(reconstructed == g.value(seq.embedded));

  const auto& te = model.store().at("model/te").value;
  for (int i = 0; i < seq.layout.size(); ++i) {
    int slot = seq.layout.tokens[size_t(i)].slot;
    CHECK(g.value(seq.timestep).row(i) == te.row(slot));
  }

  // short history pads on the left
  SampleInput<float> short_in = random_input(model, 1, 2);
  Graph<float> g2;
  auto seq2 = model.build_token_sequence(g2, short_in, SequenceMode::Finetune);
  CHECK(seq2.layout.first_real_slot() == 1);
  auto padded = g2.value(seq2.modality).topRows(seq2.layout.tokens_per_step());
  CHECK(padded.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("zero-layer trunk is the identity") {
  Config cfg = tiny_cfg();
  cfg.layers = 0;
  Gr1Model<float> model(cfg, 5);
  SampleInput<float> in = random_input(model, 2, 3);
  Graph<float> g;
  auto seq = model.build_token_sequence(g, in, SequenceMode::Finetune);
  auto fwd = model.forward(g, in, SequenceMode::Finetune);
  CHECK(g.value(fwd.outputs) == g.value(seq.embedded));
}

TEST_CASE("eval-mode forward is deterministic") {
  Config cfg = tiny_cfg();
  Gr1Model<float> model(cfg, 7);
  SampleInput<float> in = random_input(model, 2, 9);
  Graph<float> g1, g2;
  auto f1 = model.forward(g1, in, SequenceMode::Finetune);
  auto f2 = model.forward(g2, in, SequenceMode::Finetune);
  CHECK(g1.value(f1.outputs) == g2.value(f2.outputs));
}

TEST_CASE("strict causality: future inputs cannot change earlier outputs") {
  Config cfg = tiny_cfg();
  cfg.history_len = 4;
  Gr1Model<float> model(cfg, 11);
  SampleInput<float> in = random_input(model, 4, 13);

  Graph<float> g;
  auto fwd = model.forward(g, in, SequenceMode::Finetune);
  MatX<float> base = g.value(fwd.outputs);
  const int per = fwd.layout.tokens_per_step();

  Rng rng(15);
  for (int future = 1; future < 4; ++future) {
    for (int rep = 0; rep < 5; ++rep) {
      SampleInput<float> mod = in;
      // perturb every input of the future timestep
      for (int i = 0; i < mod.steps[size_t(future)].patches.rows(); ++i)
        for (int j = 0; j < mod.steps[size_t(future)].patches.cols(); ++j)
          mod.steps[size_t(future)].patches(i, j) += float(rng.normal(0, 1));
      for (int j = 0; j < mod.steps[size_t(future)].cls.size(); ++j)
        mod.steps[size_t(future)].cls(j) += float(rng.normal(0, 1));
      mod.steps[size_t(future)].state =
          RobotState({rng.uniform(), rng.uniform()},
                     rng.bernoulli(0.5) ? 1 : 0);

      Graph<float> g2;
      auto fwd2 = model.forward(g2, mod, SequenceMode::Finetune);
      MatX<float> out = g2.value(fwd2.outputs);
      // all positions before the perturbed timestep are bitwise unchanged
      for (int pos = 0; pos < future * per; ++pos)
        CHECK(out.row(pos) == base.row(pos));
    }
  }
}

TEST_CASE("prediction-token embeddings only affect prediction positions") {
  Config cfg = tiny_cfg();
  Gr1Model<float> model(cfg, 17);
  SampleInput<float> in = random_input(model, 2, 19);

  Graph<float> g;
  auto fwd = model.forward(g, in, SequenceMode::Finetune);
  MatX<float> base = g.value(fwd.outputs);

  model.store().at("model/obs_embed").value.setZero();
  model.store().at("model/act_embed").value.setZero();
  Graph<float> g2;
  auto fwd2 = model.forward(g2, in, SequenceMode::Finetune);
  MatX<float> out = g2.value(fwd2.outputs);

  for (int pos = 0; pos < fwd.layout.size(); ++pos) {
    if (fwd.layout.is_prediction(pos)) continue;
    CHECK(out.row(pos) == base.row(pos));
  }
}

TEST_CASE("video decoder shapes and positional-encoding permutation") {
  Config cfg = tiny_cfg();
  Gr1Model<float> model(cfg, 21);
  SampleInput<float> in = random_input(model, 2, 23);

  Graph<float> g;
  auto fwd = model.forward(g, in, SequenceMode::Finetune);
  auto pred = model.decode_video(g, fwd, cfg.history_len - 1);
  CHECK(g.value(pred).rows() == 4);        // P
  CHECK(g.value(pred).cols() == 3 * 64);   // 3 * patch^2
  MatX<float> base = g.value(pred);

  // permuting decoder positional encodings permutes predicted patches
  auto& pos = model.store().at("model/dec.pos");
  MatX<float> orig = pos.value;
  std::vector<int> perm = {2, 0, 3, 1};
  for (int r = 0; r < 4; ++r) pos.value.row(r) = orig.row(perm[size_t(r)]);
  Graph<float> g2;
  auto fwd2 = model.forward(g2, in, SequenceMode::Finetune);
  auto pred2 = model.decode_video(g2, fwd2, cfg.history_len - 1);
  for (int r = 0; r < 4; ++r) {
    CAPTURE(r);
    CHECK((g2.value(pred2).row(r) - base.row(perm[size_t(r)]))
              .cwiseAbs()
              .maxCoeff() < 1e-4f);
  }
  pos.value = orig;
}

TEST_CASE("action decoder ranges and shapes") {
  Config cfg = tiny_cfg();
  Gr1Model<float> model(cfg, 25);
  for (uint64_t s = 0; s < 10; ++s) {
    SampleInput<float> in = random_input(model, 2, 100 + s);
    auto [arm, logit] = model.predict_action(in);
    CHECK(arm.size() == size_t(cfg.d_arm));
    for (double a : arm) {
      CHECK(a > -1.0);
      CHECK(a < 1.0);
    }
    CHECK(std::isfinite(logit));
  }
}

TEST_CASE("video prediction can be disabled end to end") {
  Config cfg = tiny_cfg();
  cfg.video_prediction = false;
  Gr1Model<float> model(cfg, 27);
  CHECK_FALSE(model.store().contains("model/obs_embed"));
  CHECK_FALSE(model.store().contains("model/dec.mask"));

  SampleInput<float> in = random_input(model, 2, 29);
  SampleTargets<float> targets = random_targets(model, 2, 31);
  targets.video.clear();
  Graph<float> g;
  auto loss = model.loss(g, in, targets, SequenceMode::Finetune, true);
  CHECK_FALSE(loss.has_video);
  CHECK(g.value(loss.l_total)(0, 0) ==
        g.value(loss.l_arm)(0, 0) + g.value(loss.l_gripper)(0, 0));
}

TEST_CASE("finetune loss decomposes per the unit-weight sum") {
  Config cfg = tiny_cfg();
  Gr1Model<double> model(cfg, 33);
  SampleInput<double> in = random_input(model, 2, 35);
  SampleTargets<double> targets = random_targets(model, 2, 37);
  Graph<double> g;
  auto loss = model.loss(g, in, targets, SequenceMode::Finetune, true);
  double total = g.value(loss.l_total)(0, 0);
  double parts = g.value(loss.l_arm)(0, 0) + g.value(loss.l_gripper)(0, 0) +
                 g.value(loss.l_video)(0, 0);
  CHECK(std::abs(total - parts) < 1e-12);
}

TEST_CASE("non-finite inputs raise") {
  Config cfg = tiny_cfg();
  Gr1Model<float> model(cfg, 39);
  SampleInput<float> in = random_input(model, 2, 41);
  in.steps[0].patches(0, 0) = std::numeric_limits<float>::quiet_NaN();
  Graph<float> g;
  CHECK_THROWS_AS(model.forward(g, in, SequenceMode::Finetune),
                  std::runtime_error);
}

TEST_CASE("full-model gradient check on the tiny double configuration") {
  Config cfg = tiny_cfg();  // layers=1, d_model=16, h=2 as required
  Gr1Model<double> model(cfg, 43);
  SampleInput<double> in = random_input(model, 2, 45);
  SampleTargets<double> targets = random_targets(model, 2, 47);

  auto build = [&](Graph<double>& g) {
    return model.loss(g, in, targets, SequenceMode::Finetune, true).l_total;
  };

  auto& store = model.store();
  store.zero_grads();
  {
    Graph<double> g;
    g.backward(build(g));
  }

  const double eps = 1e-4;
  double worst = 0;
  std::string worst_name;
  int checked_params = 0;
  Rng pick(49);
  for (size_t pi = 0; pi < store.size(); ++pi) {
    Param<double>& p = store[pi];
    if (!p.trainable) continue;
    ++checked_params;
    // spot-check up to 6 elements per array to keep the suite quick; the
    // acceptance suite sweeps every element
    for (int probe = 0; probe < 6; ++probe) {
      int r = int(pick.uniform_int(uint64_t(p.value.rows())));
      int c = int(pick.uniform_int(uint64_t(p.value.cols())));
      double keep = p.value(r, c);
      p.value(r, c) = keep + eps;
      Graph<double> gp;
      double up = gp.value(build(gp))(0, 0);
      p.value(r, c) = keep - eps;
      Graph<double> gm;
      double down = gm.value(build(gm))(0, 0);
      p.value(r, c) = keep;
      double fd = (up - down) / (2 * eps);
      double analytic = p.grad(r, c);
      double denom = std::max({std::abs(fd), std::abs(analytic), 1e-4});
      double rel = std::abs(fd - analytic) / denom;
      if (rel > worst) {
        worst = rel;
        worst_name = p.name;
      }
    }
  }
  CAPTURE(worst_name);
  CHECK(checked_params > 20);
  CHECK(worst < 1e-3);
}
