#include "gr1/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace gr1 {

namespace {
using Clock = std::chrono::steady_clock;
using json = nlohmann::ordered_json;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace

double lr_schedule(int64_t step, double peak_lr, int64_t warmup_steps,
                   int64_t total_steps) {
  if (step < 0) throw std::invalid_argument("lr_schedule: negative step");
  if (warmup_steps > 0 && step < warmup_steps)
    return peak_lr * double(step) / double(warmup_steps);
  if (total_steps <= warmup_steps) return peak_lr;
  double progress = double(step - warmup_steps) /
                    double(total_steps - warmup_steps);
  if (progress > 1.0) progress = 1.0;
  return peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

ImageFrame shift_image(const ImageFrame& img, int dx, int dy) {
  ImageFrame out(img.size);
  auto clip = [&](int v) { return v < 0 ? 0 : (v >= img.size ? img.size - 1 : v); };
  for (int y = 0; y < img.size; ++y)
    for (int x = 0; x < img.size; ++x) {
      int sy = clip(y + dy), sx = clip(x + dx);
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  return out;
}

std::pair<int, int> sample_shift(int max_shift, Rng& rng) {
  if (max_shift == 0) return {0, 0};
  int dx = int(rng.uniform_int(uint64_t(2 * max_shift + 1))) - max_shift;
  int dy = int(rng.uniform_int(uint64_t(2 * max_shift + 1))) - max_shift;
  return {dx, dy};
}

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::trunc);
    if (!out) throw std::runtime_error("metrics: cannot write " + path_);
  }
}

void MetricsWriter::append(const StepMetrics& m) {
  entries_.push_back(m);
  if (path_.empty()) return;
  json j;
  j["step"] = m.step;
  j["phase"] = m.phase;
  j["l_video"] = m.loss.l_video;
  j["l_arm"] = m.loss.l_arm;
  j["l_gripper"] = m.loss.l_gripper;
  j["l_total"] = m.loss.l_total;
  j["lr"] = m.lr;
  j["wall_time"] = m.wall_time;
  std::ofstream out(path_, std::ios::app);
  out << j.dump() << "\n";
}

namespace {

// Largest usable history for a clip given spacing and future offset.
int feasible_history(int clip_len, int h, int stride, int delta_t) {
  int p = h;
  while (p >= 1 && stride * (p - 1) + stride * delta_t >= clip_len) --p;
  return p;
}

struct PretrainBatcher {
  const VideoDataset* corpus;
  const Config* cfg;
  uint64_t seed;
  int n_train;

  // Window for one clip: inputs plus per-slot normalized video targets.
  std::pair<SampleInput<float>, SampleTargets<float>> make_sample(
      const ModelF& model, int clip_idx, Rng& rng, bool augment) const {
    VideoClip clip = corpus->load_clip(clip_idx);
    int h_eff = feasible_history(int(clip.frames.size()), cfg->history_len,
                                 cfg->video_stride, cfg->delta_t_pretrain);
    if (h_eff < 1)
      throw std::invalid_argument(
          "pretrain: clips too short for the configured stride/delta_t");
    SequenceSample win = sample_training_sequence(
        clip, h_eff, cfg->delta_t_pretrain, cfg->video_stride, rng);

    int dx = 0, dy = 0;
    if (augment && cfg->augment_pretrain)
      std::tie(dx, dy) = sample_shift(cfg->augment_max_shift, rng);

    auto frame_at = [&](int idx) {
      return (dx == 0 && dy == 0) ? clip.frames[size_t(idx)]
                                  : shift_image(clip.frames[size_t(idx)], dx, dy);
    };

    SampleInput<float> in;
    in.lang = model.encode_instruction(win.caption);
    SampleTargets<float> targets;
    bool all = cfg->loss_all_timesteps;
    for (int i = 0; i < h_eff; ++i) {
      ImageFrame f = frame_at(win.input_indices[size_t(i)]);
      in.steps.push_back(model.encode_step(f));
      if (all || i == h_eff - 1) {
        ImageFrame tf = frame_at(win.target_indices[size_t(i)]);
        targets.video.push_back(
            patch_target<float>(tf, cfg->patch_size));
      }
    }
    return {std::move(in), std::move(targets)};
  }
};

void scale_grads(ParamStore<float>& store, float s) {
  for (size_t i = 0; i < store.size(); ++i)
    if (store[i].trainable) store[i].grad *= s;
}

}  // namespace

PretrainResult pretrain(ModelF& model, const VideoDataset& corpus,
                        const Config& cfg, uint64_t seed,
                        MetricsWriter& metrics) {
  const auto t0 = Clock::now();
  const int n_clips = int(corpus.clips().size());
  int n_held = std::max(1, std::min(64, n_clips / 50));
  if (n_clips < 2) n_held = 0;
  const int n_train = n_clips - n_held;
  if (n_train < 1) throw std::invalid_argument("pretrain: empty corpus");

  PretrainBatcher batcher{&corpus, &cfg, seed, n_train};

  const std::string frozen_before = model.frozen_hash();

  // Held-out loss: fixed windows from the reserved clips, evaluated in eval
  // mode with no augmentation.
  auto heldout_loss = [&]() {
    if (n_held == 0) return 0.0;
    double acc = 0;
    for (int i = 0; i < n_held; ++i) {
      Rng rng(hash_combine(seed, 0xe7a1ull, uint64_t(i)));
      auto [in, targets] =
          batcher.make_sample(model, n_train + i, rng, false);
      Graph<float> g(false, nullptr);
      auto loss = model.loss(g, in, targets, SequenceMode::Pretrain,
                             cfg.loss_all_timesteps);
      acc += double(g.value(loss.l_total)(0, 0));
    }
    return acc / n_held;
  };

  const int64_t steps_per_epoch = std::max<int64_t>(1, n_train / cfg.pretrain_batch);
  const int64_t total_steps = steps_per_epoch * cfg.pretrain_epochs;
  const int64_t warmup_steps = steps_per_epoch * cfg.pretrain_warmup_epochs;

  PretrainResult result;
  result.heldout_loss_step0 = heldout_loss();
  result.steps = total_steps;

  AdamW<float> opt(model.store(), {cfg.adam_beta1, cfg.adam_beta2,
                                   cfg.adam_eps, cfg.weight_decay});

  std::vector<int> order(static_cast<size_t>(n_train));
  for (int i = 0; i < n_train; ++i) order[size_t(i)] = i;
  int64_t cursor = 0;
  Rng order_rng(hash_combine(seed, 0x04de4ull));

  for (int64_t step = 0; step < total_steps; ++step) {
    if (cursor % n_train == 0) order_rng.shuffle(order);

    model.store().zero_grads();
    LossBreakdown sum;
    for (int b = 0; b < cfg.pretrain_batch; ++b) {
      int clip_idx = order[size_t(cursor % n_train)];
      ++cursor;
      Rng rng(hash_combine(seed, 0x5a3ull, uint64_t(step), uint64_t(b)));
      auto [in, targets] = batcher.make_sample(model, clip_idx, rng, true);
      Graph<float> g(true, &rng);
      auto loss = model.loss(g, in, targets, SequenceMode::Pretrain,
                             cfg.loss_all_timesteps);
      g.backward(loss.l_total);
      sum.l_video += double(g.value(loss.l_video)(0, 0));
    }
    scale_grads(model.store(), 1.f / float(cfg.pretrain_batch));

    double lr = lr_schedule(step, cfg.pretrain_lr, warmup_steps, total_steps);
    opt.step(lr);

    StepMetrics m;
    m.step = step;
    m.phase = "pretrain";
    m.loss.l_video = sum.l_video / cfg.pretrain_batch;
    m.loss.l_total = m.loss.l_video;
    if (!std::isfinite(m.loss.l_total))
      throw std::runtime_error("pretrain: non-finite loss at step " +
                               std::to_string(step));
    m.lr = lr;
    m.wall_time = seconds_since(t0);
    metrics.append(m);
  }

  result.heldout_loss_final = heldout_loss();
  StepMetrics ev;
  ev.step = total_steps;
  ev.phase = "pretrain_eval";
  ev.loss.l_video = result.heldout_loss_final;
  ev.loss.l_total = result.heldout_loss_final;
  ev.lr = 0;
  ev.wall_time = seconds_since(t0);
  metrics.append(ev);

  if (model.frozen_hash() != frozen_before)
    throw std::runtime_error("pretrain: frozen parameters changed");
  return result;
}

FinetuneResult finetune(ModelF& model, const DemoDataset& demos,
                        const Config& cfg, uint64_t seed,
                        const FinetuneOptions& opt_in, MetricsWriter& metrics) {
  const auto t0 = Clock::now();
  std::vector<int> episodes = opt_in.episodes;
  if (episodes.empty()) {
    episodes.resize(demos.episodes().size());
    for (size_t i = 0; i < episodes.size(); ++i) episodes[i] = int(i);
  }
  const int n_eps = int(episodes.size());
  if (n_eps < 1) throw std::invalid_argument("finetune: no episodes");
  const int delta_t = opt_in.delta_t > 0 ? opt_in.delta_t : cfg.delta_t_finetune;

  const std::string frozen_before = model.frozen_hash();

  const int64_t steps_per_epoch = std::max<int64_t>(1, n_eps / cfg.finetune_batch);
  int64_t total_steps = steps_per_epoch * cfg.finetune_epochs;
  if (opt_in.max_steps > 0) total_steps = opt_in.max_steps;
  const int64_t warmup_steps = std::min<int64_t>(
      steps_per_epoch * cfg.finetune_warmup_epochs, total_steps);

  AdamW<float> opt(model.store(), {cfg.adam_beta1, cfg.adam_beta2,
                                   cfg.adam_eps, cfg.weight_decay});

  std::vector<int> order = episodes;
  int64_t cursor = 0;
  Rng order_rng(hash_combine(seed, 0xf7ull));

  FinetuneResult result;
  result.steps = total_steps;

  for (int64_t step = 0; step < total_steps; ++step) {
    if (cursor % n_eps == 0) order_rng.shuffle(order);

    model.store().zero_grads();
    LossBreakdown sum;
    for (int b = 0; b < cfg.finetune_batch; ++b) {
      int ep = order[size_t(cursor % n_eps)];
      ++cursor;
      Rng rng(hash_combine(seed, 0xf1ull, uint64_t(step), uint64_t(b)));
      const auto& info = demos.episodes()[size_t(ep)];
      const int T = info.n_steps;
      int t_end = int(rng.uniform_int(uint64_t(T)));
      int present = std::min(cfg.history_len, t_end + 1);

      int dx = 0, dy = 0;
      if (cfg.augment_finetune)
        std::tie(dx, dy) = sample_shift(cfg.augment_max_shift, rng);
      auto frame_at = [&](int t) {
        ImageFrame f = demos.load_frame(ep, t);
        return (dx == 0 && dy == 0) ? f : shift_image(f, dx, dy);
      };

      SampleInput<float> in;
      in.lang = model.encode_instruction(info.instruction);
      SampleTargets<float> targets;
      const bool all = cfg.loss_all_timesteps;
      int n_supervised = all ? present : 1;
      targets.arm.resize(n_supervised, cfg.d_arm);
      targets.grip.resize(n_supervised, 1);
      int row = 0;
      for (int i = 0; i < present; ++i) {
        int t = t_end - present + 1 + i;
        in.steps.push_back(
            model.encode_step(frame_at(t), demos.load_state(ep, t)));
        if (all || i == present - 1) {
          if (cfg.video_prediction) {
            ImageFrame tf = frame_at(std::min(t + delta_t, T - 1));
            targets.video.push_back(patch_target<float>(tf, cfg.patch_size));
          }
          Action a = demos.load_action(ep, t, cfg.max_step);
          for (int k = 0; k < cfg.d_arm; ++k)
            targets.arm(row, k) = float(a.arm_delta[size_t(k)] / cfg.max_step);
          targets.grip(row, 0) = float(a.gripper_cmd);
          ++row;
        }
      }

      Graph<float> g(true, &rng);
      auto loss = model.loss(g, in, targets, SequenceMode::Finetune, all);
      g.backward(loss.l_total);
      if (loss.has_video)
        sum.l_video += double(g.value(loss.l_video)(0, 0));
      sum.l_arm += double(g.value(loss.l_arm)(0, 0));
      sum.l_gripper += double(g.value(loss.l_gripper)(0, 0));
    }
    scale_grads(model.store(), 1.f / float(cfg.finetune_batch));

    double lr = lr_schedule(step, cfg.finetune_lr, warmup_steps, total_steps);
    opt.step(lr);

    StepMetrics m;
    m.step = step;
    m.phase = "finetune";
    m.loss.l_video = sum.l_video / cfg.finetune_batch;
    m.loss.l_arm = sum.l_arm / cfg.finetune_batch;
    m.loss.l_gripper = sum.l_gripper / cfg.finetune_batch;
    m.loss.l_total = m.loss.l_arm + m.loss.l_gripper + m.loss.l_video;
    if (!std::isfinite(m.loss.l_total))
      throw std::runtime_error("finetune: non-finite loss at step " +
                               std::to_string(step));
    m.lr = lr;
    m.wall_time = seconds_since(t0);
    metrics.append(m);
    result.last = m.loss;
  }

  if (model.frozen_hash() != frozen_before)
    throw std::runtime_error("finetune: frozen parameters changed");
  return result;
}

EncoderPretrainResult pretrain_image_encoder(ParamStore<float>& store,
                                             VitEncoder<float>& vit,
                                             const VideoDataset& corpus,
                                             const Config& cfg, uint64_t seed) {
  const int n_clips = int(corpus.clips().size());
  int n_held = std::max(1, std::min(32, n_clips / 50));
  if (n_clips < 2) n_held = 0;
  const int n_train = n_clips - n_held;
  if (n_train < 1)
    throw std::invalid_argument("pretrain_image_encoder: empty corpus");
  const int clip_len = corpus.header().clip_len;

  vit.set_trainable(true);
  AdamW<float> opt(store, {cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps,
                           cfg.weight_decay});

  auto heldout_loss = [&]() {
    if (n_held == 0) return 0.0;
    double acc = 0;
    int count = std::min(n_held * clip_len, 64);
    for (int i = 0; i < count; ++i) {
      Rng rng(hash_combine(seed, 0xae5ull, uint64_t(i)));
      int clip = n_train + int(rng.uniform_int(uint64_t(n_held)));
      int frame = int(rng.uniform_int(uint64_t(clip_len)));
      Graph<float> g(false, nullptr);
      Rng mask_rng(hash_combine(seed, 0xae6ull, uint64_t(i)));
      auto loss = vit.mae_loss(g, corpus.load_frame(clip, frame),
                               cfg.mask_ratio, mask_rng);
      acc += double(g.value(loss)(0, 0));
    }
    return acc / count;
  };

  EncoderPretrainResult result;
  result.heldout_loss_step0 = heldout_loss();

  const int64_t steps_per_epoch =
      std::max<int64_t>(1, cfg.enc_frames_per_epoch / cfg.enc_batch);
  const int64_t total_steps = steps_per_epoch * cfg.enc_epochs;
  for (int64_t step = 0; step < total_steps; ++step) {
    store.zero_grads();
    double batch_loss = 0;
    for (int b = 0; b < cfg.enc_batch; ++b) {
      Rng rng(hash_combine(seed, 0xae7ull, uint64_t(step), uint64_t(b)));
      int clip = int(rng.uniform_int(uint64_t(n_train)));
      int frame = int(rng.uniform_int(uint64_t(clip_len)));
      Graph<float> g(true, &rng);
      auto loss = vit.mae_loss(g, corpus.load_frame(clip, frame),
                               cfg.mask_ratio, rng);
      g.backward(loss);
      batch_loss += double(g.value(loss)(0, 0));
    }
    if (!std::isfinite(batch_loss))
      throw std::runtime_error("pretrain_image_encoder: non-finite loss");
    scale_grads(store, 1.f / float(cfg.enc_batch));
    opt.step(cfg.enc_lr);
  }

  result.heldout_loss_final = heldout_loss();
  vit.set_trainable(false);
  return result;
}

}  // namespace gr1
