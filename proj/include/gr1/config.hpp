#pragma once

#include <cstdint>
#include <string>

namespace gr1 {

// One flat record drives a whole run. Defaults are desk-scale; the sizes
// used in the reference experiments (12 layers, 12 heads, hidden 384,
// batches 1024/512, epochs 50/20) are reachable purely through config.
struct Config {
  // model
  int layers = 4;
  int heads = 4;
  int d_model = 128;
  int history_len = 10;       // h, input sequence length in timesteps
  int delta_t_pretrain = 1;   // future-frame offset during video pre-training
  int delta_t_finetune = 3;   // future-frame offset during robot fine-tuning
  int image_size = 64;
  int patch_size = 8;
  int n_obs_tokens = 4;       // observation prediction tokens per timestep
  int n_resampler_tokens = 8; // latent tokens produced by the resampler
  int d_text = 64;            // frozen text embedding dim
  int d_img = 64;             // frozen image encoder dim
  int enc_layers = 2;         // frozen image encoder depth
  int enc_heads = 4;
  int dec_layers = 2;         // video decoder depth
  int dec_heads = 4;
  int d_arm = 2;              // planar arm pose
  double max_step = 0.05;     // per-axis action bound
  double dropout = 0.1;

  // image encoder pre-training (masked patch reconstruction)
  double mask_ratio = 0.75;
  double enc_lr = 1e-3;
  int enc_batch = 64;
  int enc_epochs = 2;
  int enc_frames_per_epoch = 4096;  // frames sampled per epoch

  // video corpus
  int clip_len = 16;
  int video_stride = 2;       // frame spacing when sampling training windows
  int n_clips = 5000;

  // demos
  int demos_per_task = 66;    // per task per scene
  double expert_noise = 0.005;

  // optimization
  double pretrain_lr = 3.6e-4;
  int pretrain_batch = 64;
  int pretrain_epochs = 10;
  int pretrain_warmup_epochs = 1;
  double finetune_lr = 1e-3;
  int finetune_batch = 64;
  int finetune_epochs = 20;
  int finetune_warmup_epochs = 1;
  double weight_decay = 0.05;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  double adam_eps = 1e-8;

  // training behavior
  bool video_prediction = true;    // off: no [OBS] tokens, no video loss
  bool loss_all_timesteps = true;  // off: losses on the last timestep only
  int augment_max_shift = 4;
  bool augment_pretrain = true;
  bool augment_finetune = true;

  // evaluation
  int n_chains = 100;
  int eval_timeout = 100;

  uint64_t seed = 0;

  int n_patches() const {
    return (image_size / patch_size) * (image_size / patch_size);
  }
  int patch_dim() const { return 3 * patch_size * patch_size; }
};

// Returns cfg unchanged if every invariant holds; throws std::invalid_argument
// naming the first violated invariant otherwise.
Config validate_config(const Config& cfg);

// Strict JSON round-trip. Absent keys take documented defaults; unknown keys
// are rejected. Serialization is byte-stable for a given config.
Config config_from_json_text(const std::string& text);
std::string config_to_json_text(const Config& cfg);
Config load_config(const std::string& path);
void save_config(const Config& cfg, const std::string& path);

}  // namespace gr1
