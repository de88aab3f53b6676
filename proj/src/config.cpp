#include "gr1/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace gr1 {

using json = nlohmann::ordered_json;

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Field table: single source of truth for names, accessors, and JSON I/O.
template <class F>
void for_each_field(Config& c, F&& f) {
  f("layers", c.layers);
  f("heads", c.heads);
  f("d_model", c.d_model);
  f("history_len", c.history_len);
  f("delta_t_pretrain", c.delta_t_pretrain);
  f("delta_t_finetune", c.delta_t_finetune);
  f("image_size", c.image_size);
  f("patch_size", c.patch_size);
  f("n_obs_tokens", c.n_obs_tokens);
  f("n_resampler_tokens", c.n_resampler_tokens);
  f("d_text", c.d_text);
  f("d_img", c.d_img);
  f("enc_layers", c.enc_layers);
  f("enc_heads", c.enc_heads);
  f("dec_layers", c.dec_layers);
  f("dec_heads", c.dec_heads);
  f("d_arm", c.d_arm);
  f("max_step", c.max_step);
  f("dropout", c.dropout);
  f("mask_ratio", c.mask_ratio);
  f("enc_lr", c.enc_lr);
  f("enc_batch", c.enc_batch);
  f("enc_epochs", c.enc_epochs);
  f("enc_frames_per_epoch", c.enc_frames_per_epoch);
  f("clip_len", c.clip_len);
  f("video_stride", c.video_stride);
  f("n_clips", c.n_clips);
  f("demos_per_task", c.demos_per_task);
  f("expert_noise", c.expert_noise);
  f("pretrain_lr", c.pretrain_lr);
  f("pretrain_batch", c.pretrain_batch);
  f("pretrain_epochs", c.pretrain_epochs);
  f("pretrain_warmup_epochs", c.pretrain_warmup_epochs);
  f("finetune_lr", c.finetune_lr);
  f("finetune_batch", c.finetune_batch);
  f("finetune_epochs", c.finetune_epochs);
  f("finetune_warmup_epochs", c.finetune_warmup_epochs);
  f("weight_decay", c.weight_decay);
  f("adam_beta1", c.adam_beta1);
  f("adam_beta2", c.adam_beta2);
  f("adam_eps", c.adam_eps);
  f("video_prediction", c.video_prediction);
  f("loss_all_timesteps", c.loss_all_timesteps);
  f("augment_max_shift", c.augment_max_shift);
  f("augment_pretrain", c.augment_pretrain);
  f("augment_finetune", c.augment_finetune);
  f("n_chains", c.n_chains);
  f("eval_timeout", c.eval_timeout);
  f("seed", c.seed);
}

}  // namespace

Config validate_config(const Config& cfg) {
  const Config& c = cfg;
  require(c.layers >= 0, "layers must be >= 0");
  require(c.heads >= 1, "heads must be >= 1");
  require(c.d_model >= 1, "d_model must be >= 1");
  require(c.d_model % c.heads == 0, "d_model not divisible by heads");
  require(c.history_len >= 1, "history_len must be >= 1");
  require(c.delta_t_pretrain >= 1, "delta_t_pretrain must be >= 1");
  require(c.delta_t_finetune >= 1, "delta_t_finetune must be >= 1");
  require(c.image_size >= 1, "image_size must be >= 1");
  require(c.patch_size >= 1, "patch_size must be >= 1");
  require(c.image_size % c.patch_size == 0,
          "image_size not divisible by patch_size");
  require(c.n_obs_tokens >= 1, "n_obs_tokens must be >= 1");
  require(c.n_resampler_tokens >= 1, "n_resampler_tokens must be >= 1");
  require(c.n_resampler_tokens <= c.n_patches(),
          "n_resampler_tokens exceeds patch count");
  require(c.d_text >= 1, "d_text must be >= 1");
  require(c.d_img >= 1, "d_img must be >= 1");
  require(c.d_img % c.enc_heads == 0, "d_img not divisible by enc_heads");
  require(c.d_model % c.dec_heads == 0, "d_model not divisible by dec_heads");
  require(c.enc_layers >= 1, "enc_layers must be >= 1");
  require(c.dec_layers >= 1, "dec_layers must be >= 1");
  require(c.d_arm >= 1, "d_arm must be >= 1");
  require(c.max_step > 0, "max_step must be > 0");
  require(c.dropout >= 0 && c.dropout < 1, "dropout must be in [0,1)");
  require(c.mask_ratio >= 0 && c.mask_ratio < 1, "mask_ratio must be in [0,1)");
  require(c.clip_len >= 2, "clip_len must be >= 2");
  require(c.video_stride >= 1, "video_stride must be >= 1");
  require(c.n_clips >= 1, "n_clips must be >= 1");
  require(c.demos_per_task >= 1, "demos_per_task must be >= 1");
  require(c.expert_noise >= 0, "expert_noise must be >= 0");
  require(c.pretrain_lr > 0 && c.finetune_lr > 0 && c.enc_lr > 0,
          "learning rates must be > 0");
  require(c.pretrain_batch >= 1 && c.finetune_batch >= 1 && c.enc_batch >= 1,
          "batch sizes must be >= 1");
  require(c.pretrain_epochs >= 0 && c.finetune_epochs >= 0,
          "epochs must be >= 0");
  require(c.pretrain_warmup_epochs >= 0 && c.finetune_warmup_epochs >= 0,
          "warmup epochs must be >= 0");
  require(c.adam_beta1 >= 0 && c.adam_beta1 < 1, "adam_beta1 must be in [0,1)");
  require(c.adam_beta2 >= 0 && c.adam_beta2 < 1, "adam_beta2 must be in [0,1)");
  require(c.adam_eps > 0, "adam_eps must be > 0");
  require(c.weight_decay >= 0, "weight_decay must be >= 0");
  require(c.augment_max_shift >= 0, "augment_max_shift must be >= 0");
  require(c.augment_max_shift < c.image_size / 4,
          "augment_max_shift must be < image_size/4");
  require(c.n_chains >= 1, "n_chains must be >= 1");
  require(c.eval_timeout >= 0, "eval_timeout must be >= 0");
  return cfg;
}

Config config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") +
                                e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: expected an object");

  Config cfg;
  std::set<std::string> known;
  for_each_field(cfg, [&](const char* name, auto& field) {
    known.insert(name);
    auto it = j.find(name);
    if (it == j.end()) return;  // absent field keeps its default
    try {
      field = it->get<std::decay_t<decltype(field)>>();
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("config: bad value for key '") +
                                  name + "'");
    }
  });
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() + "'");
  }
  return validate_config(cfg);
}

std::string config_to_json_text(const Config& cfg) {
  json j = json::object();
  for_each_field(const_cast<Config&>(cfg),
                 [&](const char* name, auto& field) { j[name] = field; });
  return j.dump(2) + "\n";
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

void save_config(const Config& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("config: cannot write " + path);
  out << config_to_json_text(cfg);
}

}  // namespace gr1
