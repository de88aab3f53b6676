#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gr1/config.hpp"

using namespace gr1;

TEST_CASE("defaults validate and match the documented values") {
  Config cfg = config_from_json_text("{}");
  CHECK(cfg.history_len == 10);
  CHECK(cfg.delta_t_pretrain == 1);
  CHECK(cfg.delta_t_finetune == 3);
  CHECK(cfg.layers == 4);
  CHECK(cfg.heads == 4);
  CHECK(cfg.d_model == 128);
  CHECK(cfg.image_size == 64);
  CHECK(cfg.patch_size == 8);
}

TEST_CASE("reference-scale sizes are accepted") {
  Config cfg;
  cfg.layers = 12;
  cfg.heads = 12;
  cfg.d_model = 384;
  CHECK_NOTHROW(validate_config(cfg));

  cfg.pretrain_batch = 1024;
  cfg.pretrain_epochs = 50;
  cfg.pretrain_warmup_epochs = 5;
  cfg.pretrain_lr = 3.6e-4;
  cfg.finetune_batch = 512;
  cfg.finetune_epochs = 20;
  cfg.finetune_warmup_epochs = 1;
  cfg.finetune_lr = 1e-3;
  Config echoed = validate_config(cfg);
  CHECK(echoed.pretrain_batch == 1024);
  CHECK(echoed.pretrain_epochs == 50);
  CHECK(echoed.pretrain_warmup_epochs == 5);
  CHECK(echoed.finetune_batch == 512);
  CHECK(echoed.finetune_epochs == 20);
  CHECK(echoed.finetune_warmup_epochs == 1);
  CHECK(echoed.finetune_lr == 1e-3);
}

TEST_CASE("divisibility violations are named") {
  Config cfg;
  cfg.d_model = 130;
  cfg.heads = 4;
  CHECK_THROWS_WITH_AS(validate_config(cfg), "d_model not divisible by heads",
                       std::invalid_argument);

  Config cfg2;
  cfg2.image_size = 60;
  cfg2.patch_size = 8;
  CHECK_THROWS_WITH_AS(validate_config(cfg2),
                       "image_size not divisible by patch_size",
                       std::invalid_argument);
}

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS(config_from_json_text("{\"d_mode\": 128}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(config_from_json_text("[1,2,3]"), std::invalid_argument);
  CHECK_THROWS_AS(config_from_json_text("{\"layers\": \"four\"}"),
                  std::invalid_argument);
}

TEST_CASE("serialization round-trips bit-exactly") {
  Config cfg;
  cfg.pretrain_lr = 3.6e-4;
  cfg.expert_noise = 0.0051234567891234;
  cfg.seed = 0xdeadbeefcafe1234ull;
  std::string text = config_to_json_text(cfg);
  Config back = config_from_json_text(text);
  CHECK(config_to_json_text(back) == text);
  CHECK(back.pretrain_lr == cfg.pretrain_lr);
  CHECK(back.expert_noise == cfg.expert_noise);
  CHECK(back.seed == cfg.seed);
}
