#pragma once

#include <array>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "gr1/config.hpp"
#include "gr1/dataset.hpp"
#include "gr1/envsim.hpp"
#include "gr1/model.hpp"

namespace gr1 {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode(const Instruction& instruction) = 0;
  virtual Action act(EnvState& state, const ImageFrame& obs) = 0;
};

// Closed-loop wrapper around the trained model: keeps the last <= h frozen
// embeddings and states, decodes the final action token each step.
class ModelPolicy : public Policy {
 public:
  ModelPolicy(Gr1Model<float>& model) : model_(&model) {}

  void begin_episode(const Instruction& instruction) override {
    lang_ = model_->encode_instruction(instruction.text);
    history_.clear();
  }

  Action act(EnvState& state, const ImageFrame& obs) override {
    history_.push_back(model_->encode_step(obs, state.robot));
    while (int(history_.size()) > model_->config().history_len)
      history_.pop_front();
    SampleInput<float> in;
    in.lang = lang_;
    in.steps.assign(history_.begin(), history_.end());
    auto [arm, grip_logit] = model_->predict_action(in);
    const double ms = model_->config().max_step;
    std::vector<double> delta(arm.size());
    for (size_t i = 0; i < arm.size(); ++i) delta[i] = arm[i] * ms;
    return Action(delta, grip_logit > 0 ? 1 : 0, ms);
  }

 private:
  Gr1Model<float>* model_;
  Eigen::VectorXd lang_;
  std::deque<StepInput<float>> history_;
};

// Privileged oracle policy driving the scripted controller.
class ExpertPolicy : public Policy {
 public:
  ExpertPolicy(TaskSpec task, double max_step, double noise_sigma = 0.0)
      : task_(task), max_step_(max_step), sigma_(noise_sigma) {}
  void begin_episode(const Instruction& instruction) override {
    task_ = TaskSpec::make(instruction.task_id);
  }
  Action act(EnvState& state, const ImageFrame&) override {
    return expert_action(state, task_, max_step_, sigma_);
  }

 private:
  TaskSpec task_;
  double max_step_;
  double sigma_;
};

class RandomPolicy : public Policy {
 public:
  RandomPolicy(uint64_t seed, double max_step)
      : rng_(seed), max_step_(max_step) {}
  void begin_episode(const Instruction&) override {}
  Action act(EnvState&, const ImageFrame&) override {
    return Action({rng_.uniform(-max_step_, max_step_),
                   rng_.uniform(-max_step_, max_step_)},
                  rng_.bernoulli(0.5) ? 1 : 0, max_step_);
  }

 private:
  Rng rng_;
  double max_step_;
};

struct RolloutResult {
  TaskId task_id;
  bool success = false;
  int steps_used = 0;
};

// Steps the prepared environment until success or timeout.
RolloutResult rollout(Policy& policy, Env& env, const Instruction& instruction,
                      int timeout);

// Fresh seeded episode for a single task.
RolloutResult rollout_episode(Policy& policy, TaskId task, SceneId scene,
                              const Instruction& instruction, int timeout,
                              uint64_t seed, double max_step, int image_size);

enum class LanguageMode { TrainTemplates, UnseenTemplates };
const char* language_mode_name(LanguageMode mode);

struct ChainEvalResult {
  std::vector<int> completed;  // per chain, 0..5
  std::array<double, 5> sr{};  // sr@1..sr@5
  double avg_len = 0;
};

// sr@k and average length from per-chain completed counts.
ChainEvalResult chain_metrics(std::vector<int> completed);

// 5-task chains without immediate repetition; objects persist within a chain
// and the robot returns to a neutral pose before each task.
ChainEvalResult evaluate_chains(Policy& policy, int n_chains, SceneId scene,
                                LanguageMode language, uint64_t seed,
                                int timeout, double max_step, int image_size);

// Deterministic chain task sequence for a given chain seed.
std::vector<TaskId> sample_chain_tasks(uint64_t chain_seed, int length = 5);

struct SplitSpec {
  std::string id;
  std::vector<SceneId> train_scenes;
  SceneId eval_scene = SceneId::D;
  LanguageMode language = LanguageMode::TrainTemplates;
  double subsample_fraction = 1.0;
};

// Split ids: ABCD_D, ABC_D, tenpercent, unseen_lang.
SplitSpec make_split(const std::string& split_id);

// Episode indices this split trains on (scene filter plus per-task uniform
// subsampling for the reduced-data split).
std::vector<int> split_train_episodes(const SplitSpec& split,
                                      const DemoDataset& demos, uint64_t seed);

struct EvalReport {
  std::string split;
  std::string language_mode;
  int n_chains = 0;
  std::array<double, 5> sr{};
  double avg_len = 0;
  uint64_t seed = 0;
  std::string checkpoint_hash;
};

void save_eval_report(const EvalReport& report, const std::string& path);
EvalReport load_eval_report(const std::string& path);

struct AblationCell {
  std::string name;
  bool pretrained_init = false;
  bool video_prediction = true;
  int delta_t = -1;  // -1 = config default
};

std::vector<AblationCell> standard_ablation_cells();
std::vector<AblationCell> future_step_sweep_cells();

struct AblationRun {
  std::string cell;
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EvalReport report;
};

struct AblationCellSummary {
  std::string cell;
  int n_ok = 0;
  double avg_len_mean = 0;
  double avg_len_std = 0;  // population std over seeds
};

struct AblationReport {
  std::vector<AblationRun> runs;
  std::vector<AblationCellSummary> cells;
};

// Trains each cell across the seeds, evaluates chains with chain seeds shared
// across cells, and persists one eval report per run under out_dir/runs. A
// failing cell is recorded and the remaining cells continue.
AblationReport run_ablation(const std::vector<AblationCell>& cells,
                            const Config& cfg, const std::vector<uint64_t>& seeds,
                            const std::string& demos_dir,
                            const std::string& encoder_checkpoint,
                            const std::string& pretrain_checkpoint,
                            const std::string& split_id,
                            const std::string& out_dir);

// Rebuilds the aggregate report from runs already on disk.
AblationReport build_ablation_report(const std::string& out_dir);
void save_ablation_report(const AblationReport& report,
                          const std::string& path);

}  // namespace gr1
