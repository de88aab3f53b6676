#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gr1/rng.hpp"
#include "gr1/types.hpp"

namespace gr1 {

struct Vec2 {
  double x = 0, y = 0;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const;
};

enum class SceneId : int { A = 0, B, C, D };
constexpr int kNumScenes = 4;
const char* scene_name(SceneId id);
SceneId scene_from_name(const std::string& name);

struct Rgb {
  float r, g, b;
  bool operator==(const Rgb&) const = default;
};

// The four variants differ in background color, button position, and
// slider side; task mechanics are identical.
struct SceneVariant {
  SceneId id;
  Rgb background;
  Vec2 button_pos;
  bool slider_on_right;
};
SceneVariant scene_variant(SceneId id);

struct TaskSpec {
  TaskId id;
  // push tasks
  int block_index = -1;           // 0 red, 1 green, 2 blue
  double push_direction = 0.0;    // +1 right, -1 left
  double push_threshold = 0.15;   // displacement for success
  // light tasks
  bool light_target = false;
  // slider tasks
  bool slider_open = false;       // open: frac >= 0.75, close: frac <= 0.25

  static TaskSpec make(TaskId id);
};

constexpr int kNumBlocks = 3;

struct EnvState {
  RobotState robot;
  std::array<Vec2, kNumBlocks> blocks;  // red, green, blue
  bool light_on = false;
  double slider_frac = 0.0;
  SceneVariant scene;
  Rng rng;

  // Task-episode bookkeeping: success predicates are evaluated against the
  // state captured when the task began, and latch once satisfied.
  std::array<Vec2, kNumBlocks> baseline_blocks;
  bool baseline_light = false;
  double baseline_slider = 0.0;
  bool done_latched = false;
};

// World geometry shared by dynamics, rendering, and the experts.
namespace world {
constexpr double kMargin = 0.02;
constexpr double kRobotRadius = 0.035;
constexpr double kBlockRadius = 0.045;
constexpr double kContactDist = kRobotRadius + kBlockRadius;
constexpr double kButtonRadius = 0.035;
constexpr double kSliderY0 = 0.25;
constexpr double kSliderLen = 0.5;
constexpr double kHandleReach = 0.06;
inline constexpr Rgb kBlockColors[kNumBlocks] = {
    {1.f, 0.f, 0.f}, {0.f, 0.85f, 0.f}, {0.1f, 0.2f, 1.f}};
inline constexpr Rgb kRobotColor = {0.f, 0.f, 0.f};
inline constexpr Rgb kGripClosedColor = {1.f, 0.55f, 0.f};
inline constexpr Rgb kLightOn = {1.f, 0.9f, 0.2f};
inline constexpr Rgb kLightOff = {0.25f, 0.25f, 0.25f};
inline constexpr Rgb kButtonColor = {0.62f, 0.f, 0.62f};
inline constexpr Rgb kHandleColor = {0.55f, 0.27f, 0.07f};
inline constexpr Rgb kTrackColor = {0.42f, 0.42f, 0.47f};
Vec2 slider_handle(const SceneVariant& scene, double frac);
}  // namespace world

class Env {
 public:
  Env(SceneVariant scene, const TaskSpec& task, double max_step,
      int image_size);

  // Seeded placement; the success predicate is false at reset.
  static std::pair<EnvState, ImageFrame> reset(SceneId scene, TaskId task,
                                               uint64_t seed,
                                               double max_step = 0.05,
                                               int image_size = 64);

  // Re-baselines the current environment for a new task within a chain:
  // robot pose returns to neutral, objects stay where they are.
  void begin_task(const TaskSpec& task);

  // Deterministic dynamics; out-of-bounds motion clips, a closed gripper in
  // contact drags blocks and the slider handle, and entering the button
  // region with a closed gripper toggles the light.
  std::tuple<ImageFrame, bool> step(const Action& action);

  const EnvState& state() const { return state_; }
  EnvState& mutable_state() { return state_; }
  const TaskSpec& task() const { return task_; }
  double max_step() const { return max_step_; }
  int image_size() const { return image_size_; }
  bool success() const;

  void set_state(EnvState s) { state_ = std::move(s); }

 private:
  EnvState state_;
  TaskSpec task_;
  double max_step_;
  int image_size_;
};

// Deterministic rasterization of a state.
ImageFrame render(const EnvState& state, int image_size);

// Proportional waypoint controller toward the task goal, with optional
// zero-mean noise drawn from the state rng.
Action expert_action(EnvState& state, const TaskSpec& task, double max_step,
                     double noise_sigma);

// Templates 0..9 are the training pool, 10..11 are held out.
Instruction instruction_for(TaskId task, int template_id);

struct DemoGenConfig {
  std::vector<TaskId> tasks;
  std::vector<SceneId> scenes;
  int n_per_task = 1;        // per task per scene
  double max_step = 0.05;
  int image_size = 64;
  int timeout = 100;
  double expert_noise = 0.005;
};

struct DemoEpisodeMeta {
  TaskId task;
  SceneId scene;
  int template_id;
  uint64_t episode_seed;
};

// Every returned trajectory ends in success; failed expert rollouts are
// re-seeded and retried up to 10 times, after which an error is raised.
std::vector<std::pair<Trajectory, DemoEpisodeMeta>> generate_demos(
    const DemoGenConfig& cfg, uint64_t seed);

}  // namespace gr1
