#include "gr1/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gr1 {

double Vec2::norm() const { return std::sqrt(x * x + y * y); }

namespace {
const char* kSceneNames[kNumScenes] = {"A", "B", "C", "D"};

double clampd(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

Vec2 clamp_world(Vec2 p) {
  return {clampd(p.x, world::kMargin, 1.0 - world::kMargin),
          clampd(p.y, world::kMargin, 1.0 - world::kMargin)};
}
}  // namespace

const char* scene_name(SceneId id) { return kSceneNames[int(id)]; }

SceneId scene_from_name(const std::string& name) {
  for (int i = 0; i < kNumScenes; ++i)
    if (name == kSceneNames[i]) return SceneId(i);
  throw std::invalid_argument("unknown scene: " + name);
}

SceneVariant scene_variant(SceneId id) {
  switch (id) {
    case SceneId::A:
      return {id, {0.82f, 0.86f, 0.92f}, {0.30, 0.25}, false};
    case SceneId::B:
      return {id, {0.82f, 0.92f, 0.80f}, {0.70, 0.25}, true};
    case SceneId::C:
      return {id, {0.93f, 0.83f, 0.86f}, {0.30, 0.72}, false};
    case SceneId::D:
      return {id, {0.93f, 0.91f, 0.76f}, {0.70, 0.72}, true};
  }
  throw std::invalid_argument("bad scene id");
}

TaskSpec TaskSpec::make(TaskId id) {
  TaskSpec t;
  t.id = id;
  switch (id) {
    case TaskId::PushRedLeft:
    case TaskId::PushRedRight:
    case TaskId::PushGreenLeft:
    case TaskId::PushGreenRight:
    case TaskId::PushBlueLeft:
    case TaskId::PushBlueRight:
      t.block_index = int(id) / 2;
      t.push_direction = (int(id) % 2 == 0) ? -1.0 : +1.0;
      break;
    case TaskId::ToggleLightOn:
      t.light_target = true;
      break;
    case TaskId::ToggleLightOff:
      t.light_target = false;
      break;
    case TaskId::OpenSlider:
      t.slider_open = true;
      break;
    case TaskId::CloseSlider:
      t.slider_open = false;
      break;
  }
  return t;
}

namespace world {
Vec2 slider_handle(const SceneVariant& scene, double frac) {
  double x = scene.slider_on_right ? 0.94 : 0.06;
  return {x, kSliderY0 + frac * kSliderLen};
}
}  // namespace world

namespace {

bool is_push(const TaskSpec& t) { return t.block_index >= 0; }
bool is_light(const TaskSpec& t) {
  return t.id == TaskId::ToggleLightOn || t.id == TaskId::ToggleLightOff;
}
bool is_slider(const TaskSpec& t) {
  return t.id == TaskId::OpenSlider || t.id == TaskId::CloseSlider;
}

// Success relative to the task baseline. Push and slider predicates latch in
// step(); this evaluates the instantaneous condition.
bool predicate_now(const EnvState& s, const TaskSpec& t) {
  if (is_push(t)) {
    double disp = (s.blocks[t.block_index].x -
                   s.baseline_blocks[t.block_index].x) * t.push_direction;
    return disp >= t.push_threshold;
  }
  if (is_light(t))
    return s.baseline_light != t.light_target && s.light_on == t.light_target;
  if (is_slider(t)) {
    if (t.slider_open)
      return s.baseline_slider <= 0.5 && s.slider_frac >= 0.75;
    return s.baseline_slider >= 0.5 && s.slider_frac <= 0.25;
  }
  return false;
}

void capture_baseline(EnvState& s) {
  s.baseline_blocks = s.blocks;
  s.baseline_light = s.light_on;
  s.baseline_slider = s.slider_frac;
  s.done_latched = false;
}

}  // namespace

Env::Env(SceneVariant scene, const TaskSpec& task, double max_step,
         int image_size)
    : task_(task), max_step_(max_step), image_size_(image_size) {
  state_.scene = scene;
}

std::pair<EnvState, ImageFrame> Env::reset(SceneId scene_id, TaskId task_id,
                                           uint64_t seed, double max_step,
                                           int image_size) {
  TaskSpec task = TaskSpec::make(task_id);
  EnvState s;
  s.scene = scene_variant(scene_id);
  s.rng = Rng(hash_combine(seed, 0x9ull, uint64_t(scene_id), uint64_t(task_id)));

  // Blocks in a central zone, pairwise separated, leaving push room.
  auto sample_block = [&](int idx) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Vec2 p{s.rng.uniform(0.30, 0.70), s.rng.uniform(0.30, 0.70)};
      bool ok = true;
      for (int j = 0; j < idx; ++j)
        if ((p - s.blocks[j]).norm() < 0.13) ok = false;
      if (ok) return p;
    }
    throw std::runtime_error("envsim: block placement failed");
  };
  for (int i = 0; i < kNumBlocks; ++i) s.blocks[i] = sample_block(i);

  std::vector<double> pose{s.rng.uniform(0.35, 0.65), s.rng.uniform(0.35, 0.65)};
  s.robot = RobotState(pose, 0);

  // Light and slider start states keep the predicate false at reset.
  switch (task_id) {
    case TaskId::ToggleLightOn: s.light_on = false; break;
    case TaskId::ToggleLightOff: s.light_on = true; break;
    default: s.light_on = s.rng.bernoulli(0.5); break;
  }
  switch (task_id) {
    case TaskId::OpenSlider: s.slider_frac = s.rng.uniform(0.0, 0.35); break;
    case TaskId::CloseSlider: s.slider_frac = s.rng.uniform(0.65, 1.0); break;
    default: s.slider_frac = s.rng.uniform(0.0, 1.0); break;
  }

  capture_baseline(s);

  Env env(s.scene, task, max_step, image_size);
  env.state_ = s;
  ImageFrame frame = render(env.state_, image_size);
  return {env.state_, frame};
}

void Env::begin_task(const TaskSpec& task) {
  task_ = task;
  state_.robot = RobotState({0.5, 0.5}, 0);  // neutral pose, objects persist
  capture_baseline(state_);
}

std::tuple<ImageFrame, bool> Env::step(const Action& action) {
  EnvState& s = state_;
  Vec2 old_pos{s.robot.arm_pose[0], s.robot.arm_pose[1]};
  Vec2 delta{clampd(action.arm_delta[0], -max_step_, max_step_),
             clampd(action.arm_delta[1], -max_step_, max_step_)};
  Vec2 new_pos = clamp_world(old_pos + delta);
  Vec2 applied = new_pos - old_pos;

  if (action.gripper_cmd == 1) {
    for (auto& block : s.blocks) {
      if ((old_pos - block).norm() <= world::kContactDist)
        block = clamp_world(block + applied);
    }
    Vec2 handle = world::slider_handle(s.scene, s.slider_frac);
    if ((old_pos - handle).norm() <= world::kHandleReach)
      s.slider_frac = clampd(s.slider_frac + applied.y / world::kSliderLen,
                             0.0, 1.0);
    bool was_in = (old_pos - s.scene.button_pos).norm() <= world::kButtonRadius;
    bool now_in = (new_pos - s.scene.button_pos).norm() <= world::kButtonRadius;
    if (now_in && !was_in) s.light_on = !s.light_on;
  }

  s.robot = RobotState({new_pos.x, new_pos.y}, action.gripper_cmd);

  if (predicate_now(s, task_)) s.done_latched = true;
  return {render(s, image_size_), s.done_latched};
}

bool Env::success() const { return state_.done_latched; }

ImageFrame render(const EnvState& s, int image_size) {
  ImageFrame img(image_size);
  const double px = 1.0 / image_size;
  auto fill_disc = [&](Vec2 c, double r, Rgb col) {
    int y0 = std::max(0, int((c.y - r) / px)), y1 = std::min(image_size - 1, int((c.y + r) / px));
    int x0 = std::max(0, int((c.x - r) / px)), x1 = std::min(image_size - 1, int((c.x + r) / px));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double cx = (x + 0.5) * px, cy = (y + 0.5) * px;
        if ((Vec2{cx, cy} - c).norm() <= r) {
          img.at(y, x, 0) = col.r; img.at(y, x, 1) = col.g; img.at(y, x, 2) = col.b;
        }
      }
  };
  auto fill_rect = [&](Vec2 c, double hw, double hh, Rgb col) {
    int y0 = std::max(0, int((c.y - hh) / px)), y1 = std::min(image_size - 1, int((c.y + hh) / px));
    int x0 = std::max(0, int((c.x - hw) / px)), x1 = std::min(image_size - 1, int((c.x + hw) / px));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double cx = (x + 0.5) * px, cy = (y + 0.5) * px;
        if (std::abs(cx - c.x) <= hw && std::abs(cy - c.y) <= hh) {
          img.at(y, x, 0) = col.r; img.at(y, x, 1) = col.g; img.at(y, x, 2) = col.b;
        }
      }
  };

  for (int y = 0; y < image_size; ++y)
    for (int x = 0; x < image_size; ++x) {
      img.at(y, x, 0) = s.scene.background.r;
      img.at(y, x, 1) = s.scene.background.g;
      img.at(y, x, 2) = s.scene.background.b;
    }

  // slider track and handle
  double track_x = s.scene.slider_on_right ? 0.94 : 0.06;
  fill_rect({track_x, world::kSliderY0 + world::kSliderLen / 2}, 0.008,
            world::kSliderLen / 2 + 0.03, world::kTrackColor);
  fill_rect(world::slider_handle(s.scene, s.slider_frac), 0.03, 0.025,
            world::kHandleColor);

  // light indicator
  fill_rect({0.5, 0.07}, 0.05, 0.05, s.light_on ? world::kLightOn : world::kLightOff);

  // button
  fill_disc(s.scene.button_pos, 0.03, world::kButtonColor);

  // blocks
  for (int i = 0; i < kNumBlocks; ++i)
    fill_disc(s.blocks[i], world::kBlockRadius, world::kBlockColors[i]);

  // robot cross; closed gripper adds a colored core
  Vec2 rp{s.robot.arm_pose[0], s.robot.arm_pose[1]};
  fill_rect(rp, 0.045, 0.010, world::kRobotColor);
  fill_rect(rp, 0.010, 0.045, world::kRobotColor);
  if (s.robot.gripper == 1) fill_rect(rp, 0.012, 0.012, world::kGripClosedColor);

  return img;
}

namespace {

struct ControlTarget {
  Vec2 target;
  int gripper;
};

// Phase is derived from the current state, so dragging never regresses to an
// earlier approach phase. Grabs happen only once the robot is tightly
// centered; a wider hysteresis radius keeps the drag phase stable so the
// grab offset cannot eat the push margin.
constexpr double kGrabDist = 0.03;

ControlTarget expert_target(const EnvState& s, const TaskSpec& t) {
  Vec2 pos{s.robot.arm_pose[0], s.robot.arm_pose[1]};
  if (is_push(t)) {
    Vec2 block = s.blocks[t.block_index];
    Vec2 base = s.baseline_blocks[t.block_index];
    Vec2 goal{base.x + t.push_direction * (t.push_threshold + 0.06), base.y};
    double dist = (pos - block).norm();
    if (s.robot.gripper == 1 && dist <= world::kContactDist - 0.01)
      return {goal, 1};
    if (dist <= kGrabDist) return {pos, 1};  // close in place
    return {block, 0};
  }
  if (is_light(t)) {
    Vec2 btn = s.scene.button_pos;
    if (s.robot.gripper == 1) return {btn, 1};
    Vec2 away{btn.x < 0.5 ? btn.x + 0.12 : btn.x - 0.12, btn.y};
    bool staged = (pos - away).norm() <= 0.02;
    if (staged) return {pos, 1};  // close, then head for the button
    return {away, 0};
  }
  // slider
  Vec2 handle = world::slider_handle(s.scene, s.slider_frac);
  double goal_frac = t.slider_open ? 0.92 : 0.08;
  Vec2 goal = world::slider_handle(s.scene, goal_frac);
  double dist = (pos - handle).norm();
  if (s.robot.gripper == 1 && dist <= world::kHandleReach - 0.01)
    return {goal, 1};
  if (dist <= kGrabDist) return {pos, 1};
  return {handle, 0};
}

}  // namespace

Action expert_action(EnvState& s, const TaskSpec& t, double max_step,
                     double noise_sigma) {
  Vec2 pos{s.robot.arm_pose[0], s.robot.arm_pose[1]};
  ControlTarget ct = expert_target(s, t);

  Vec2 err = ct.target - pos;
  Vec2 delta{clampd(err.x, -max_step, max_step),
             clampd(err.y, -max_step, max_step)};
  if (noise_sigma > 0) {
    delta.x = clampd(delta.x + s.rng.normal(0, noise_sigma), -max_step, max_step);
    delta.y = clampd(delta.y + s.rng.normal(0, noise_sigma), -max_step, max_step);
  }
  return Action({delta.x, delta.y}, ct.gripper, max_step);
}

Instruction instruction_for(TaskId task, int template_id) {
  if (template_id < 0 || template_id >= kTemplatesPerTask)
    throw std::invalid_argument("instruction_for: template_id out of range");

  TaskSpec t = TaskSpec::make(task);
  std::string text;
  if (is_push(t)) {
    const char* color = (t.block_index == 0) ? "red"
                        : (t.block_index == 1) ? "green" : "blue";
    const char* dir = t.push_direction < 0 ? "left" : "right";
    const char* fmt[kTemplatesPerTask] = {
        "push the %s block to the %s",
        "slide the %s block to the %s",
        "move the %s block %s",
        "push the %s block %s",
        "shove the %s block to the %s",
        "slide the %s block %sward",
        "move the %s block to the %s side",
        "push the %s one to the %s",
        "drag the %s block to the %s",
        "take the %s block and push it %s",
        "nudge the %s piece toward the %s",
        "send the %s block off to the %s side",
    };
    char buf[128];
    std::snprintf(buf, sizeof(buf), fmt[template_id], color, dir);
    text = buf;
  } else if (is_light(t)) {
    bool on = t.light_target;
    const char* on_templates[kTemplatesPerTask] = {
        "turn on the light",
        "switch on the light",
        "turn the light on",
        "press the button to turn on the light",
        "switch the light on",
        "make the light turn on",
        "use the button to turn on the light",
        "turn on the lamp",
        "press the button so the light turns on",
        "activate the light",
        "use the button to start the light source",
        "make the lamp begin to glow",
    };
    const char* off_templates[kTemplatesPerTask] = {
        "turn off the light",
        "switch off the light",
        "turn the light off",
        "press the button to turn off the light",
        "switch the light off",
        "make the light turn off",
        "use the button to turn off the light",
        "turn off the lamp",
        "press the button so the light turns off",
        "deactivate the light",
        "use the button to stop the light source",
        "make the lamp go dark",
    };
    text = on ? on_templates[template_id] : off_templates[template_id];
  } else {
    bool open = t.slider_open;
    const char* open_templates[kTemplatesPerTask] = {
        "open the slider",
        "slide the door open",
        "pull the slider open",
        "move the slider up to open it",
        "open the sliding door",
        "grab the handle and open the slider",
        "push the slider open",
        "slide open the door",
        "open up the slider",
        "pull the handle to open the slider",
        "drag the handle so the door slides open",
        "get the sliding door to an open position",
    };
    const char* close_templates[kTemplatesPerTask] = {
        "close the slider",
        "slide the door closed",
        "pull the slider closed",
        "move the slider down to close it",
        "close the sliding door",
        "grab the handle and close the slider",
        "push the slider closed",
        "slide the door shut",
        "shut the slider",
        "pull the handle to close the slider",
        "drag the handle so the door slides shut",
        "get the sliding door to a closed position",
    };
    text = open ? open_templates[template_id] : close_templates[template_id];
  }
  return Instruction(text, task, template_id);
}

std::vector<std::pair<Trajectory, DemoEpisodeMeta>> generate_demos(
    const DemoGenConfig& cfg, uint64_t seed) {
  if (cfg.n_per_task < 1)
    throw std::invalid_argument("generate_demos: n_per_task must be >= 1");

  std::vector<std::pair<Trajectory, DemoEpisodeMeta>> out;
  for (SceneId scene : cfg.scenes) {
    for (TaskId task : cfg.tasks) {
      for (int i = 0; i < cfg.n_per_task; ++i) {
        uint64_t base = hash_combine(seed, uint64_t(scene), uint64_t(task),
                                     uint64_t(i));
        bool succeeded = false;
        for (int attempt = 0; attempt < 10 && !succeeded; ++attempt) {
          uint64_t ep_seed = hash_combine(base, uint64_t(attempt));
          auto [state, frame] = Env::reset(scene, task, ep_seed, cfg.max_step,
                                           cfg.image_size);
          Env env(state.scene, TaskSpec::make(task), cfg.max_step,
                  cfg.image_size);
          env.set_state(state);

          Rng inst_rng(hash_combine(ep_seed, 0x715ull));
          int template_id = int(inst_rng.uniform_int(kTrainTemplates));

          Trajectory traj;
          traj.instruction = instruction_for(task, template_id);
          ImageFrame obs = frame;
          bool done = false;
          for (int step = 0; step < cfg.timeout && !done; ++step) {
            RobotState st = env.state().robot;
            Action a = expert_action(env.mutable_state(), env.task(),
                                     cfg.max_step, cfg.expert_noise);
            auto [next_obs, d] = env.step(a);
            traj.steps.push_back({obs, st, a});
            obs = next_obs;
            done = d;
          }
          if (done) {
            traj.success = true;
            out.emplace_back(std::move(traj),
                             DemoEpisodeMeta{task, scene, template_id, ep_seed});
            succeeded = true;
          }
        }
        if (!succeeded)
          throw std::runtime_error(std::string("generate_demos: task ") +
                                   task_name(task) + " failed 10 retries");
      }
    }
  }
  return out;
}

}  // namespace gr1
