#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gr1 {

// The ten manipulation tasks.
enum class TaskId : int {
  PushRedLeft = 0,
  PushRedRight,
  PushGreenLeft,
  PushGreenRight,
  PushBlueLeft,
  PushBlueRight,
  ToggleLightOn,
  ToggleLightOff,
  OpenSlider,
  CloseSlider,
};
constexpr int kNumTasks = 10;
constexpr int kTemplatesPerTask = 12;   // 0..9 train, 10..11 held out
constexpr int kTrainTemplates = 10;

const char* task_name(TaskId id);
TaskId task_from_name(const std::string& name);

struct Instruction {
  std::string text;
  TaskId task_id = TaskId::PushRedLeft;
  int template_id = 0;

  Instruction() = default;
  Instruction(std::string text_, TaskId task, int template_id_)
      : text(std::move(text_)), task_id(task), template_id(template_id_) {
    if (text.empty()) throw std::invalid_argument("Instruction: empty text");
    if (template_id < 0 || template_id >= kTemplatesPerTask)
      throw std::invalid_argument("Instruction: template_id out of range");
  }
};

// H x W x 3 pixels in [0,1], row-major (y, x, channel).
struct ImageFrame {
  int size = 0;
  std::vector<float> pixels;

  ImageFrame() = default;
  explicit ImageFrame(int size_, float fill = 0.f)
      : size(size_), pixels(size_t(size_) * size_ * 3, fill) {
    if (size_ <= 0) throw std::invalid_argument("ImageFrame: size must be > 0");
  }

  float& at(int y, int x, int c) {
    return pixels[(size_t(y) * size + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(size_t(y) * size + x) * 3 + c];
  }
  void check_valid() const {
    for (float v : pixels)
      if (!(v >= 0.f && v <= 1.f))
        throw std::invalid_argument("ImageFrame: pixel outside [0,1]");
  }
};

struct RobotState {
  std::vector<double> arm_pose;  // components in world bounds [0,1]
  int gripper = 0;               // 0 open, 1 closed

  RobotState() = default;
  RobotState(std::vector<double> pose, int gripper_)
      : arm_pose(std::move(pose)), gripper(gripper_) {
    for (double v : arm_pose)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("RobotState: arm_pose outside [0,1]");
    if (gripper != 0 && gripper != 1)
      throw std::invalid_argument("RobotState: gripper must be 0 or 1");
  }
};

struct Action {
  std::vector<double> arm_delta;  // componentwise |delta| <= max_step
  int gripper_cmd = 0;

  Action() = default;
  Action(std::vector<double> delta, int gripper_cmd_, double max_step)
      : arm_delta(std::move(delta)), gripper_cmd(gripper_cmd_) {
    for (double v : arm_delta)
      if (!(std::abs(v) <= max_step + 1e-12))
        throw std::invalid_argument("Action: |arm_delta| exceeds max_step");
    if (gripper_cmd != 0 && gripper_cmd != 1)
      throw std::invalid_argument("Action: gripper_cmd must be 0 or 1");
  }
};

struct TrajectoryStep {
  ImageFrame frame;
  RobotState state;
  Action action;
};

struct Trajectory {
  Instruction instruction;
  std::vector<TrajectoryStep> steps;
  bool success = false;
};

struct VideoClip {
  std::string caption;
  std::vector<ImageFrame> frames;
};

}  // namespace gr1
