#include "gr1/types.hpp"

namespace gr1 {

namespace {
const char* kTaskNames[kNumTasks] = {
    "push_red_left",   "push_red_right",  "push_green_left",
    "push_green_right", "push_blue_left", "push_blue_right",
    "toggle_light_on", "toggle_light_off", "open_slider",
    "close_slider",
};
}

const char* task_name(TaskId id) { return kTaskNames[int(id)]; }

TaskId task_from_name(const std::string& name) {
  for (int i = 0; i < kNumTasks; ++i)
    if (name == kTaskNames[i]) return TaskId(i);
  throw std::invalid_argument("unknown task: " + name);
}

}  // namespace gr1
