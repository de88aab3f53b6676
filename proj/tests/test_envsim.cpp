#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "gr1/envsim.hpp"
#include "gr1/sha256.hpp"

using namespace gr1;

namespace {

bool states_equal(const EnvState& a, const EnvState& b) {
  if (a.robot.arm_pose != b.robot.arm_pose) return false;
  if (a.robot.gripper != b.robot.gripper) return false;
  for (int i = 0; i < kNumBlocks; ++i)
    if (a.blocks[i].x != b.blocks[i].x || a.blocks[i].y != b.blocks[i].y)
      return false;
  return a.light_on == b.light_on && a.slider_frac == b.slider_frac;
}

// Runs the scripted controller to completion; returns steps used or -1.
int run_expert(Env& env, double sigma, int timeout = 100) {
  for (int t = 0; t < timeout; ++t) {
    Action a = expert_action(env.mutable_state(), env.task(), env.max_step(),
                             sigma);
    auto [obs, done] = env.step(a);
    if (done) return t + 1;
  }
  return -1;
}

Env make_env(SceneId scene, TaskId task, uint64_t seed) {
  auto [state, frame] = Env::reset(scene, task, seed, 0.05, 32);
  Env env(state.scene, TaskSpec::make(task), 0.05, 32);
  env.set_state(state);
  return env;
}

}  // namespace

TEST_CASE("reset is deterministic and predicate starts false") {
  auto [s1, f1] = Env::reset(SceneId::A, TaskId::PushRedLeft, 7);
  auto [s2, f2] = Env::reset(SceneId::A, TaskId::PushRedLeft, 7);
  CHECK(states_equal(s1, s2));
  CHECK(f1.pixels == f2.pixels);

  auto [sd, fd] = Env::reset(SceneId::D, TaskId::ToggleLightOn, 0);
  CHECK_FALSE(sd.light_on);
  CHECK_FALSE(sd.done_latched);
}

TEST_CASE("1000 resets stay inside position bounds") {
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    TaskId task = TaskId(i % kNumTasks);
    SceneId scene = SceneId(i % kNumScenes);
    auto [s, f] = Env::reset(scene, task, uint64_t(i));
    for (const auto& b : s.blocks)
      if (b.x < 0 || b.x > 1 || b.y < 0 || b.y > 1) ++violations;
    for (double v : s.robot.arm_pose)
      if (v < 0 || v > 1) ++violations;
    if (s.slider_frac < 0 || s.slider_frac > 1) ++violations;
    if (s.done_latched) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("zero action leaves the state unchanged") {
  Env env = make_env(SceneId::B, TaskId::PushGreenRight, 3);
  EnvState before = env.state();
  env.step(Action({0.0, 0.0}, 0, 0.05));
  CHECK(states_equal(before, env.state()));
}

TEST_CASE("action invariant rejects oversized deltas") {
  CHECK_THROWS_AS(Action({0.06, 0.0}, 0, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(Action({0.0, -0.2}, 1, 0.05), std::invalid_argument);
  CHECK_NOTHROW(Action({0.05, -0.05}, 1, 0.05));
}

TEST_CASE("noiseless expert succeeds on every task, scene, and seed") {
  for (int t = 0; t < kNumTasks; ++t)
    for (int s = 0; s < kNumScenes; ++s)
      for (uint64_t seed = 0; seed < 5; ++seed) {
        Env env = make_env(SceneId(s), TaskId(t), seed);
        int steps = run_expert(env, 0.0);
        CAPTURE(t);
        CAPTURE(s);
        CAPTURE(seed);
        CHECK(steps > 0);
        CHECK(steps <= 100);
      }
}

TEST_CASE("noisy expert succeeds at least 95 percent of the time") {
  int ok = 0, total = 0;
  for (int t = 0; t < kNumTasks; ++t)
    for (int s = 0; s < kNumScenes; ++s)
      for (uint64_t seed = 100; seed < 105; ++seed) {
        Env env = make_env(SceneId(s), TaskId(t), seed);
        if (run_expert(env, 0.005) > 0) ++ok;
        ++total;
      }
  CHECK(double(ok) / total >= 0.95);
}

TEST_CASE("expert is deterministic and near-zero at the goal") {
  Env a = make_env(SceneId::C, TaskId::OpenSlider, 9);
  Env b = make_env(SceneId::C, TaskId::OpenSlider, 9);
  Action aa = expert_action(a.mutable_state(), a.task(), 0.05, 0.0);
  Action ab = expert_action(b.mutable_state(), b.task(), 0.05, 0.0);
  CHECK(aa.arm_delta == ab.arm_delta);
  CHECK(aa.gripper_cmd == ab.gripper_cmd);

  // complete a push, then ask for one more action
  Env env = make_env(SceneId::A, TaskId::PushRedLeft, 21);
  REQUIRE(run_expert(env, 0.0) > 0);
  Action next = expert_action(env.mutable_state(), env.task(), 0.05, 0.0);
  CHECK(std::abs(next.arm_delta[0]) < 0.06);
  CHECK(std::abs(next.arm_delta[1]) < 0.06);
}

TEST_CASE("push success latches once the threshold is crossed") {
  Env env = make_env(SceneId::A, TaskId::PushBlueLeft, 5);
  REQUIRE(run_expert(env, 0.0) > 0);
  CHECK(env.success());
  // drag the block back to the right; done stays latched
  for (int i = 0; i < 30; ++i) env.step(Action({0.05, 0.0}, 1, 0.05));
  CHECK(env.success());
}

TEST_CASE("render is pure and light state changes only the lamp pixels") {
  auto [s, f] = Env::reset(SceneId::B, TaskId::PushRedLeft, 2, 0.05, 32);
  ImageFrame f2 = render(s, 32);
  CHECK(f.pixels == f2.pixels);

  EnvState on = s, off = s;
  on.light_on = true;
  off.light_on = false;
  ImageFrame img_on = render(on, 64), img_off = render(off, 64);
  int diff = 0;
  for (size_t i = 0; i < img_on.pixels.size(); ++i)
    if (img_on.pixels[i] != img_off.pixels[i]) ++diff;
  CHECK(diff > 0);
  // differing pixels lie inside the indicator square (center 0.5, 0.07)
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c)
        if (img_on.at(y, x, c) != img_off.at(y, x, c)) {
          CHECK(std::abs((x + 0.5) / 64.0 - 0.5) <= 0.06);
          CHECK(std::abs((y + 0.5) / 64.0 - 0.07) <= 0.06);
        }
}

TEST_CASE("scene variants differ in background and button position") {
  std::set<std::string> backgrounds;
  for (int i = 0; i < kNumScenes; ++i) {
    SceneVariant v = scene_variant(SceneId(i));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3f", v.background.r,
                  v.background.g, v.background.b);
    backgrounds.insert(buf);
    for (int j = 0; j < i; ++j) {
      SceneVariant w = scene_variant(SceneId(j));
      bool btn_differs = v.button_pos.x != w.button_pos.x ||
                         v.button_pos.y != w.button_pos.y;
      CHECK(btn_differs);
    }
  }
  CHECK(backgrounds.size() == kNumScenes);
}

TEST_CASE("variant id is recoverable from a single frame by background color") {
  int correct = 0, total = 0;
  for (int s = 0; s < kNumScenes; ++s)
    for (uint64_t seed = 0; seed < 25; ++seed) {
      auto [state, f] = Env::reset(SceneId(s), TaskId(int(seed) % kNumTasks),
                                   seed);
      float r = f.at(63, 0, 0), g = f.at(63, 0, 1), b = f.at(63, 0, 2);
      int best = -1;
      double best_d = 1e9;
      for (int v = 0; v < kNumScenes; ++v) {
        Rgb bg = scene_variant(SceneId(v)).background;
        double d = (r - bg.r) * (r - bg.r) + (g - bg.g) * (g - bg.g) +
                   (b - bg.b) * (b - bg.b);
        if (d < best_d) best_d = d, best = v;
      }
      if (best == s) ++correct;
      ++total;
    }
  CHECK(correct == total);
}

TEST_CASE("instruction templates: 120 distinct strings, held-out disjoint") {
  std::set<std::string> all, train, heldout;
  for (int t = 0; t < kNumTasks; ++t)
    for (int id = 0; id < kTemplatesPerTask; ++id) {
      Instruction ins = instruction_for(TaskId(t), id);
      all.insert(ins.text);
      (id < kTrainTemplates ? train : heldout).insert(ins.text);
    }
  CHECK(all.size() == size_t(kNumTasks * kTemplatesPerTask));
  for (const auto& s : heldout) CHECK(train.count(s) == 0);

  CHECK(instruction_for(TaskId::PushRedLeft, 0).text ==
        "push the red block to the left");
  CHECK_THROWS_AS(instruction_for(TaskId::PushRedLeft, 12),
                  std::invalid_argument);
  CHECK_THROWS_AS(instruction_for(TaskId::PushRedLeft, -1),
                  std::invalid_argument);
}

TEST_CASE("generate_demos counts, success, and determinism") {
  DemoGenConfig gen;
  gen.tasks = {TaskId::PushRedLeft, TaskId::ToggleLightOn, TaskId::OpenSlider};
  gen.scenes = {SceneId::A, SceneId::D};
  gen.n_per_task = 2;
  gen.image_size = 32;
  auto demos = generate_demos(gen, 0);
  CHECK(demos.size() == 3 * 2 * 2);
  for (const auto& [traj, meta] : demos) {
    CHECK(traj.success);
    CHECK(traj.steps.size() >= 1);
    CHECK(traj.instruction.template_id < kTrainTemplates);
  }

  auto demos2 = generate_demos(gen, 0);
  REQUIRE(demos.size() == demos2.size());
  for (size_t i = 0; i < demos.size(); ++i) {
    CHECK(demos[i].first.steps.size() == demos2[i].first.steps.size());
    CHECK(demos[i].first.instruction.text == demos2[i].first.instruction.text);
    for (size_t t = 0; t < demos[i].first.steps.size(); ++t)
      CHECK(demos[i].first.steps[t].action.arm_delta ==
            demos2[i].first.steps[t].action.arm_delta);
  }
}

TEST_CASE("n_per_task=1 yields one successful demo per task") {
  DemoGenConfig gen;
  for (int t = 0; t < kNumTasks; ++t) gen.tasks.push_back(TaskId(t));
  gen.scenes = {SceneId::A};
  gen.n_per_task = 1;
  gen.image_size = 32;
  auto demos = generate_demos(gen, 11);
  CHECK(demos.size() == size_t(kNumTasks));
  for (const auto& [traj, meta] : demos) CHECK(traj.success);
}
