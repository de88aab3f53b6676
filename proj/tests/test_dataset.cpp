#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "gr1/dataset.hpp"
#include "gr1/sha256.hpp"

using namespace gr1;
namespace fs = std::filesystem;

namespace {
std::string temp_dir(const std::string& name) {
  std::string dir = (fs::temp_directory_path() / name).string();
  fs::remove_all(dir);
  return dir;
}
}  // namespace

TEST_CASE("demo dataset round-trips and reads match the source") {
  DemoGenConfig gen;
  gen.tasks = {TaskId::PushRedLeft, TaskId::CloseSlider};
  gen.scenes = {SceneId::A};
  gen.n_per_task = 2;
  gen.image_size = 32;
  auto demos = generate_demos(gen, 5);

  std::string dir = temp_dir("gr1_demo_ds");
  write_demo_dataset(dir, demos, 32, 2, 5);

  DemoDataset ds(dir);
  CHECK(ds.header().image_size == 32);
  CHECK(ds.header().d_arm == 2);
  REQUIRE(ds.episodes().size() == demos.size());

  for (size_t e = 0; e < demos.size(); ++e) {
    const Trajectory& src = demos[e].first;
    CHECK(ds.episodes()[e].n_steps == int(src.steps.size()));
    CHECK(ds.episodes()[e].instruction == src.instruction.text);
    for (int t : {0, int(src.steps.size()) - 1}) {
      ImageFrame f = ds.load_frame(int(e), t);
      // uint8 quantization: within half a step
      for (size_t i = 0; i < f.pixels.size(); ++i)
        CHECK(std::abs(f.pixels[i] - src.steps[size_t(t)].frame.pixels[i]) <=
              0.5f / 255.f + 1e-6f);
      RobotState st = ds.load_state(int(e), t);
      CHECK(st.gripper == src.steps[size_t(t)].state.gripper);
      for (int k = 0; k < 2; ++k)
        CHECK(st.arm_pose[size_t(k)] ==
              doctest::Approx(src.steps[size_t(t)].state.arm_pose[size_t(k)])
                  .epsilon(1e-6));
      Action a = ds.load_action(int(e), t, 0.05);
      CHECK(a.gripper_cmd == src.steps[size_t(t)].action.gripper_cmd);
    }
  }
}

TEST_CASE("same seed produces byte-identical datasets") {
  DemoGenConfig gen;
  gen.tasks = {TaskId::ToggleLightOff};
  gen.scenes = {SceneId::B};
  gen.n_per_task = 3;
  gen.image_size = 32;

  std::string d1 = temp_dir("gr1_ds_a"), d2 = temp_dir("gr1_ds_b");
  write_demo_dataset(d1, generate_demos(gen, 9), 32, 2, 9);
  write_demo_dataset(d2, generate_demos(gen, 9), 32, 2, 9);
  CHECK(sha256_file_hex(d1 + "/manifest.json") ==
        sha256_file_hex(d2 + "/manifest.json"));
  DemoDataset a(d1), b(d2);
  CHECK(a.header().content_hash == b.header().content_hash);
}

TEST_CASE("video dataset counts, determinism, and lazy reads") {
  std::string d1 = temp_dir("gr1_vds_a"), d2 = temp_dir("gr1_vds_b");
  write_video_dataset(d1, 5, 8, 32, 3);
  write_video_dataset(d2, 5, 8, 32, 3);
  CHECK(sha256_file_hex(d1 + "/manifest.json") ==
        sha256_file_hex(d2 + "/manifest.json"));

  VideoDataset ds(d1);
  CHECK(ds.clips().size() == 5);
  CHECK(ds.header().clip_len == 8);
  VideoClip c0 = ds.load_clip(0);
  CHECK(c0.frames.size() == 8);
  CHECK(c0.caption == ds.clips()[0].caption);

  // loaded frame equals the quantized generated frame
  VideoClip fresh = generate_clip(ds.clips()[0].seed, 8, 32);
  ImageFrame loaded = ds.load_frame(0, 3);
  for (size_t i = 0; i < loaded.pixels.size(); ++i)
    CHECK(std::abs(loaded.pixels[i] - fresh.frames[3].pixels[i]) <=
          0.5f / 255.f + 1e-6f);

  // single-clip corpus is valid
  std::string d3 = temp_dir("gr1_vds_c");
  write_video_dataset(d3, 1, 8, 32, 0);
  VideoDataset one(d3);
  CHECK(one.clips().size() == 1);
}

TEST_CASE("manifest corruption is detected at open") {
  std::string dir = temp_dir("gr1_ds_corrupt");
  write_video_dataset(dir, 2, 4, 16, 1);
  {
    std::ofstream out(dir + "/manifest.json", std::ios::trunc);
    out << "{not json";
  }
  CHECK_THROWS(VideoDataset(dir));
}
