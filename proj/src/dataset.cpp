#include "gr1/dataset.hpp"

#include <filesystem>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gr1/sha256.hpp"
#include "json.hpp"

namespace gr1 {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::vector<uint8_t> quantize_frame(const ImageFrame& f) {
  std::vector<uint8_t> out(f.pixels.size());
  for (size_t i = 0; i < f.pixels.size(); ++i) {
    float v = f.pixels[i] * 255.f + 0.5f;
    out[i] = uint8_t(v < 0.f ? 0 : (v > 255.f ? 255 : v));
  }
  return out;
}

void append_f32(std::vector<uint8_t>& buf, const std::vector<double>& vals) {
  for (double d : vals) {
    float f = float(d);
    uint8_t b[4];
    std::memcpy(b, &f, 4);
    buf.insert(buf.end(), b, b + 4);
  }
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw std::runtime_error("dataset: write failed for " + path);
}

std::vector<uint8_t> read_slice(const std::string& path, size_t offset,
                                size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  in.seekg(std::streamoff(offset));
  std::vector<uint8_t> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n));
  if (size_t(in.gcount()) != n)
    throw std::runtime_error("dataset: short read from " + path);
  return buf;
}

std::string episode_filename(const char* prefix, int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05d.bin", prefix, id);
  return buf;
}

json load_manifest(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in)
    throw std::runtime_error("dataset: missing manifest in " + dir);
  json j;
  in >> j;
  return j;
}

}  // namespace

void write_demo_dataset(
    const std::string& dir,
    const std::vector<std::pair<Trajectory, DemoEpisodeMeta>>& demos,
    int image_size, int d_arm, uint64_t seed) {
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = 1;
  manifest["type"] = "demos";
  manifest["image_size"] = image_size;
  manifest["d_arm"] = d_arm;
  manifest["seed"] = seed;
  manifest["layout"] =
      "per episode: images uint8 [n,H,W,3]; states float32 [n,d_arm+1]; "
      "actions float32 [n,d_arm+1]; little-endian";

  Sha256Stream all;
  json eps = json::array();
  for (size_t i = 0; i < demos.size(); ++i) {
    const Trajectory& traj = demos[i].first;
    const DemoEpisodeMeta& meta = demos[i].second;
    std::vector<uint8_t> blob;
    for (const auto& s : traj.steps) {
      auto q = quantize_frame(s.frame);
      blob.insert(blob.end(), q.begin(), q.end());
    }
    for (const auto& s : traj.steps) {
      std::vector<double> st = s.state.arm_pose;
      st.push_back(double(s.state.gripper));
      append_f32(blob, st);
    }
    for (const auto& s : traj.steps) {
      std::vector<double> ac = s.action.arm_delta;
      ac.push_back(double(s.action.gripper_cmd));
      append_f32(blob, ac);
    }
    std::string file = episode_filename("ep", int(i));
    write_file(dir + "/" + file, blob);
    std::string hash = sha256_hex(blob);
    all.update(hash.data(), hash.size());

    json e;
    e["id"] = int(i);
    e["task"] = task_name(meta.task);
    e["scene"] = scene_name(meta.scene);
    e["template_id"] = meta.template_id;
    e["seed"] = meta.episode_seed;
    e["n_steps"] = int(traj.steps.size());
    e["instruction"] = traj.instruction.text;
    e["file"] = file;
    e["sha256"] = hash;
    eps.push_back(std::move(e));
  }
  manifest["episodes"] = std::move(eps);
  manifest["content_hash"] = all.hex();

  std::ofstream out(dir + "/manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("dataset: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

void write_video_dataset(const std::string& dir, int n_clips, int clip_len,
                         int image_size, uint64_t seed) {
  if (n_clips < 1)
    throw std::invalid_argument("write_video_dataset: n_clips must be >= 1");
  fs::create_directories(dir);
  json manifest;
  manifest["format_version"] = 1;
  manifest["type"] = "videos";
  manifest["image_size"] = image_size;
  manifest["clip_len"] = clip_len;
  manifest["seed"] = seed;
  manifest["layout"] = "per clip: frames uint8 [clip_len,H,W,3]";

  Sha256Stream all;
  json clips = json::array();
  for (int i = 0; i < n_clips; ++i) {
    uint64_t clip_seed = hash_combine(seed, 0xc11bull, uint64_t(i));
    ClipMotion motion;
    VideoClip clip = generate_clip(clip_seed, clip_len, image_size, &motion);
    std::vector<uint8_t> blob;
    for (const auto& f : clip.frames) {
      auto q = quantize_frame(f);
      blob.insert(blob.end(), q.begin(), q.end());
    }
    std::string file = episode_filename("clip", i);
    write_file(dir + "/" + file, blob);
    std::string hash = sha256_hex(blob);
    all.update(hash.data(), hash.size());

    json e;
    e["id"] = i;
    e["caption"] = clip.caption;
    e["shape"] = motion.shape;
    e["color"] = motion.color;
    e["direction"] = motion.direction;
    e["n_distractors"] = motion.n_distractors;
    e["seed"] = clip_seed;
    e["file"] = file;
    e["sha256"] = hash;
    clips.push_back(std::move(e));
  }
  manifest["clips"] = std::move(clips);
  manifest["content_hash"] = all.hex();

  std::ofstream out(dir + "/manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("dataset: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

DemoDataset::DemoDataset(const std::string& dir) : dir_(dir) {
  json j = load_manifest(dir);
  if (j.value("type", "") != "demos")
    throw std::runtime_error("dataset: not a demo dataset: " + dir);
  header_.type = "demos";
  header_.image_size = j.at("image_size").get<int>();
  header_.d_arm = j.at("d_arm").get<int>();
  header_.seed = j.at("seed").get<uint64_t>();
  header_.content_hash = j.at("content_hash").get<std::string>();
  for (const auto& e : j.at("episodes")) {
    DemoEpisodeInfo info;
    info.id = e.at("id").get<int>();
    info.task = task_from_name(e.at("task").get<std::string>());
    info.scene = scene_from_name(e.at("scene").get<std::string>());
    info.template_id = e.at("template_id").get<int>();
    info.seed = e.at("seed").get<uint64_t>();
    info.n_steps = e.at("n_steps").get<int>();
    info.instruction = e.at("instruction").get<std::string>();
    info.file = e.at("file").get<std::string>();
    info.sha256 = e.at("sha256").get<std::string>();
    episodes_.push_back(std::move(info));
  }
}

ImageFrame DemoDataset::load_frame(int episode, int step) const {
  const auto& e = episodes_.at(size_t(episode));
  size_t frame_bytes = size_t(header_.image_size) * header_.image_size * 3;
  auto bytes = read_slice(dir_ + "/" + e.file, size_t(step) * frame_bytes,
                          frame_bytes);
  ImageFrame f(header_.image_size);
  for (size_t i = 0; i < bytes.size(); ++i) f.pixels[i] = bytes[i] / 255.f;
  return f;
}

RobotState DemoDataset::load_state(int episode, int step) const {
  const auto& e = episodes_.at(size_t(episode));
  size_t frame_bytes = size_t(header_.image_size) * header_.image_size * 3;
  size_t rec = size_t(header_.d_arm + 1) * 4;
  size_t off = size_t(e.n_steps) * frame_bytes + size_t(step) * rec;
  auto bytes = read_slice(dir_ + "/" + e.file, off, rec);
  std::vector<double> pose(header_.d_arm);
  for (int i = 0; i < header_.d_arm; ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 4 * i, 4);
    pose[i] = f;
  }
  float g;
  std::memcpy(&g, bytes.data() + 4 * header_.d_arm, 4);
  return RobotState(pose, int(g));
}

Action DemoDataset::load_action(int episode, int step, double max_step) const {
  const auto& e = episodes_.at(size_t(episode));
  size_t frame_bytes = size_t(header_.image_size) * header_.image_size * 3;
  size_t rec = size_t(header_.d_arm + 1) * 4;
  size_t off = size_t(e.n_steps) * (frame_bytes + rec) + size_t(step) * rec;
  auto bytes = read_slice(dir_ + "/" + e.file, off, rec);
  std::vector<double> delta(header_.d_arm);
  for (int i = 0; i < header_.d_arm; ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 4 * i, 4);
    // float32 storage can round boundary values just past the bound
    delta[i] = std::min(std::max(double(f), -max_step), max_step);
  }
  float g;
  std::memcpy(&g, bytes.data() + 4 * header_.d_arm, 4);
  return Action(delta, int(g), max_step);
}

Trajectory DemoDataset::load_trajectory(int episode, double max_step) const {
  const auto& e = episodes_.at(size_t(episode));
  Trajectory t;
  t.instruction = Instruction(e.instruction, e.task, e.template_id);
  t.success = true;
  for (int s = 0; s < e.n_steps; ++s)
    t.steps.push_back({load_frame(episode, s), load_state(episode, s),
                       load_action(episode, s, max_step)});
  return t;
}

VideoDataset::VideoDataset(const std::string& dir) : dir_(dir) {
  json j = load_manifest(dir);
  if (j.value("type", "") != "videos")
    throw std::runtime_error("dataset: not a video dataset: " + dir);
  header_.type = "videos";
  header_.image_size = j.at("image_size").get<int>();
  header_.clip_len = j.at("clip_len").get<int>();
  header_.seed = j.at("seed").get<uint64_t>();
  header_.content_hash = j.at("content_hash").get<std::string>();
  for (const auto& e : j.at("clips")) {
    ClipInfo info;
    info.id = e.at("id").get<int>();
    info.caption = e.at("caption").get<std::string>();
    info.motion.shape = e.at("shape").get<int>();
    info.motion.color = e.at("color").get<int>();
    info.motion.direction = e.at("direction").get<int>();
    info.motion.n_distractors = e.at("n_distractors").get<int>();
    info.seed = e.at("seed").get<uint64_t>();
    info.file = e.at("file").get<std::string>();
    info.sha256 = e.at("sha256").get<std::string>();
    clips_.push_back(std::move(info));
  }
}

ImageFrame VideoDataset::load_frame(int clip, int frame) const {
  const auto& c = clips_.at(size_t(clip));
  size_t frame_bytes = size_t(header_.image_size) * header_.image_size * 3;
  auto bytes = read_slice(dir_ + "/" + c.file, size_t(frame) * frame_bytes,
                          frame_bytes);
  ImageFrame f(header_.image_size);
  for (size_t i = 0; i < bytes.size(); ++i) f.pixels[i] = bytes[i] / 255.f;
  return f;
}

VideoClip VideoDataset::load_clip(int clip) const {
  const auto& c = clips_.at(size_t(clip));
  VideoClip v;
  v.caption = c.caption;
  for (int i = 0; i < header_.clip_len; ++i)
    v.frames.push_back(load_frame(clip, i));
  return v;
}

}  // namespace gr1
