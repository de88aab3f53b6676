#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gr1/envsim.hpp"
#include "gr1/types.hpp"
#include "gr1/videodata.hpp"

namespace gr1 {

// On-disk layout: a directory holding manifest.json plus one binary file per
// episode. Demo episode blobs are [images uint8 n*H*W*3][states f32 n*(d_arm+1)]
// [actions f32 n*(d_arm+1)], little-endian; clip blobs are
// [frames uint8 clip_len*H*W*3]. The manifest records per-file SHA-256 hashes
// and the byte layout parameters.

struct DemoEpisodeInfo {
  int id = 0;
  TaskId task;
  SceneId scene;
  int template_id = 0;
  uint64_t seed = 0;
  int n_steps = 0;
  std::string instruction;
  std::string file;
  std::string sha256;
};

struct ClipInfo {
  int id = 0;
  std::string caption;
  ClipMotion motion;
  uint64_t seed = 0;
  std::string file;
  std::string sha256;
};

struct DatasetHeader {
  std::string type;  // "demos" or "videos"
  int image_size = 0;
  int d_arm = 0;      // demos only
  int clip_len = 0;   // videos only
  uint64_t seed = 0;
  std::string content_hash;  // hash over all episode hashes, in id order
};

void write_demo_dataset(
    const std::string& dir,
    const std::vector<std::pair<Trajectory, DemoEpisodeMeta>>& demos,
    int image_size, int d_arm, uint64_t seed);

void write_video_dataset(const std::string& dir, int n_clips, int clip_len,
                         int image_size, uint64_t seed);

class DemoDataset {
 public:
  explicit DemoDataset(const std::string& dir);
  const DatasetHeader& header() const { return header_; }
  const std::vector<DemoEpisodeInfo>& episodes() const { return episodes_; }

  // Episode step reads go straight to the blob at the right offset.
  ImageFrame load_frame(int episode, int step) const;
  RobotState load_state(int episode, int step) const;
  Action load_action(int episode, int step, double max_step) const;
  Trajectory load_trajectory(int episode, double max_step) const;

 private:
  std::string dir_;
  DatasetHeader header_;
  std::vector<DemoEpisodeInfo> episodes_;
};

class VideoDataset {
 public:
  explicit VideoDataset(const std::string& dir);
  const DatasetHeader& header() const { return header_; }
  const std::vector<ClipInfo>& clips() const { return clips_; }

  ImageFrame load_frame(int clip, int frame) const;
  VideoClip load_clip(int clip) const;

 private:
  std::string dir_;
  DatasetHeader header_;
  std::vector<ClipInfo> clips_;
};

}  // namespace gr1
