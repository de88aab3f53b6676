#pragma once

#include <array>
#include <string>
#include <vector>

#include "gr1/rng.hpp"
#include "gr1/types.hpp"

namespace gr1 {

// Ground truth behind a generated clip, kept alongside the caption so tests
// can check the caption against the actual motion.
struct ClipMotion {
  int shape = 0;        // 0 circle, 1 square, 2 triangle
  int color = 0;        // index into clip color palette
  int direction = 0;    // 0 left, 1 right, 2 up, 3 down, 4 circle
  int n_distractors = 0;
};

const char* clip_color_name(int color);
const char* clip_direction_name(int direction);
const char* clip_shape_name(int shape);
std::array<float, 3> clip_color_value(int color);

// One clip: clip_len frames of a single moving shape plus static distractors
// on a background palette disjoint from the tabletop scenes. No robot glyph
// is ever drawn.
VideoClip generate_clip(uint64_t seed, int clip_len, int image_size);
VideoClip generate_clip(uint64_t seed, int clip_len, int image_size,
                        ClipMotion* motion_out);

// Spacing-`stride` window of h input frames plus the target frame `delta_t`
// spaced steps after the last input.
struct SequenceSample {
  std::vector<int> input_indices;   // h entries
  std::vector<int> target_indices;  // per-timestep targets, h entries
  std::string caption;
};
SequenceSample sample_training_sequence(const VideoClip& clip, int h,
                                        int delta_t, int stride, Rng& rng);

// Background palette used by clips; exposed so the disjointness with scene
// backgrounds can be asserted.
std::vector<std::array<float, 3>> clip_background_palette();

}  // namespace gr1
