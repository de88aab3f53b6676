#include "gr1/videodata.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace gr1 {

namespace {

// Shape colors shared with the robot-task vocabulary (plus extras), so the
// caption vocabulary overlaps instruction vocabulary.
constexpr int kNumClipColors = 6;
const char* kColorNames[kNumClipColors] = {"red",    "green", "blue",
                                           "yellow", "purple", "orange"};
constexpr std::array<float, 3> kColorValues[kNumClipColors] = {
    {1.f, 0.15f, 0.1f}, {0.1f, 0.85f, 0.15f}, {0.15f, 0.25f, 1.f},
    {1.f, 0.85f, 0.1f}, {0.7f, 0.2f, 0.9f},   {1.f, 0.55f, 0.15f}};

const char* kDirectionNames[5] = {"to the left", "to the right", "up", "down",
                                  "in a circle"};
const char* kShapeNames[3] = {"circle", "square", "triangle"};

// Dark backgrounds: disjoint from the pale tabletop scene backgrounds and
// never pure black (the robot glyph color).
constexpr std::array<float, 3> kBackgrounds[6] = {
    {0.10f, 0.12f, 0.25f}, {0.08f, 0.20f, 0.12f}, {0.22f, 0.12f, 0.08f},
    {0.15f, 0.15f, 0.18f}, {0.20f, 0.08f, 0.20f}, {0.05f, 0.18f, 0.22f}};

struct Shape {
  int kind;
  int color;
  double radius;
};

void draw_shape(ImageFrame& img, const Shape& sh, double cx, double cy) {
  int n = img.size;
  const auto& col = kColorValues[sh.color];
  double r = sh.radius;
  int y0 = std::max(0, int((cy - r) * n)), y1 = std::min(n - 1, int((cy + r) * n));
  int x0 = std::max(0, int((cx - r) * n)), x1 = std::min(n - 1, int((cx + r) * n));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double px = (x + 0.5) / n, py = (y + 0.5) / n;
      double dx = px - cx, dy = py - cy;
      bool inside = false;
      switch (sh.kind) {
        case 0: inside = dx * dx + dy * dy <= r * r; break;
        case 1: inside = std::abs(dx) <= r && std::abs(dy) <= r; break;
        case 2: inside = dy <= r && dy >= -r && std::abs(dx) <= (r - dy) * 0.5; break;
      }
      if (inside) {
        img.at(y, x, 0) = col[0];
        img.at(y, x, 1) = col[1];
        img.at(y, x, 2) = col[2];
      }
    }
}

}  // namespace

const char* clip_color_name(int color) { return kColorNames[color]; }
const char* clip_direction_name(int direction) {
  return kDirectionNames[direction];
}
const char* clip_shape_name(int shape) { return kShapeNames[shape]; }
std::array<float, 3> clip_color_value(int color) { return kColorValues[color]; }

std::vector<std::array<float, 3>> clip_background_palette() {
  return {std::begin(kBackgrounds), std::end(kBackgrounds)};
}

VideoClip generate_clip(uint64_t seed, int clip_len, int image_size) {
  return generate_clip(seed, clip_len, image_size, nullptr);
}

VideoClip generate_clip(uint64_t seed, int clip_len, int image_size,
                        ClipMotion* motion_out) {
  Rng rng(hash_combine(seed, 0x51deull));
  const auto& bg = kBackgrounds[rng.uniform_int(6)];

  Shape mover{int(rng.uniform_int(3)), int(rng.uniform_int(kNumClipColors)),
              rng.uniform(0.085, 0.12)};
  int direction = int(rng.uniform_int(5));

  // Distractors are static, smaller, and never share the mover's color.
  int n_distract = int(rng.uniform_int(3));
  std::vector<Shape> distractors;
  std::vector<std::pair<double, double>> dpos;
  for (int i = 0; i < n_distract; ++i) {
    int color = int(rng.uniform_int(kNumClipColors));
    while (color == mover.color) color = int(rng.uniform_int(kNumClipColors));
    distractors.push_back({int(rng.uniform_int(3)), color, rng.uniform(0.04, 0.06)});
    dpos.emplace_back(rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85));
  }

  // Speed and start point keep the mover inside [0.12, 0.88] for the whole
  // clip, so every sampled frame pair shows visible motion.
  double max_speed = std::min(0.038, 0.76 / std::max(1, clip_len - 1));
  double speed = rng.uniform(std::min(0.028, max_speed), max_speed);
  double span = speed * (clip_len - 1);
  double lo = 0.12 + span, hi = 0.88 - span;
  double cx0 = rng.uniform(0.3, 0.7), cy0 = rng.uniform(0.3, 0.7);
  switch (direction) {
    case 0: cx0 = rng.uniform(lo, 0.88); break;
    case 1: cx0 = rng.uniform(0.12, hi); break;
    case 2: cy0 = rng.uniform(lo, 0.88); break;
    case 3: cy0 = rng.uniform(0.12, hi); break;
    default: break;
  }
  double orbit_r = rng.uniform(0.15, 0.25);
  double phase0 = rng.uniform(0, 2 * M_PI);

  VideoClip clip;
  clip.caption = std::string("the ") + kColorNames[mover.color] + " " +
                 kShapeNames[mover.kind] + " moves " + kDirectionNames[direction];
  for (int t = 0; t < clip_len; ++t) {
    ImageFrame img(image_size);
    for (int y = 0; y < image_size; ++y)
      for (int x = 0; x < image_size; ++x) {
        img.at(y, x, 0) = bg[0];
        img.at(y, x, 1) = bg[1];
        img.at(y, x, 2) = bg[2];
      }
    for (size_t i = 0; i < distractors.size(); ++i)
      draw_shape(img, distractors[i], dpos[i].first, dpos[i].second);

    double cx = cx0, cy = cy0;
    switch (direction) {
      case 0: cx = cx0 - speed * t; break;
      case 1: cx = cx0 + speed * t; break;
      case 2: cy = cy0 - speed * t; break;
      case 3: cy = cy0 + speed * t; break;
      case 4:
        cx = 0.5 + orbit_r * std::cos(phase0 + 0.35 * t);
        cy = 0.5 + orbit_r * std::sin(phase0 + 0.35 * t);
        break;
    }
    draw_shape(img, mover, cx, cy);
    clip.frames.push_back(std::move(img));
  }

  if (motion_out)
    *motion_out = {mover.kind, mover.color, direction, n_distract};
  return clip;
}

SequenceSample sample_training_sequence(const VideoClip& clip, int h,
                                        int delta_t, int stride, Rng& rng) {
  int clip_len = int(clip.frames.size());
  int span = stride * (h - 1) + stride * delta_t;
  if (span >= clip_len)
    throw std::invalid_argument(
        "sample_training_sequence: clip too short: needs index " +
        std::to_string(span) + " but clip_len is " + std::to_string(clip_len));

  int max_start = clip_len - 1 - span;
  int start = int(rng.uniform_int(uint64_t(max_start) + 1));

  SequenceSample s;
  s.caption = clip.caption;
  for (int i = 0; i < h; ++i) {
    s.input_indices.push_back(start + i * stride);
    s.target_indices.push_back(start + (i + delta_t) * stride);
  }
  return s;
}

}  // namespace gr1
