#pragma once

#include "gr1/tensor.hpp"
#include "gr1/types.hpp"

namespace gr1 {

// Row-major patch grid; within a patch, pixels row-major with interleaved rgb.
template <class S>
MatX<S> patchify(const ImageFrame& frame, int patch_size) {
  const int n = frame.size / patch_size;
  const int pd = 3 * patch_size * patch_size;
  MatX<S> out(n * n, pd);
  for (int py = 0; py < n; ++py)
    for (int px = 0; px < n; ++px) {
      int row = py * n + px;
      int k = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          for (int c = 0; c < 3; ++c)
            out(row, k++) = S(frame.at(py * patch_size + y,
                                       px * patch_size + x, c));
    }
  return out;
}

template <class S>
ImageFrame unpatchify(const MatX<S>& patches, int patch_size) {
  const int n = int(std::sqrt(double(patches.rows())) + 0.5);
  ImageFrame frame(n * patch_size);
  for (int py = 0; py < n; ++py)
    for (int px = 0; px < n; ++px) {
      int row = py * n + px;
      int k = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          for (int c = 0; c < 3; ++c)
            frame.at(py * patch_size + y, px * patch_size + x, c) =
                float(patches(row, k++));
    }
  return frame;
}

// Per-patch standardization: subtract mean, divide by (std + eps).
template <class S>
MatX<S> normalize_patches(const MatX<S>& patches, MatX<S>* means = nullptr,
                          MatX<S>* stds = nullptr, S eps = S(1e-6)) {
  MatX<S> out(patches.rows(), patches.cols());
  if (means) means->resize(patches.rows(), 1);
  if (stds) stds->resize(patches.rows(), 1);
  for (int r = 0; r < patches.rows(); ++r) {
    S mean = patches.row(r).mean();
    S var = (patches.row(r).array() - mean).square().mean();
    S sd = std::sqrt(var);
    out.row(r) = ((patches.row(r).array() - mean) / (sd + eps)).matrix();
    if (means) (*means)(r, 0) = mean;
    if (stds) (*stds)(r, 0) = sd;
  }
  return out;
}

template <class S>
MatX<S> denormalize_patches(const MatX<S>& normalized, const MatX<S>& means,
                            const MatX<S>& stds, S eps = S(1e-6)) {
  MatX<S> out(normalized.rows(), normalized.cols());
  for (int r = 0; r < normalized.rows(); ++r)
    out.row(r) =
        (normalized.row(r).array() * (stds(r, 0) + eps) + means(r, 0)).matrix();
  return out;
}

// Normalized reconstruction target for a frame.
template <class S>
MatX<S> patch_target(const ImageFrame& frame, int patch_size) {
  return normalize_patches(patchify<S>(frame, patch_size));
}

}  // namespace gr1
