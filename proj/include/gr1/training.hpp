#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gr1/config.hpp"
#include "gr1/dataset.hpp"
#include "gr1/model.hpp"

namespace gr1 {

using ModelF = Gr1Model<float>;

// Linear warmup to the peak, cosine decay to zero at total_steps.
double lr_schedule(int64_t step, double peak_lr, int64_t warmup_steps,
                   int64_t total_steps);

// Replicate-pad shift: output(y, x) = input(clip(y + dy), clip(x + dx)).
ImageFrame shift_image(const ImageFrame& img, int dx, int dy);
std::pair<int, int> sample_shift(int max_shift, Rng& rng);

struct StepMetrics {
  int64_t step = 0;
  std::string phase;
  LossBreakdown loss;
  double lr = 0;
  double wall_time = 0;
};

// Newline-delimited JSON appender; pass an empty path to keep logs in memory
// only.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void append(const StepMetrics& m);
  const std::vector<StepMetrics>& entries() const { return entries_; }

 private:
  std::string path_;
  std::vector<StepMetrics> entries_;
};

struct PretrainResult {
  double heldout_loss_step0 = 0;
  double heldout_loss_final = 0;
  int64_t steps = 0;
};

// Video-prediction pre-training on the clip corpus. The model's frozen
// encoders must already be in place; only trainable parameters move.
PretrainResult pretrain(ModelF& model, const VideoDataset& corpus,
                        const Config& cfg, uint64_t seed,
                        MetricsWriter& metrics);

struct FinetuneOptions {
  std::vector<int> episodes;  // training subset; empty = every episode
  int delta_t = -1;           // future-frame offset; -1 = cfg.delta_t_finetune
  int64_t max_steps = -1;     // -1 = epochs * steps_per_epoch
};

struct FinetuneResult {
  LossBreakdown last;
  int64_t steps = 0;
};

// Behavior cloning plus future-frame prediction on demo windows.
FinetuneResult finetune(ModelF& model, const DemoDataset& demos,
                        const Config& cfg, uint64_t seed,
                        const FinetuneOptions& opt, MetricsWriter& metrics);

struct EncoderPretrainResult {
  double heldout_loss_step0 = 0;
  double heldout_loss_final = 0;
};

// Masked patch reconstruction on corpus frames; the encoder is frozen on
// return. Raises if the loss goes non-finite.
EncoderPretrainResult pretrain_image_encoder(ParamStore<float>& store,
                                             VitEncoder<float>& vit,
                                             const VideoDataset& corpus,
                                             const Config& cfg, uint64_t seed);

}  // namespace gr1
