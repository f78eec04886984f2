#ifndef ATTRICLEAN_SEPMODEL_H
#define ATTRICLEAN_SEPMODEL_H

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "attriclean/dsp.h"
#include "attriclean/synth.h"

namespace attriclean {

// Frame-wise mask estimator per target: magnitude frame (F bins) -> hidden
// ReLU layer (H units) -> sigmoid mask (F bins). Estimate = mask * mixture.
struct ModelDims {
  std::size_t bins = 129;
  std::size_t hidden = 32;

  std::size_t param_count() const {
    return hidden * bins + hidden + bins * hidden + bins;
  }
  // Flat layout: [W1 (H x F)][b1 (H)][W2 (F x H)][b2 (F)].
  std::size_t w1_off() const { return 0; }
  std::size_t b1_off() const { return hidden * bins; }
  std::size_t w2_off() const { return hidden * bins + hidden; }
  std::size_t b2_off() const { return hidden * bins + hidden + bins * hidden; }
};

struct ModelParams {
  Target target = Target::kVocals;
  ModelDims dims;
  std::vector<double> theta;

  double* w1() { return theta.data() + dims.w1_off(); }
  double* b1() { return theta.data() + dims.b1_off(); }
  double* w2() { return theta.data() + dims.w2_off(); }
  double* b2() { return theta.data() + dims.b2_off(); }
  const double* w1() const { return theta.data() + dims.w1_off(); }
  const double* b1() const { return theta.data() + dims.b1_off(); }
  const double* w2() const { return theta.data() + dims.w2_off(); }
  const double* b2() const { return theta.data() + dims.b2_off(); }
};

ModelParams init_params(Target t, ModelDims dims, std::uint64_t seed);

// mask = sigmoid(W2 relu(W1 frame + b1) + b2), entries strictly in (0,1).
std::vector<double> forward_mask(const ModelParams& p,
                                 std::span<const double> frame);

// Row-major frame matrix.
struct FrameMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

// Per-target training view of a corpus: pooled mixture magnitude frames and
// the matching target-stem magnitude frames, with per-song extents. The
// mixture matrix is shared between the four targets.
struct FramePool {
  std::shared_ptr<const FrameMatrix> mix;
  FrameMatrix stem;
  std::vector<std::size_t> offsets;  // n_songs + 1 frame offsets
  std::vector<std::string> ids;

  std::size_t num_songs() const { return ids.size(); }
  std::size_t total_frames() const { return offsets.empty() ? 0 : offsets.back(); }
  std::size_t song_begin(std::size_t i) const { return offsets[i]; }
  std::size_t song_end(std::size_t i) const { return offsets[i + 1]; }
};

std::shared_ptr<const FrameMatrix> build_mix_frames(
    const std::vector<StemSet>& corpus, const StftConfig& stft);

FramePool build_frame_pool(const std::vector<StemSet>& corpus, Target t,
                           const StftConfig& stft,
                           std::shared_ptr<const FrameMatrix> mix = nullptr);

// MSE between mask*|mixture| and |stem| over frames and bins.
double frame_loss(const ModelParams& p, const double* mix_frame,
                  const double* stem_frame);

// Adds scale * d(sum_k err_k^2)/dtheta of one frame into grad and returns the
// frame's raw squared error. Shared building block of the gradient kernels.
double accumulate_frame_gradient(const ModelParams& p, const double* mix_frame,
                                 const double* stem_frame, double scale,
                                 double* grad);
double pool_song_loss(const ModelParams& p, const FramePool& pool,
                      std::size_t song_index);

struct LossRecord {
  std::string song_id;
  Target target = Target::kVocals;
  double loss = 0.0;
};

LossRecord song_loss(const ModelParams& p, const StemSet& s, Target t,
                     const StftConfig& stft);

// Losses of every song in the pool under one model; parallel per song.
std::vector<double> corpus_losses(const ModelParams& p, const FramePool& pool);

// Mean loss and its exact gradient over the given pool rows. Deterministic
// at any thread count: frames are reduced over a fixed block partition.
double batch_gradient(const ModelParams& p, const FramePool& pool,
                      std::span<const std::size_t> rows,
                      std::vector<double>& grad);

// Gradient of pool_song_loss (mean over the song's frames).
double song_gradient(const ModelParams& p, const FramePool& pool,
                     std::size_t song_index, std::vector<double>& grad);

struct TrainConfig {
  int epochs = 30;
  int steps_per_epoch = 120;  // 0 = one full pass over the pool per epoch
  int batch = 64;
  double learning_rate = 0.01;  // cosine-decayed to 0 across epochs
  std::uint64_t seed = 1;
  ModelDims dims;
  StftConfig stft;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  ModelParams params;  // best-validation checkpoint
  std::vector<EpochRecord> log;
  int best_epoch = 0;
};

// Mini-batch gradient descent; returns the epoch checkpoint with the best
// validation loss (mean song loss over the clean reference pool).
TrainResult train_target(const FramePool& train_pool, const FramePool& val_pool,
                         Target t, const TrainConfig& cfg);

struct SeparationModel {
  std::array<ModelParams, kNumTargets> per_target;
  StftConfig stft;
};

SeparationModel train_all(const std::vector<StemSet>& corpus,
                          const std::vector<StemSet>& refs,
                          const TrainConfig& cfg,
                          std::array<std::vector<EpochRecord>, kNumTargets>*
                              logs = nullptr);

// Masked magnitude + mixture phase, weighted overlap-add resynthesis.
std::array<Waveform, kNumTargets> separate(const SeparationModel& model,
                                           const Waveform& mixture);

// Checkpoint io: one versioned binary blob per target plus the training log.
void save_checkpoint(const SeparationModel& model,
                     const std::filesystem::path& dir,
                     const std::array<std::vector<EpochRecord>, kNumTargets>*
                         logs = nullptr);
SeparationModel load_checkpoint(const std::filesystem::path& dir);

std::uint64_t params_checksum(const SeparationModel& model);

}  // namespace attriclean

#endif  // ATTRICLEAN_SEPMODEL_H
