#ifndef ATTRICLEAN_CLASSIFIER_H
#define ATTRICLEAN_CLASSIFIER_H

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attriclean/attribution.h"
#include "attriclean/dsp.h"
#include "attriclean/synth.h"

namespace attriclean {

// Frame-level instrument classifier: log-mel frame -> 256 ReLU units
// (dropout 0.5 while training) -> 4-way softmax over the stem classes.
struct ClassifierParams {
  std::size_t dim = 0;     // embedding dimension D
  std::size_t hidden = 256;
  std::vector<double> theta;  // [W1 (H x D)][b1 (H)][W2 (4 x H)][b2 (4)]
  std::vector<double> feat_mean;  // training-set standardization
  std::vector<double> feat_std;
  EmbedConfig embed;

  std::size_t w1_off() const { return 0; }
  std::size_t b1_off() const { return hidden * dim; }
  std::size_t w2_off() const { return hidden * dim + hidden; }
  std::size_t b2_off() const {
    return hidden * dim + hidden + kNumTargets * hidden;
  }
  std::size_t param_count() const {
    return hidden * dim + hidden + kNumTargets * hidden + kNumTargets;
  }
};

struct ClassifierConfig {
  std::size_t hidden = 256;
  double dropout = 0.5;
  int epochs = 25;
  int steps_per_epoch = 100;  // 0 = full pass
  int batch = 64;
  double learning_rate = 0.05;
  std::uint64_t seed = 1;
  EmbedConfig embed;
};

// Labeled frame dataset: per-stem log-mel frames tagged with their stem.
struct FrameDataset {
  std::size_t dim = 0;
  std::vector<double> frames;  // n x dim row-major
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  const double* frame(std::size_t i) const { return frames.data() + i * dim; }
};

FrameDataset build_frame_dataset(const std::vector<StemSet>& songs,
                                 const EmbedConfig& cfg);

// Cross-entropy training with seeded dropout; deterministic per seed.
ClassifierParams train_classifier(const std::vector<StemSet>& refs,
                                  const ClassifierConfig& cfg);

// Softmax class probabilities for one raw (unstandardized) embedding frame.
std::array<double, kNumTargets> predict_probs(const ClassifierParams& c,
                                              const double* frame);

// Mean cross-entropy and exact gradient, dropout disabled. Test surface for
// finite-difference checks.
double classifier_loss_gradient(const ClassifierParams& c,
                                const FrameDataset& data,
                                std::span<const std::size_t> rows,
                                std::vector<double>& grad);

struct ClassProbability {
  std::string song_id;
  Target target = Target::kVocals;
  double p_correct = 0.0;
};

// Mean probability assigned to class t over the frames of stem t.
ClassProbability song_class_score(const ClassifierParams& c, const StemSet& s,
                                  Target t);

struct ClsFilterResult {
  std::vector<std::string> retained;
  std::vector<std::string> ids;
  std::vector<double> song_scores;  // mean p_correct over the four stems
  std::vector<std::array<double, kNumTargets>> per_target;
};

ClsFilterResult cls_filter(const std::vector<StemSet>& corpus,
                           const ClassifierParams& c, double ratio);

}  // namespace attriclean

#endif  // ATTRICLEAN_CLASSIFIER_H
