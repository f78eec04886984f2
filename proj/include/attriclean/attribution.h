#ifndef ATTRICLEAN_ATTRIBUTION_H
#define ATTRICLEAN_ATTRIBUTION_H

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attriclean/sepmodel.h"

namespace attriclean {

// Diagonal Fisher information of the loss at theta over a training pool:
// F_ii = (1/N) sum_songs (dL_song/dtheta_i)^2, floored before inversion.
struct FisherDiagonal {
  Target target = Target::kVocals;
  std::vector<double> values;  // floored entries, >= floor_used
  std::size_t n_samples = 0;
  double floor_used = 0.0;
};

struct FisherOptions {
  double rel_floor = 1e-8;   // floor = max(rel_floor * max(F), abs_floor)
  double abs_floor = 1e-12;
};

FisherDiagonal fisher_diagonal(const ModelParams& p, const FramePool& pool,
                               const FisherOptions& opt = {});

struct UnlearnConfig {
  // Unset alpha selects the adaptive rule: the first update's parameter
  // change gets L2 norm target_rel_step * ||theta||. alpha == 0 is a no-op
  // update (theta' == theta, bit for bit).
  std::optional<double> alpha;
  double target_rel_step = 1e-3;
  int steps = 1;
  std::size_t n_train = 1;  // N in the update rule
  FisherOptions fisher;

  void validate() const;
};

// EWC-regularized gradient-ascent unlearning of one reference song:
// theta <- theta + (alpha/N) * F^-1 * grad L(ref, theta), repeated `steps`
// times. The input params are not mutated.
ModelParams unlearn(const ModelParams& p, const FisherDiagonal& fisher,
                    const FramePool& ref_pool, std::size_t ref_index,
                    const UnlearnConfig& cfg,
                    std::uint64_t* invocation_counter = nullptr);

// Naive ascent rule without EWC: theta <- theta + alpha * grad L.
ModelParams naive_unlearn(const ModelParams& p, const FramePool& ref_pool,
                          std::size_t ref_index, double alpha, int steps = 1);

// Loss-change tensor dL[i][j][t] = L'_{i,j} - L_i for training song i, clean
// reference j, target t.
struct AttributionMatrix {
  std::size_t n_train = 0;  // N
  std::size_t n_refs = 0;   // M
  std::vector<std::string> train_ids;
  std::vector<std::string> ref_ids;
  std::vector<double> delta;     // N x M x kNumTargets
  std::vector<double> baseline;  // N x kNumTargets
  std::uint64_t baseline_checksum = 0;
  std::uint64_t unlearn_runs = 0;  // exactly M per target

  double& at(std::size_t i, std::size_t j, std::size_t t) {
    return delta[(i * n_refs + j) * kNumTargets + t];
  }
  double at(std::size_t i, std::size_t j, std::size_t t) const {
    return delta[(i * n_refs + j) * kNumTargets + t];
  }
  double baseline_at(std::size_t i, std::size_t t) const {
    return baseline[i * kNumTargets + t];
  }
};

// Unlearns each of the M references once per target and evaluates every
// training song's loss under each unlearned model: M (not N) unlearning runs
// per target, N*M*4 loss evaluations total.
AttributionMatrix attribution_matrix(const SeparationModel& baseline,
                                     const std::vector<StemSet>& corpus,
                                     const std::vector<StemSet>& refs,
                                     const UnlearnConfig& cfg);

// Unified score: mean of dL over all (reference, target) cells.
std::vector<double> aggregate_unified(const AttributionMatrix& a);

// Per-target score: mean of dL over the target's reference column only.
std::vector<double> aggregate_per_target(const AttributionMatrix& a, Target t);

std::size_t retained_count(std::size_t n, double ratio);

enum class RankOrder { kHighIsGood, kLowIsGood };

// Keeps the ceil(r*N) best-scoring ids; ties broken by ascending id. The
// returned set is sorted by id.
std::vector<std::string> filter_ranked(const std::vector<std::string>& ids,
                                       const std::vector<double>& scores,
                                       double ratio,
                                       RankOrder order = RankOrder::kHighIsGood);

// Flat binary tensor with a small header; see docs/FORMATS.md.
void save_attribution(const AttributionMatrix& a,
                      const std::filesystem::path& path);
AttributionMatrix load_attribution(const std::filesystem::path& path);

}  // namespace attriclean

#endif  // ATTRICLEAN_ATTRIBUTION_H
