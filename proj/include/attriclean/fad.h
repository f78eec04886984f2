#ifndef ATTRICLEAN_FAD_H
#define ATTRICLEAN_FAD_H

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "attriclean/attribution.h"
#include "attriclean/dsp.h"
#include "attriclean/synth.h"

namespace attriclean {

struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // symmetrized, regularized with eps_cov * I
  std::size_t n_frames = 0;
  double eps_cov = 0.0;
};

// Sample mean and unbiased covariance of row vectors, symmetrized then
// regularized with eps_cov = 1e-6 * trace(Sigma) / D.
GaussianStats gaussian_stats(const Eigen::MatrixXd& frames);
GaussianStats gaussian_stats(const EmbeddingSequence& e);
GaussianStats gaussian_stats(const std::vector<EmbeddingSequence>& pooled);

// Frechet distance between Gaussians:
// ||mu_a - mu_b||^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)), with the matrix square
// root taken through the symmetric product Sa^(1/2) Sb Sa^(1/2) and negative
// eigenvalues clamped at zero.
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

struct FadScore {
  std::string id;
  double score = 0.0;
  std::string embedding = "logmel";
};

// Per-song embedding population: the log-mel frames of all four stems
// concatenated, so stem-level corruption shows up in the distribution.
EmbeddingSequence song_embedding(const StemSet& s, const EmbedConfig& cfg);

// Pooled statistics of every frame of every reference song.
GaussianStats reference_stats(const std::vector<StemSet>& refs,
                              const EmbedConfig& cfg);

FadScore per_song_fad(const StemSet& s, const GaussianStats& ref,
                      const EmbedConfig& cfg);

std::vector<FadScore> per_song_fad_scores(const std::vector<StemSet>& corpus,
                                          const GaussianStats& ref,
                                          const EmbedConfig& cfg);

struct FadFilterResult {
  std::vector<std::string> retained;
  std::vector<FadScore> scores;
};

// Ranks ascending by FAD (low distance = close to the clean reference set)
// and keeps the top ceil(r*N); same tie rule as filter_ranked.
FadFilterResult fad_filter(const std::vector<StemSet>& corpus,
                           const std::vector<StemSet>& refs, double ratio,
                           const EmbedConfig& cfg);

}  // namespace attriclean

#endif  // ATTRICLEAN_FAD_H
