#include "attriclean/fad.h"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "attriclean/parallel.h"

namespace attriclean {

GaussianStats gaussian_stats(const Eigen::MatrixXd& frames) {
  const auto n = frames.rows();
  const auto d = frames.cols();
  if (n < 2) throw ConfigError("gaussian_stats needs at least 2 frames");

  GaussianStats g;
  g.n_frames = static_cast<std::size_t>(n);
  g.mu = frames.colwise().mean();
  Eigen::MatrixXd centered = frames.rowwise() - g.mu.transpose();
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose().eval());
  g.eps_cov = 1e-6 * cov.trace() / static_cast<double>(d);
  g.sigma = cov + g.eps_cov * Eigen::MatrixXd::Identity(d, d);
  return g;
}

namespace {

Eigen::MatrixXd to_matrix(const EmbeddingSequence& e) {
  Eigen::MatrixXd m(static_cast<long>(e.num_frames), static_cast<long>(e.dim));
  for (std::size_t i = 0; i < e.num_frames; ++i)
    for (std::size_t j = 0; j < e.dim; ++j)
      m(static_cast<long>(i), static_cast<long>(j)) = e.frame(i)[j];
  return m;
}

}  // namespace

GaussianStats gaussian_stats(const EmbeddingSequence& e) {
  return gaussian_stats(to_matrix(e));
}

GaussianStats gaussian_stats(const std::vector<EmbeddingSequence>& pooled) {
  std::size_t total = 0, dim = 0;
  for (const EmbeddingSequence& e : pooled) {
    total += e.num_frames;
    dim = e.dim;
  }
  Eigen::MatrixXd m(static_cast<long>(total), static_cast<long>(dim));
  long row = 0;
  for (const EmbeddingSequence& e : pooled) {
    for (std::size_t i = 0; i < e.num_frames; ++i, ++row)
      for (std::size_t j = 0; j < dim; ++j)
        m(row, static_cast<long>(j)) = e.frame(i)[j];
  }
  return gaussian_stats(m);
}

namespace {

// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) {
    throw StageError(std::string("eigensolver failed on ") + what +
                     " (trace " + std::to_string(s.trace()) + ", norm " +
                     std::to_string(s.norm()) + ")");
  }
  Eigen::VectorXd lam = es.eigenvalues();
  for (long i = 0; i < lam.size(); ++i) lam[i] = lam[i] > 0.0 ? std::sqrt(lam[i]) : 0.0;
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mu.size() != b.mu.size())
    throw ConfigError("frechet_distance: dimension mismatch");

  const double mean_term = (a.mu - b.mu).squaredNorm();

  const Eigen::MatrixXd sqrt_a = psd_sqrt(a.sigma, "sigma_a");
  Eigen::MatrixXd inner = sqrt_a * b.sigma * sqrt_a;
  inner = 0.5 * (inner + inner.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  if (es.info() != Eigen::Success) {
    const double cond = a.sigma.norm() * b.sigma.norm();
    throw StageError("eigensolver failed on sqrt(Sa) Sb sqrt(Sa), product norm " +
                     std::to_string(cond));
  }
  double tr_sqrt = 0.0;
  for (long i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()[i];
    if (lam > 0.0) tr_sqrt += std::sqrt(lam);
  }
  const double d =
      mean_term + a.sigma.trace() + b.sigma.trace() - 2.0 * tr_sqrt;
  return d > 0.0 ? d : 0.0;
}

EmbeddingSequence song_embedding(const StemSet& s, const EmbedConfig& cfg) {
  const MelFilterbank fb =
      MelFilterbank::build(cfg.n_mels, cfg.f_min, cfg.f_max,
                           s.mixture.sample_rate, cfg.stft.window);
  EmbeddingSequence out;
  out.dim = fb.n_mels;
  for (const Waveform& stem : s.stems) {
    const Spectrogram spec =
        stft_magnitude(stem, cfg.stft.window, cfg.stft.hop);
    const EmbeddingSequence e = log_mel_embed(spec, fb);
    out.data.insert(out.data.end(), e.data.begin(), e.data.end());
    out.num_frames += e.num_frames;
  }
  return out;
}

GaussianStats reference_stats(const std::vector<StemSet>& refs,
                              const EmbedConfig& cfg) {
  if (refs.empty()) throw ConfigError("reference set is empty");
  std::vector<EmbeddingSequence> pooled(refs.size());
  par::parallel_for(refs.size(), [&](std::size_t i) {
    pooled[i] = song_embedding(refs[i], cfg);
  });
  return gaussian_stats(pooled);
}

FadScore per_song_fad(const StemSet& s, const GaussianStats& ref,
                      const EmbedConfig& cfg) {
  const EmbeddingSequence e = song_embedding(s, cfg);
  if (e.num_frames < 2)
    throw ConfigError("song too short for FAD: " + s.id);
  FadScore score;
  score.id = s.id;
  score.score = frechet_distance(gaussian_stats(e), ref);
  return score;
}

std::vector<FadScore> per_song_fad_scores(const std::vector<StemSet>& corpus,
                                          const GaussianStats& ref,
                                          const EmbedConfig& cfg) {
  std::vector<FadScore> scores(corpus.size());
  par::parallel_for(corpus.size(), [&](std::size_t i) {
    scores[i] = per_song_fad(corpus[i], ref, cfg);
  });
  return scores;
}

FadFilterResult fad_filter(const std::vector<StemSet>& corpus,
                           const std::vector<StemSet>& refs, double ratio,
                           const EmbedConfig& cfg) {
  const GaussianStats ref = reference_stats(refs, cfg);
  FadFilterResult result;
  result.scores = per_song_fad_scores(corpus, ref, cfg);
  std::vector<std::string> ids;
  std::vector<double> values;
  for (const FadScore& s : result.scores) {
    ids.push_back(s.id);
    values.push_back(s.score);
  }
  result.retained = filter_ranked(ids, values, ratio, RankOrder::kLowIsGood);
  return result;
}

}  // namespace attriclean
