#include "attriclean/classifier.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attriclean/parallel.h"
#include "attriclean/rng.h"

namespace attriclean {

FrameDataset build_frame_dataset(const std::vector<StemSet>& songs,
                                 const EmbedConfig& cfg) {
  if (songs.empty()) throw ConfigError("no songs for frame dataset");
  const MelFilterbank fb = MelFilterbank::build(
      cfg.n_mels, cfg.f_min, cfg.f_max, songs[0].mixture.sample_rate,
      cfg.stft.window);
  FrameDataset data;
  data.dim = fb.n_mels;
  for (const StemSet& song : songs) {
    for (int t = 0; t < kNumTargets; ++t) {
      const Spectrogram spec =
          stft_magnitude(song.stems[t], cfg.stft.window, cfg.stft.hop);
      const EmbeddingSequence e = log_mel_embed(spec, fb);
      data.frames.insert(data.frames.end(), e.data.begin(), e.data.end());
      data.labels.insert(data.labels.end(), e.num_frames, t);
    }
  }
  return data;
}

namespace {

struct ClsScratch {
  std::vector<double> x;  // standardized frame
  std::vector<double> z1, h;
  std::array<double, kNumTargets> z2, p;
};

void standardize(const ClassifierParams& c, const double* raw, double* out) {
  for (std::size_t i = 0; i < c.dim; ++i)
    out[i] = (raw[i] - c.feat_mean[i]) / c.feat_std[i];
}

// Forward on a standardized frame; drop_mask (0/1 per hidden unit, scaled
// outside) may be null for inference.
void cls_forward(const ClassifierParams& c, const double* x,
                 const double* drop_mask, ClsScratch& s) {
  const std::size_t D = c.dim, H = c.hidden;
  s.z1.resize(H);
  s.h.resize(H);
  const double* w1 = c.theta.data() + c.w1_off();
  const double* b1 = c.theta.data() + c.b1_off();
  const double* w2 = c.theta.data() + c.w2_off();
  const double* b2 = c.theta.data() + c.b2_off();
  for (std::size_t j = 0; j < H; ++j) {
    double acc = b1[j];
    const double* row = w1 + j * D;
    for (std::size_t k = 0; k < D; ++k) acc += row[k] * x[k];
    s.z1[j] = acc;
    double h = acc > 0.0 ? acc : 0.0;
    if (drop_mask != nullptr) h *= drop_mask[j];
    s.h[j] = h;
  }
  double zmax = -1e300;
  for (int cidx = 0; cidx < kNumTargets; ++cidx) {
    double acc = b2[cidx];
    const double* row = w2 + static_cast<std::size_t>(cidx) * H;
    for (std::size_t j = 0; j < H; ++j) acc += row[j] * s.h[j];
    s.z2[cidx] = acc;
    zmax = std::max(zmax, acc);
  }
  double norm = 0.0;
  for (int cidx = 0; cidx < kNumTargets; ++cidx) {
    s.p[cidx] = std::exp(s.z2[cidx] - zmax);
    norm += s.p[cidx];
  }
  for (int cidx = 0; cidx < kNumTargets; ++cidx) s.p[cidx] /= norm;
}

// Adds scale * dCE/dtheta for one frame; returns the frame's CE loss.
double cls_backprop(const ClassifierParams& c, const double* x, int label,
                    const double* drop_mask, double scale, double* grad,
                    ClsScratch& s) {
  const std::size_t D = c.dim, H = c.hidden;
  cls_forward(c, x, drop_mask, s);
  const double loss = -std::log(std::max(s.p[label], 1e-300));

  std::array<double, kNumTargets> dz2;
  for (int cidx = 0; cidx < kNumTargets; ++cidx)
    dz2[cidx] = scale * (s.p[cidx] - (cidx == label ? 1.0 : 0.0));

  const double* w2 = c.theta.data() + c.w2_off();
  double* gw2 = grad + c.w2_off();
  double* gb2 = grad + c.b2_off();
  for (int cidx = 0; cidx < kNumTargets; ++cidx) {
    gb2[cidx] += dz2[cidx];
    double* row = gw2 + static_cast<std::size_t>(cidx) * H;
    for (std::size_t j = 0; j < H; ++j) row[j] += dz2[cidx] * s.h[j];
  }
  double* gw1 = grad + c.w1_off();
  double* gb1 = grad + c.b1_off();
  for (std::size_t j = 0; j < H; ++j) {
    double dh = 0.0;
    for (int cidx = 0; cidx < kNumTargets; ++cidx)
      dh += w2[static_cast<std::size_t>(cidx) * H + j] * dz2[cidx];
    if (drop_mask != nullptr) dh *= drop_mask[j];
    const double dz1 = s.z1[j] > 0.0 ? dh : 0.0;
    if (dz1 == 0.0) continue;
    gb1[j] += dz1;
    double* row = gw1 + j * D;
    for (std::size_t k = 0; k < D; ++k) row[k] += dz1 * x[k];
  }
  return loss;
}

}  // namespace

ClassifierParams train_classifier(const std::vector<StemSet>& refs,
                                  const ClassifierConfig& cfg) {
  const FrameDataset data = build_frame_dataset(refs, cfg.embed);
  const std::size_t n = data.size();
  if (n < 2) throw ConfigError("classifier needs at least 2 frames");

  ClassifierParams c;
  c.dim = data.dim;
  c.hidden = cfg.hidden;
  c.embed = cfg.embed;
  c.feat_mean.assign(c.dim, 0.0);
  c.feat_std.assign(c.dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* f = data.frame(i);
    for (std::size_t k = 0; k < c.dim; ++k) c.feat_mean[k] += f[k];
  }
  for (double& m : c.feat_mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* f = data.frame(i);
    for (std::size_t k = 0; k < c.dim; ++k) {
      const double d = f[k] - c.feat_mean[k];
      c.feat_std[k] += d * d;
    }
  }
  for (double& s : c.feat_std)
    s = std::max(std::sqrt(s / static_cast<double>(n - 1)), 1e-8);

  Rng rng(derive_seed(cfg.seed, "classifier"));
  c.theta.assign(c.param_count(), 0.0);
  const double a1 = std::sqrt(6.0 / static_cast<double>(c.dim + c.hidden));
  const double a2 =
      std::sqrt(6.0 / static_cast<double>(c.hidden + kNumTargets));
  for (std::size_t i = 0; i < c.hidden * c.dim; ++i)
    c.theta[c.w1_off() + i] = rng.uniform(-a1, a1);
  for (std::size_t i = 0; i < kNumTargets * c.hidden; ++i)
    c.theta[c.w2_off() + i] = rng.uniform(-a2, a2);

  const std::size_t batch = std::min<std::size_t>(cfg.batch, n);
  std::size_t steps = n / batch;
  if (cfg.steps_per_epoch > 0)
    steps = std::min<std::size_t>(steps, static_cast<std::size_t>(cfg.steps_per_epoch));
  steps = std::max<std::size_t>(steps, 1);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> grad(c.param_count());
  std::vector<double> x(c.dim);
  std::vector<double> drop(c.hidden);
  ClsScratch scratch;
  const double keep = 1.0 - cfg.dropout;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate * 0.5 *
                      (1.0 + std::cos(3.141592653589793 *
                                      static_cast<double>(epoch - 1) /
                                      static_cast<double>(cfg.epochs)));
    rng.shuffle(perm);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const double scale = 1.0 / static_cast<double>(batch);
      double step_loss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t row = perm[s * batch + b];
        standardize(c, data.frame(row), x.data());
        for (std::size_t j = 0; j < c.hidden; ++j)
          drop[j] = rng.uniform() < keep ? 1.0 / keep : 0.0;
        step_loss += cls_backprop(c, x.data(), data.labels[row], drop.data(),
                                  scale, grad.data(), scratch);
      }
      epoch_loss += step_loss * scale;
      for (std::size_t i = 0; i < c.theta.size(); ++i)
        c.theta[i] -= lr * grad[i];
    }
    if (!std::isfinite(epoch_loss / static_cast<double>(steps)))
      throw StageError("classifier training diverged at epoch " +
                       std::to_string(epoch));
  }
  return c;
}

std::array<double, kNumTargets> predict_probs(const ClassifierParams& c,
                                              const double* frame) {
  ClsScratch s;
  std::vector<double> x(c.dim);
  standardize(c, frame, x.data());
  cls_forward(c, x.data(), nullptr, s);
  return s.p;
}

double classifier_loss_gradient(const ClassifierParams& c,
                                const FrameDataset& data,
                                std::span<const std::size_t> rows,
                                std::vector<double>& grad) {
  if (rows.empty()) throw ConfigError("empty batch");
  grad.assign(c.param_count(), 0.0);
  ClsScratch s;
  std::vector<double> x(c.dim);
  const double scale = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t r : rows) {
    standardize(c, data.frame(r), x.data());
    loss += cls_backprop(c, x.data(), data.labels[r], nullptr, scale,
                         grad.data(), s);
  }
  return loss * scale;
}

ClassProbability song_class_score(const ClassifierParams& c, const StemSet& s,
                                  Target t) {
  const MelFilterbank fb = MelFilterbank::build(
      c.embed.n_mels, c.embed.f_min, c.embed.f_max, s.mixture.sample_rate,
      c.embed.stft.window);
  const Spectrogram spec =
      stft_magnitude(s.stem(t), c.embed.stft.window, c.embed.stft.hop);
  const EmbeddingSequence e = log_mel_embed(spec, fb);

  double acc = 0.0;
  for (std::size_t i = 0; i < e.num_frames; ++i) {
    acc += predict_probs(c, e.frame(i))[static_cast<int>(t)];
  }
  ClassProbability out;
  out.song_id = s.id;
  out.target = t;
  out.p_correct = acc / static_cast<double>(e.num_frames);
  return out;
}

ClsFilterResult cls_filter(const std::vector<StemSet>& corpus,
                           const ClassifierParams& c, double ratio) {
  ClsFilterResult result;
  result.ids.resize(corpus.size());
  result.song_scores.resize(corpus.size());
  result.per_target.resize(corpus.size());
  par::parallel_for(corpus.size(), [&](std::size_t i) {
    result.ids[i] = corpus[i].id;
    double acc = 0.0;
    for (Target t : kAllTargets) {
      const double p = song_class_score(c, corpus[i], t).p_correct;
      result.per_target[i][static_cast<int>(t)] = p;
      acc += p;
    }
    result.song_scores[i] = acc / kNumTargets;
  });
  result.retained = filter_ranked(result.ids, result.song_scores, ratio,
                                  RankOrder::kHighIsGood);
  return result;
}

}  // namespace attriclean
