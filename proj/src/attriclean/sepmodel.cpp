#include "attriclean/sepmodel.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "attriclean/parallel.h"
#include "attriclean/rng.h"

namespace attriclean {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct ForwardScratch {
  std::vector<double> z1, h, mask;
};

// z1/h sized H, mask sized F. Returns raw sum of squared errors over bins
// when stem_frame != nullptr.
double forward_frame(const ModelParams& p, const double* x,
                     const double* stem_frame, ForwardScratch& s) {
  const std::size_t F = p.dims.bins, H = p.dims.hidden;
  s.z1.resize(H);
  s.h.resize(H);
  s.mask.resize(F);
  const double* w1 = p.w1();
  const double* b1 = p.b1();
  const double* w2 = p.w2();
  const double* b2 = p.b2();
  for (std::size_t j = 0; j < H; ++j) {
    double acc = b1[j];
    const double* row = w1 + j * F;
    for (std::size_t k = 0; k < F; ++k) acc += row[k] * x[k];
    s.z1[j] = acc;
    s.h[j] = acc > 0.0 ? acc : 0.0;
  }
  double err2 = 0.0;
  for (std::size_t k = 0; k < F; ++k) {
    double acc = b2[k];
    const double* row = w2 + k * H;
    for (std::size_t j = 0; j < H; ++j) acc += row[j] * s.h[j];
    const double m = sigmoid(acc);
    s.mask[k] = m;
    if (stem_frame != nullptr) {
      const double e = m * x[k] - stem_frame[k];
      err2 += e * e;
    }
  }
  return err2;
}

// Accumulates scale * d(sum_k e_k^2)/dtheta into grad. Returns raw err2.
double backprop_frame(const ModelParams& p, const double* x, const double* y,
                      double scale, double* grad, ForwardScratch& s,
                      std::vector<double>& dz2, std::vector<double>& dz1) {
  const std::size_t F = p.dims.bins, H = p.dims.hidden;
  const double err2 = forward_frame(p, x, y, s);
  dz2.resize(F);
  dz1.resize(H);

  const double* w2 = p.w2();
  for (std::size_t k = 0; k < F; ++k) {
    const double m = s.mask[k];
    const double e = m * x[k] - y[k];
    dz2[k] = scale * 2.0 * e * x[k] * m * (1.0 - m);
  }
  double* gw2 = grad + p.dims.w2_off();
  double* gb2 = grad + p.dims.b2_off();
  for (std::size_t k = 0; k < F; ++k) {
    const double d = dz2[k];
    gb2[k] += d;
    double* row = gw2 + k * H;
    for (std::size_t j = 0; j < H; ++j) row[j] += d * s.h[j];
  }
  for (std::size_t j = 0; j < H; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < F; ++k) acc += w2[k * H + j] * dz2[k];
    dz1[j] = s.z1[j] > 0.0 ? acc : 0.0;
  }
  double* gw1 = grad + p.dims.w1_off();
  double* gb1 = grad + p.dims.b1_off();
  for (std::size_t j = 0; j < H; ++j) {
    const double d = dz1[j];
    if (d == 0.0) continue;
    gb1[j] += d;
    double* row = gw1 + j * F;
    for (std::size_t k = 0; k < F; ++k) row[k] += d * x[k];
  }
  return err2;
}

}  // namespace

ModelParams init_params(Target t, ModelDims dims, std::uint64_t seed) {
  ModelParams p;
  p.target = t;
  p.dims = dims;
  p.theta.assign(dims.param_count(), 0.0);
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(dims.bins + dims.hidden));
  double* w1 = p.w1();
  for (std::size_t i = 0; i < dims.hidden * dims.bins; ++i)
    w1[i] = rng.uniform(-a1, a1);
  double* w2 = p.w2();
  for (std::size_t i = 0; i < dims.bins * dims.hidden; ++i)
    w2[i] = rng.uniform(-a1, a1);
  return p;
}

std::vector<double> forward_mask(const ModelParams& p,
                                 std::span<const double> frame) {
  if (frame.size() != p.dims.bins)
    throw ConfigError("forward_mask: frame dimension mismatch");
  ForwardScratch s;
  forward_frame(p, frame.data(), nullptr, s);
  return s.mask;
}

std::shared_ptr<const FrameMatrix> build_mix_frames(
    const std::vector<StemSet>& corpus, const StftConfig& stft) {
  auto mat = std::make_shared<FrameMatrix>();
  const std::size_t bins = static_cast<std::size_t>(stft.window) / 2 + 1;
  std::vector<std::size_t> counts(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    counts[i] = (corpus[i].mixture.samples.size() -
                 static_cast<std::size_t>(stft.window)) /
                    static_cast<std::size_t>(stft.hop) +
                1;
  }
  std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  mat->rows = total;
  mat->cols = bins;
  mat->data.resize(total * bins);

  std::vector<std::size_t> offsets(corpus.size() + 1, 0);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    offsets[i + 1] = offsets[i] + counts[i];

  par::parallel_for(corpus.size(), [&](std::size_t i) {
    const Spectrogram s =
        stft_magnitude(corpus[i].mixture, stft.window, stft.hop);
    std::copy(s.mag.begin(), s.mag.end(), mat->data.begin() +
                                              static_cast<long>(offsets[i] * bins));
  });
  return mat;
}

FramePool build_frame_pool(const std::vector<StemSet>& corpus, Target t,
                           const StftConfig& stft,
                           std::shared_ptr<const FrameMatrix> mix) {
  if (corpus.empty()) throw ConfigError("empty corpus");
  FramePool pool;
  pool.mix = mix ? std::move(mix) : build_mix_frames(corpus, stft);

  const std::size_t bins = static_cast<std::size_t>(stft.window) / 2 + 1;
  pool.offsets.assign(corpus.size() + 1, 0);
  pool.ids.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const std::size_t frames = (corpus[i].mixture.samples.size() -
                                static_cast<std::size_t>(stft.window)) /
                                   static_cast<std::size_t>(stft.hop) +
                               1;
    pool.offsets[i + 1] = pool.offsets[i] + frames;
    pool.ids[i] = corpus[i].id;
  }
  if (pool.mix->rows != pool.offsets.back() || pool.mix->cols != bins)
    throw ConfigError("mix frame matrix does not match corpus framing");

  pool.stem.rows = pool.offsets.back();
  pool.stem.cols = bins;
  pool.stem.data.resize(pool.stem.rows * bins);
  par::parallel_for(corpus.size(), [&](std::size_t i) {
    const Spectrogram s =
        stft_magnitude(corpus[i].stem(t), stft.window, stft.hop);
    std::copy(s.mag.begin(), s.mag.end(),
              pool.stem.data.begin() +
                  static_cast<long>(pool.offsets[i] * bins));
  });
  return pool;
}

double frame_loss(const ModelParams& p, const double* mix_frame,
                  const double* stem_frame) {
  ForwardScratch s;
  const double err2 = forward_frame(p, mix_frame, stem_frame, s);
  return err2 / static_cast<double>(p.dims.bins);
}

double accumulate_frame_gradient(const ModelParams& p, const double* mix_frame,
                                 const double* stem_frame, double scale,
                                 double* grad) {
  thread_local ForwardScratch s;
  thread_local std::vector<double> dz2, dz1;
  return backprop_frame(p, mix_frame, stem_frame, scale, grad, s, dz2, dz1);
}

double pool_song_loss(const ModelParams& p, const FramePool& pool,
                      std::size_t song_index) {
  const std::size_t lo = pool.song_begin(song_index);
  const std::size_t hi = pool.song_end(song_index);
  ForwardScratch s;
  double acc = 0.0;
  for (std::size_t r = lo; r < hi; ++r) {
    acc += forward_frame(p, pool.mix->row(r), pool.stem.row(r), s);
  }
  const double frames = static_cast<double>(hi - lo);
  return acc / (frames * static_cast<double>(p.dims.bins));
}

LossRecord song_loss(const ModelParams& p, const StemSet& s, Target t,
                     const StftConfig& stft) {
  const std::vector<StemSet> one = {s};
  const FramePool pool = build_frame_pool(one, t, stft);
  LossRecord rec;
  rec.song_id = s.id;
  rec.target = t;
  rec.loss = pool_song_loss(p, pool, 0);
  return rec;
}

std::vector<double> corpus_losses(const ModelParams& p, const FramePool& pool) {
  std::vector<double> losses(pool.num_songs());
  par::parallel_for(pool.num_songs(),
                    [&](std::size_t i) { losses[i] = pool_song_loss(p, pool, i); });
  return losses;
}

double batch_gradient(const ModelParams& p, const FramePool& pool,
                      std::span<const std::size_t> rows,
                      std::vector<double>& grad) {
  if (rows.empty()) throw ConfigError("batch_gradient: empty batch");
  const std::size_t P = p.dims.param_count();
  grad.assign(P, 0.0);

  const double scale =
      1.0 / (static_cast<double>(rows.size()) * static_cast<double>(p.dims.bins));
  const std::size_t blocks = par::block_count(rows.size());
  std::vector<std::vector<double>> partial(blocks);
  std::vector<double> partial_err(blocks, 0.0);

  par::parallel_for(blocks, [&](std::size_t b) {
    auto [lo, hi] = par::block_range(rows.size(), blocks, b);
    partial[b].assign(P, 0.0);
    ForwardScratch s;
    std::vector<double> dz2, dz1;
    double err = 0.0;
    for (std::size_t r = lo; r < hi; ++r) {
      err += backprop_frame(p, pool.mix->row(rows[r]), pool.stem.row(rows[r]),
                            scale, partial[b].data(), s, dz2, dz1);
    }
    partial_err[b] = err;
  });

  double err2 = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    err2 += partial_err[b];
    const std::vector<double>& g = partial[b];
    for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
  }
  return err2 * scale;
}

double song_gradient(const ModelParams& p, const FramePool& pool,
                     std::size_t song_index, std::vector<double>& grad) {
  const std::size_t lo = pool.song_begin(song_index);
  const std::size_t hi = pool.song_end(song_index);
  std::vector<std::size_t> rows(hi - lo);
  std::iota(rows.begin(), rows.end(), lo);
  return batch_gradient(p, pool, rows, grad);
}

namespace {

double validation_loss(const ModelParams& p, const FramePool& val_pool) {
  const std::vector<double> losses = corpus_losses(p, val_pool);
  double acc = 0.0;
  for (double l : losses) acc += l;
  return acc / static_cast<double>(losses.size());
}

}  // namespace

TrainResult train_target(const FramePool& train_pool, const FramePool& val_pool,
                         Target t, const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (cfg.batch < 1) throw ConfigError("batch must be >= 1");
  const std::size_t bins = static_cast<std::size_t>(cfg.stft.window) / 2 + 1;
  if (bins != cfg.dims.bins)
    throw ConfigError("model bins must equal window/2+1");

  Rng rng(derive_seed(cfg.seed, std::string("train_") + target_name(t)));
  ModelParams theta = init_params(t, cfg.dims, rng.next_u64());

  const std::size_t total = train_pool.total_frames();
  const std::size_t batch = std::min<std::size_t>(cfg.batch, total);
  std::size_t steps = total / batch;
  if (cfg.steps_per_epoch > 0)
    steps = std::min<std::size_t>(steps, static_cast<std::size_t>(cfg.steps_per_epoch));
  steps = std::max<std::size_t>(steps, 1);

  TrainResult result;
  {
    const std::vector<double> losses = corpus_losses(theta, train_pool);
    double acc = 0.0, cnt = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const double frames =
          static_cast<double>(train_pool.song_end(i) - train_pool.song_begin(i));
      acc += losses[i] * frames;
      cnt += frames;
    }
    result.log.push_back({0, acc / cnt, validation_loss(theta, val_pool)});
  }
  double best_val = result.log[0].val_loss;
  ModelParams best = theta;
  int best_epoch = 0;

  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> grad;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate * 0.5 *
                      (1.0 + std::cos(3.141592653589793 *
                                      static_cast<double>(epoch - 1) /
                                      static_cast<double>(cfg.epochs)));
    rng.shuffle(perm);
    double loss_acc = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      std::span<const std::size_t> rows(perm.data() + s * batch, batch);
      loss_acc += batch_gradient(theta, train_pool, rows, grad);
      for (std::size_t i = 0; i < theta.theta.size(); ++i)
        theta.theta[i] -= lr * grad[i];
    }
    const double train_loss = loss_acc / static_cast<double>(steps);
    const double val = validation_loss(theta, val_pool);
    if (!std::isfinite(train_loss) || !std::isfinite(val))
      throw StageError("training diverged at epoch " + std::to_string(epoch) +
                       " for target " + target_name(t));
    result.log.push_back({epoch, train_loss, val});
    if (val < best_val) {
      best_val = val;
      best = theta;
      best_epoch = epoch;
    }
  }
  result.params = std::move(best);
  result.best_epoch = best_epoch;
  return result;
}

SeparationModel train_all(
    const std::vector<StemSet>& corpus, const std::vector<StemSet>& refs,
    const TrainConfig& cfg,
    std::array<std::vector<EpochRecord>, kNumTargets>* logs) {
  SeparationModel model;
  model.stft = cfg.stft;
  auto corpus_mix = build_mix_frames(corpus, cfg.stft);
  auto refs_mix = build_mix_frames(refs, cfg.stft);
  for (Target t : kAllTargets) {
    const FramePool train_pool = build_frame_pool(corpus, t, cfg.stft, corpus_mix);
    const FramePool val_pool = build_frame_pool(refs, t, cfg.stft, refs_mix);
    TrainResult r = train_target(train_pool, val_pool, t, cfg);
    model.per_target[static_cast<int>(t)] = std::move(r.params);
    if (logs != nullptr) (*logs)[static_cast<int>(t)] = std::move(r.log);
  }
  return model;
}

std::array<Waveform, kNumTargets> separate(const SeparationModel& model,
                                           const Waveform& mixture) {
  const ComplexSpectrogram cs =
      stft_complex_centered(mixture, model.stft.window, model.stft.hop);
  std::array<Waveform, kNumTargets> out;
  for (Target t : kAllTargets) {
    const ModelParams& p = model.per_target[static_cast<int>(t)];
    ComplexSpectrogram masked = cs;
    par::parallel_for(cs.num_frames, [&](std::size_t fr) {
      const std::complex<double>* src = cs.frame(fr);
      std::complex<double>* dst = masked.frame(fr);
      ForwardScratch s;
      std::vector<double> mag(cs.num_bins);
      for (std::size_t k = 0; k < cs.num_bins; ++k) mag[k] = std::abs(src[k]);
      forward_frame(p, mag.data(), nullptr, s);
      for (std::size_t k = 0; k < cs.num_bins; ++k) dst[k] = src[k] * s.mask[k];
    });
    out[static_cast<int>(t)] = istft_overlap_add(masked);
  }
  return out;
}

namespace {
constexpr char kCkptMagic[8] = {'A', 'T', 'C', 'L', 'C', 'K', 'P', '1'};
}

void save_checkpoint(
    const SeparationModel& model, const std::filesystem::path& dir,
    const std::array<std::vector<EpochRecord>, kNumTargets>* logs) {
  std::filesystem::create_directories(dir);
  {
    nlohmann::json j;
    j["window"] = model.stft.window;
    j["hop"] = model.stft.hop;
    std::ofstream out(dir / "stft.json");
    out << j.dump(2) << "\n";
  }
  for (Target t : kAllTargets) {
    const ModelParams& p = model.per_target[static_cast<int>(t)];
    std::ofstream out(dir / (std::string(target_name(t)) + ".mask.bin"),
                      std::ios::binary);
    if (!out) throw StageError("cannot write checkpoint in " + dir.string());
    out.write(kCkptMagic, 8);
    const std::uint32_t idx = static_cast<std::uint32_t>(t);
    const std::uint64_t bins = p.dims.bins, hidden = p.dims.hidden;
    out.write(reinterpret_cast<const char*>(&idx), sizeof(idx));
    out.write(reinterpret_cast<const char*>(&bins), sizeof(bins));
    out.write(reinterpret_cast<const char*>(&hidden), sizeof(hidden));
    out.write(reinterpret_cast<const char*>(p.theta.data()),
              static_cast<std::streamsize>(p.theta.size() * sizeof(double)));
    if (logs != nullptr) {
      std::ofstream log(dir / (std::string(target_name(t)) + ".train_log.tsv"));
      log << "epoch\ttrain_loss\tval_loss\n";
      char buf[96];
      for (const EpochRecord& r : (*logs)[static_cast<int>(t)]) {
        std::snprintf(buf, sizeof(buf), "%d\t%.17g\t%.17g\n", r.epoch,
                      r.train_loss, r.val_loss);
        log << buf;
      }
    }
  }
}

SeparationModel load_checkpoint(const std::filesystem::path& dir) {
  SeparationModel model;
  {
    std::ifstream in(dir / "stft.json");
    if (!in) throw StageError("checkpoint stft.json missing in " + dir.string());
    nlohmann::json j;
    in >> j;
    model.stft.window = j.at("window").get<int>();
    model.stft.hop = j.at("hop").get<int>();
  }
  for (Target t : kAllTargets) {
    const auto path = dir / (std::string(target_name(t)) + ".mask.bin");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StageError("checkpoint missing: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, kCkptMagic, 8) != 0)
      throw StageError("bad checkpoint magic: " + path.string());
    std::uint32_t idx = 0;
    std::uint64_t bins = 0, hidden = 0;
    in.read(reinterpret_cast<char*>(&idx), sizeof(idx));
    in.read(reinterpret_cast<char*>(&bins), sizeof(bins));
    in.read(reinterpret_cast<char*>(&hidden), sizeof(hidden));
    ModelParams p;
    p.target = static_cast<Target>(idx);
    p.dims.bins = bins;
    p.dims.hidden = hidden;
    p.theta.resize(p.dims.param_count());
    in.read(reinterpret_cast<char*>(p.theta.data()),
            static_cast<std::streamsize>(p.theta.size() * sizeof(double)));
    if (!in) throw StageError("truncated checkpoint: " + path.string());
    model.per_target[static_cast<int>(t)] = std::move(p);
  }
  return model;
}

std::uint64_t params_checksum(const SeparationModel& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const ModelParams& p : model.per_target) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.theta.data());
    for (std::size_t i = 0; i < p.theta.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace attriclean
