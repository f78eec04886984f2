#include "attriclean/serial_ref.h"

#include <algorithm>
#include <cmath>
#include <complex>

#include "attriclean/parallel.h"

namespace attriclean::serial {

namespace {

// Forces the OpenMP kernels off for functions that reuse library code with
// inner parallel loops.
struct ScopedSerial {
  bool was = par::enabled();
  ScopedSerial() { par::set_enabled(false); }
  ~ScopedSerial() { par::set_enabled(was); }
};

}  // namespace

Spectrogram stft_magnitude(const Waveform& w, int window, int hop) {
  if (w.samples.size() < static_cast<std::size_t>(window))
    throw ConfigError("signal too short");
  Spectrogram s;
  s.window = window;
  s.hop = hop;
  s.sample_rate = w.sample_rate;
  s.num_bins = static_cast<std::size_t>(window) / 2 + 1;
  s.num_frames = (w.samples.size() - static_cast<std::size_t>(window)) /
                     static_cast<std::size_t>(hop) +
                 1;
  s.mag.resize(s.num_frames * s.num_bins);

  const std::vector<double> win = hann_window(window);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(window));
  for (std::size_t t = 0; t < s.num_frames; ++t) {
    const double* x = w.samples.data() + t * static_cast<std::size_t>(hop);
    for (int n = 0; n < window; ++n)
      buf[static_cast<std::size_t>(n)] =
          std::complex<double>(x[n] * win[static_cast<std::size_t>(n)], 0.0);
    fft_inplace(buf, false);
    double* row = s.frame(t);
    for (std::size_t k = 0; k < s.num_bins; ++k) row[k] = std::abs(buf[k]);
  }
  return s;
}

EmbeddingSequence log_mel_embed(const Spectrogram& s, const MelFilterbank& fb) {
  EmbeddingSequence e;
  e.num_frames = s.num_frames;
  e.dim = fb.n_mels;
  e.data.resize(e.num_frames * e.dim);
  for (std::size_t t = 0; t < s.num_frames; ++t) {
    const double* mag = s.frame(t);
    double* out = e.frame(t);
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      const double* wrow = fb.row(m);
      double acc = 0.0;
      for (std::size_t b = 0; b < s.num_bins; ++b) acc += wrow[b] * mag[b];
      out[m] = std::log(acc + kMelLogEps);
    }
  }
  return e;
}

double batch_gradient(const ModelParams& p, const FramePool& pool,
                      std::span<const std::size_t> rows,
                      std::vector<double>& grad) {
  if (rows.empty()) throw ConfigError("batch_gradient: empty batch");
  grad.assign(p.dims.param_count(), 0.0);
  const double scale =
      1.0 / (static_cast<double>(rows.size()) * static_cast<double>(p.dims.bins));
  double err2 = 0.0;
  for (std::size_t r : rows) {
    err2 += accumulate_frame_gradient(p, pool.mix->row(r), pool.stem.row(r),
                                      scale, grad.data());
  }
  return err2 * scale;
}

std::vector<double> corpus_losses(const ModelParams& p, const FramePool& pool) {
  std::vector<double> losses(pool.num_songs());
  for (std::size_t i = 0; i < pool.num_songs(); ++i)
    losses[i] = pool_song_loss(p, pool, i);
  return losses;
}

FisherDiagonal fisher_diagonal(const ModelParams& p, const FramePool& pool,
                               const FisherOptions& opt) {
  const std::size_t P = p.dims.param_count();
  const std::size_t n = pool.num_songs();
  if (n == 0) throw ConfigError("fisher_diagonal: empty pool");

  FisherDiagonal f;
  f.target = p.target;
  f.n_samples = n;
  f.values.assign(P, 0.0);
  std::vector<double> grad(P);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    rows.resize(pool.song_end(i) - pool.song_begin(i));
    for (std::size_t r = 0; r < rows.size(); ++r)
      rows[r] = pool.song_begin(i) + r;
    serial::batch_gradient(p, pool, rows, grad);
    for (std::size_t k = 0; k < P; ++k) f.values[k] += grad[k] * grad[k];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double max_entry = 0.0;
  for (double& v : f.values) {
    v *= inv_n;
    max_entry = std::max(max_entry, v);
  }
  f.floor_used = std::max(opt.rel_floor * max_entry, opt.abs_floor);
  for (double& v : f.values) v = std::max(v, f.floor_used);
  return f;
}

std::vector<FadScore> per_song_fad_scores(const std::vector<StemSet>& corpus,
                                          const GaussianStats& ref,
                                          const EmbedConfig& cfg) {
  ScopedSerial guard;
  std::vector<FadScore> scores(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    scores[i] = per_song_fad(corpus[i], ref, cfg);
  return scores;
}

}  // namespace attriclean::serial
