#include "attriclean/dsp.h"

#include <algorithm>
#include <cmath>

#include "attriclean/parallel.h"

namespace attriclean {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::size_t frame_count(std::size_t len, int window, int hop) {
  return (len - static_cast<std::size_t>(window)) / static_cast<std::size_t>(hop) + 1;
}

}  // namespace

std::vector<double> hann_window(int window) {
  std::vector<double> w(static_cast<std::size_t>(window));
  for (int n = 0; n < window; ++n) {
    w[static_cast<std::size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / window);
  }
  return w;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n < 2) return;
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= scale;
  }
}

namespace {

// One windowed frame -> one-sided complex spectrum.
void frame_dft(const double* signal, const std::vector<double>& win,
               std::vector<std::complex<double>>& scratch,
               std::complex<double>* out_bins) {
  const std::size_t w = win.size();
  scratch.resize(w);
  for (std::size_t n = 0; n < w; ++n) {
    scratch[n] = std::complex<double>(signal[n] * win[n], 0.0);
  }
  fft_inplace(scratch, false);
  const std::size_t bins = w / 2 + 1;
  for (std::size_t k = 0; k < bins; ++k) out_bins[k] = scratch[k];
}

void check_stft_args(const Waveform& w, int window, int hop) {
  if (!is_power_of_two(window))
    throw ConfigError("stft window must be a power of two");
  if (hop < 1) throw ConfigError("stft hop must be >= 1");
  if (w.samples.size() < static_cast<std::size_t>(window))
    throw ConfigError("signal too short");
}

}  // namespace

Spectrogram stft_magnitude(const Waveform& w, int window, int hop) {
  check_stft_args(w, window, hop);
  Spectrogram s;
  s.window = window;
  s.hop = hop;
  s.sample_rate = w.sample_rate;
  s.num_bins = static_cast<std::size_t>(window) / 2 + 1;
  s.num_frames = frame_count(w.samples.size(), window, hop);
  s.mag.resize(s.num_frames * s.num_bins);

  const std::vector<double> win = hann_window(window);
  par::parallel_for(s.num_frames, [&](std::size_t t) {
    thread_local std::vector<std::complex<double>> scratch;
    thread_local std::vector<std::complex<double>> bins;
    bins.resize(s.num_bins);
    frame_dft(w.samples.data() + t * static_cast<std::size_t>(hop), win, scratch,
              bins.data());
    double* row = s.frame(t);
    for (std::size_t k = 0; k < s.num_bins; ++k) row[k] = std::abs(bins[k]);
  });
  return s;
}

ComplexSpectrogram stft_complex_centered(const Waveform& w, int window, int hop) {
  check_stft_args(w, window, hop);
  ComplexSpectrogram s;
  s.window = window;
  s.hop = hop;
  s.sample_rate = w.sample_rate;
  s.pad = static_cast<std::size_t>(window) / 2;
  s.signal_len = w.samples.size();
  s.num_bins = static_cast<std::size_t>(window) / 2 + 1;

  std::vector<double> padded(s.signal_len + 2 * s.pad, 0.0);
  std::copy(w.samples.begin(), w.samples.end(), padded.begin() + static_cast<long>(s.pad));
  s.num_frames = frame_count(padded.size(), window, hop);
  s.coef.resize(s.num_frames * s.num_bins);

  const std::vector<double> win = hann_window(window);
  par::parallel_for(s.num_frames, [&](std::size_t t) {
    thread_local std::vector<std::complex<double>> scratch;
    frame_dft(padded.data() + t * static_cast<std::size_t>(hop), win, scratch,
              s.frame(t));
  });
  return s;
}

Waveform istft_overlap_add(const ComplexSpectrogram& s) {
  const std::size_t window = static_cast<std::size_t>(s.window);
  const std::size_t total = s.signal_len + 2 * s.pad;
  std::vector<double> acc(total, 0.0);
  std::vector<double> den(total, 0.0);
  const std::vector<double> win = hann_window(s.window);

  std::vector<std::complex<double>> full(window);
  for (std::size_t t = 0; t < s.num_frames; ++t) {
    const std::complex<double>* bins = s.frame(t);
    for (std::size_t k = 0; k < s.num_bins; ++k) full[k] = bins[k];
    for (std::size_t k = s.num_bins; k < window; ++k) {
      full[k] = std::conj(bins[window - k]);
    }
    fft_inplace(full, true);
    const std::size_t base = t * static_cast<std::size_t>(s.hop);
    for (std::size_t n = 0; n < window; ++n) {
      acc[base + n] += win[n] * full[n].real();
      den[base + n] += win[n] * win[n];
    }
  }

  Waveform out;
  out.sample_rate = s.sample_rate;
  out.samples.resize(s.signal_len);
  for (std::size_t i = 0; i < s.signal_len; ++i) {
    const double d = den[s.pad + i];
    out.samples[i] = d > 1e-12 ? acc[s.pad + i] / d : 0.0;
  }
  return out;
}

namespace {

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

MelFilterbank MelFilterbank::build(int n_mels, double f_min, double f_max,
                                   int sample_rate, int window) {
  if (n_mels < 2) throw ConfigError("n_mels must be >= 2");
  const double nyquist = sample_rate / 2.0;
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= nyquist))
    throw ConfigError("mel band edges must satisfy 0 <= f_min < f_max <= nyquist");

  MelFilterbank fb;
  fb.n_mels = static_cast<std::size_t>(n_mels);
  fb.n_bins = static_cast<std::size_t>(window) / 2 + 1;
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0);

  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }

  const double bin_hz = static_cast<double>(sample_rate) / window;
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    double row_sum = 0.0;
    for (std::size_t b = 0; b < fb.n_bins; ++b) {
      const double f = static_cast<double>(b) * bin_hz;
      double v = 0.0;
      if (f > lo && f < mid) {
        v = (f - lo) / (mid - lo);
      } else if (f >= mid && f < hi) {
        v = (hi - f) / (hi - mid);
      }
      fb.weights[m * fb.n_bins + b] = v;
      row_sum += v;
    }
    if (row_sum <= 0.0)
      throw ConfigError("mel band " + std::to_string(m) +
                        " contains no FFT bin; lower n_mels or widen the band");
  }
  return fb;
}

EmbeddingSequence log_mel_embed(const Spectrogram& s, const MelFilterbank& fb) {
  if (fb.n_bins != s.num_bins)
    throw ConfigError("mel filterbank bin count does not match spectrogram");
  EmbeddingSequence e;
  e.num_frames = s.num_frames;
  e.dim = fb.n_mels;
  e.data.resize(e.num_frames * e.dim);
  par::parallel_for(s.num_frames, [&](std::size_t t) {
    const double* mag = s.frame(t);
    double* out = e.frame(t);
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      const double* wrow = fb.row(m);
      double acc = 0.0;
      for (std::size_t b = 0; b < s.num_bins; ++b) acc += wrow[b] * mag[b];
      out[m] = std::log(acc + kMelLogEps);
    }
  });
  return e;
}

EmbeddingSequence log_mel_embed(const Spectrogram& s, int n_mels, double f_min,
                                double f_max) {
  const MelFilterbank fb =
      MelFilterbank::build(n_mels, f_min, f_max, s.sample_rate, s.window);
  return log_mel_embed(s, fb);
}

double sdr(const Waveform& target, const Waveform& estimate) {
  if (target.samples.size() != estimate.samples.size())
    throw ConfigError("sdr: length mismatch");
  double sig = 0.0, dist = 0.0;
  for (std::size_t i = 0; i < target.samples.size(); ++i) {
    const double t = target.samples[i];
    const double d = t - estimate.samples[i];
    sig += t * t;
    dist += d * d;
  }
  if (sig <= 0.0) throw ConfigError("undefined SDR");
  return 10.0 * std::log10(sig / (dist + kSdrEps));
}

}  // namespace attriclean
