#include "attriclean/filters.h"

#include <cmath>
#include <complex>

namespace attriclean {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

std::vector<double> biquad_cascade(const std::vector<Biquad>& sections,
                                   const std::vector<double>& x) {
  std::vector<double> y = x;
  for (const Biquad& s : sections) {
    // Direct form II transposed.
    double z1 = 0.0, z2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

Biquad rbj_lowpass(double fc, double q, double fs) {
  const double w0 = 2.0 * kPi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  Biquad b;
  b.b0 = (1.0 - cw) / 2.0 / a0;
  b.b1 = (1.0 - cw) / a0;
  b.b2 = (1.0 - cw) / 2.0 / a0;
  b.a1 = -2.0 * cw / a0;
  b.a2 = (1.0 - alpha) / a0;
  return b;
}

Biquad rbj_bandpass(double fc, double q, double fs) {
  const double w0 = 2.0 * kPi * fc / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double cw = std::cos(w0);
  const double a0 = 1.0 + alpha;
  Biquad b;
  b.b0 = alpha / a0;
  b.b1 = 0.0;
  b.b2 = -alpha / a0;
  b.a1 = -2.0 * cw / a0;
  b.a2 = (1.0 - alpha) / a0;
  return b;
}

std::array<Biquad, 2> design_cheby2_lowpass4(double fc, double stopband_db,
                                             double fs) {
  using cd = std::complex<double>;
  constexpr int n = 4;
  if (!(fc > 0.0 && fc < fs / 2.0))
    throw ConfigError("cheby2 cutoff must lie inside (0, nyquist)");

  // Analog type-II prototype, stopband edge at 1 rad/s.
  const double de = 1.0 / std::sqrt(std::pow(10.0, stopband_db / 10.0) - 1.0);
  const double mu = std::asinh(1.0 / de) / n;

  std::array<cd, n> zeros, poles;
  for (int k = 0; k < n; ++k) {
    const double theta = kPi * (2.0 * k + 1.0) / (2.0 * n);
    zeros[k] = cd(0.0, 1.0 / std::cos(theta));
    const cd p1(-std::sinh(mu) * std::sin(theta), std::cosh(mu) * std::cos(theta));
    poles[k] = 1.0 / p1;
  }
  cd gain_c(1.0, 0.0);
  for (int k = 0; k < n; ++k) gain_c *= (-poles[k]) / (-zeros[k]);
  double gain = gain_c.real();

  // Lowpass-to-lowpass scale to the prewarped edge, then bilinear.
  const double warped = 2.0 * fs * std::tan(kPi * fc / fs);
  const double fs2 = 2.0 * fs;
  for (int k = 0; k < n; ++k) {
    zeros[k] *= warped;
    poles[k] *= warped;
  }
  std::array<cd, n> zd, pd;
  cd num(1.0, 0.0), den(1.0, 0.0);
  for (int k = 0; k < n; ++k) {
    zd[k] = (fs2 + zeros[k]) / (fs2 - zeros[k]);
    pd[k] = (fs2 + poles[k]) / (fs2 - poles[k]);
    num *= (fs2 - zeros[k]);
    den *= (fs2 - poles[k]);
  }
  gain *= (num / den).real();

  // Sections pair conjugate roots: prototype roots come in conjugate pairs
  // (k, n-1-k). Gain goes on the first section.
  std::array<Biquad, 2> out;
  for (int s = 0; s < 2; ++s) {
    const cd z = zd[s], p = pd[s];
    Biquad q;
    q.b0 = 1.0;
    q.b1 = -2.0 * z.real();
    q.b2 = std::norm(z);
    q.a1 = -2.0 * p.real();
    q.a2 = std::norm(p);
    if (s == 0) {
      q.b0 *= gain;
      q.b1 *= gain;
      q.b2 *= gain;
    }
    out[static_cast<std::size_t>(s)] = q;
  }
  return out;
}

Waveform reverb(const Waveform& x, const ReverbParams& p) {
  const int fs = x.sample_rate;
  const std::size_t tail = static_cast<std::size_t>(p.tail_s * fs);
  const std::size_t out_len = x.samples.size() + tail;

  // Comb delays chosen mutually prime-ish, in seconds so the tuning is
  // rate-independent.
  const std::array<double, 4> comb_s = {0.0253, 0.0269, 0.0293, 0.0311};
  std::vector<double> wet_sum(out_len, 0.0);

  for (double ds : comb_s) {
    const std::size_t d = static_cast<std::size_t>(ds * fs) | 1;
    std::vector<double> buf(d, 0.0);
    double lp_state = 0.0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < out_len; ++i) {
      const double in = i < x.samples.size() ? x.samples[i] : 0.0;
      const double delayed = buf[idx];
      lp_state = (1.0 - p.damping) * delayed + p.damping * lp_state;
      const double out = in + p.room * lp_state;
      buf[idx] = out;
      idx = (idx + 1) % d;
      wet_sum[i] += delayed * 0.25;
    }
  }

  // Series allpass to diffuse the comb output.
  {
    const std::size_t d = static_cast<std::size_t>(0.0051 * fs) | 1;
    const double g = 0.5;
    std::vector<double> buf(d, 0.0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < out_len; ++i) {
      const double in = wet_sum[i];
      const double delayed = buf[idx];
      const double out = -g * in + delayed;
      buf[idx] = in + g * out;
      idx = (idx + 1) % d;
      wet_sum[i] = out;
    }
  }

  Waveform y;
  y.sample_rate = fs;
  y.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double dry_in = i < x.samples.size() ? x.samples[i] : 0.0;
    y.samples[i] = p.dry * dry_in + p.wet * wet_sum[i];
  }
  return y;
}

}  // namespace attriclean
