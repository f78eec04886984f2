#include "attriclean/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "attriclean/filters.h"
#include "attriclean/parallel.h"
#include "attriclean/rng.h"

namespace attriclean {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;
}  // namespace

EffectKind effect_from_name(const std::string& name) {
  if (name == "distortion") return EffectKind::kDistortion;
  if (name == "reverb") return EffectKind::kReverb;
  if (name == "lowpass") return EffectKind::kLowpass;
  throw ConfigError("unknown effect kind: " + name);
}

const char* effect_name(EffectKind k) {
  switch (k) {
    case EffectKind::kDistortion: return "distortion";
    case EffectKind::kReverb: return "reverb";
    case EffectKind::kLowpass: return "lowpass";
  }
  return "?";
}

std::string CorruptionInfo::tag() const {
  switch (kind) {
    case CorruptionKind::kUnknown: return "unknown";
    case CorruptionKind::kClean: return "clean";
    case CorruptionKind::kLabelNoise: return "label_noise";
    case CorruptionKind::kBleeding: return "bleeding";
    case CorruptionKind::kEffect: return std::string("effect:") + effect_name(effect);
  }
  return "?";
}

CorruptionInfo CorruptionInfo::from_tag(const std::string& tag) {
  CorruptionInfo info;
  if (tag == "clean") {
    info.kind = CorruptionKind::kClean;
  } else if (tag == "label_noise") {
    info.kind = CorruptionKind::kLabelNoise;
  } else if (tag == "bleeding") {
    info.kind = CorruptionKind::kBleeding;
  } else if (tag.rfind("effect:", 0) == 0) {
    info.kind = CorruptionKind::kEffect;
    info.effect = effect_from_name(tag.substr(7));
  } else if (tag == "unknown") {
    info.kind = CorruptionKind::kUnknown;
  } else {
    throw ConfigError("unknown corruption tag: " + tag);
  }
  return info;
}

void CorpusSpec::validate() const {
  if (n_clean < 0 || n_label_noise < 0 || n_bleeding < 0 || n_effects < 0)
    throw ConfigError("corpus counts must be >= 0");
  if (total() < 1) throw ConfigError("corpus must contain at least one song");
  if (song_length_s < 1.0) throw ConfigError("song length must be >= 1 s");
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
}

namespace {

// Phase-continuous tone stack. freq_of(i) gives the instantaneous frequency
// of the fundamental at sample i.
template <class FreqFn, class AmpFn>
void add_harmonics(std::vector<double>& out, int fs, FreqFn freq_of,
                   AmpFn amp_of, const std::vector<double>& harmonic_amps,
                   double max_hz) {
  double phase = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double f0 = freq_of(i);
    phase += kTwoPi * f0 / fs;
    if (phase > kTwoPi) phase -= kTwoPi;
    const double amp = amp_of(i);
    double v = 0.0;
    for (std::size_t h = 0; h < harmonic_amps.size(); ++h) {
      const double hf = f0 * static_cast<double>(h + 1);
      if (hf > max_hz) break;
      v += harmonic_amps[h] * std::sin(static_cast<double>(h + 1) * phase);
    }
    out[i] += amp * v;
  }
}

Waveform make_vocals(Rng& rng, std::size_t n, int fs) {
  const double f0 = rng.uniform(300.0, 410.0);
  const double f0b = f0 * rng.uniform(1.12, 1.28);
  const double vib_rate = rng.uniform(4.5, 6.5);
  const double vib_depth = rng.uniform(0.01, 0.02);
  const double am_rate = rng.uniform(0.3, 0.8);
  const double am_phase = rng.uniform(0.0, kTwoPi);

  Waveform w;
  w.sample_rate = fs;
  w.samples.assign(n, 0.0);
  const std::size_t half = n / 2;
  add_harmonics(
      w.samples, fs,
      [&](std::size_t i) {
        const double base = i < half ? f0 : f0b;
        const double t = static_cast<double>(i) / fs;
        return base * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t));
      },
      [&](std::size_t i) {
        const double t = static_cast<double>(i) / fs;
        return 0.14 * (0.75 + 0.25 * std::sin(kTwoPi * am_rate * t + am_phase));
      },
      {1.0, 0.5, 0.25}, 1200.0);
  return w;
}

Waveform make_bass(Rng& rng, std::size_t n, int fs) {
  // Note changes every 1.5 s within 40-120 Hz.
  const std::size_t note_len = static_cast<std::size_t>(1.5 * fs);
  const std::size_t n_notes = n / note_len + 2;
  std::vector<double> notes(n_notes);
  for (double& f : notes) f = rng.uniform(45.0, 115.0);
  const double am_rate = rng.uniform(0.2, 0.6);

  Waveform w;
  w.sample_rate = fs;
  w.samples.assign(n, 0.0);
  add_harmonics(
      w.samples, fs,
      [&](std::size_t i) { return notes[i / note_len]; },
      [&](std::size_t i) {
        const double t = static_cast<double>(i) / fs;
        return 0.20 * (0.85 + 0.15 * std::sin(kTwoPi * am_rate * t));
      },
      {1.0}, 130.0);
  return w;
}

Waveform make_drums(Rng& rng, std::size_t n, int fs) {
  Waveform w;
  w.sample_rate = fs;
  w.samples.assign(n, 0.0);
  const std::size_t slot = static_cast<std::size_t>(0.2 * fs);
  for (std::size_t start = 0; start + 8 < n; start += slot) {
    const bool hit = rng.uniform() < 0.75;
    const double tau = rng.uniform(0.02, 0.05);
    const double amp = rng.uniform(0.20, 0.32);
    const std::size_t burst = std::min(
        n - start, static_cast<std::size_t>(0.15 * fs));
    if (!hit) continue;
    for (std::size_t i = 0; i < burst; ++i) {
      const double t = static_cast<double>(i) / fs;
      w.samples[start + i] +=
          amp * std::exp(-t / tau) * (2.0 * rng.uniform() - 1.0);
    }
  }
  return w;
}

Waveform make_other(Rng& rng, std::size_t n, int fs) {
  std::vector<double> noise(n);
  for (double& v : noise) v = 2.0 * rng.uniform() - 1.0;
  const double fc = rng.uniform(2200.0, 2700.0);
  const double q = 1.7;
  const std::vector<Biquad> bp = {rbj_bandpass(fc, q, fs),
                                  rbj_bandpass(fc, q, fs)};
  std::vector<double> shaped = biquad_cascade(bp, noise);
  double rms = 0.0;
  for (double v : shaped) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  const double gain = rms > 0.0 ? rng.uniform(0.05, 0.07) / rms : 0.0;

  Waveform w;
  w.sample_rate = fs;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = gain * shaped[i];
  return w;
}

Waveform sum_stems(const std::array<Waveform, kNumTargets>& stems) {
  Waveform mix;
  mix.sample_rate = stems[0].sample_rate;
  mix.samples.assign(stems[0].samples.size(), 0.0);
  for (const Waveform& s : stems) {
    for (std::size_t i = 0; i < mix.samples.size(); ++i)
      mix.samples[i] += s.samples[i];
  }
  return mix;
}

void require_clean(const StemSet& s, const char* op) {
  if (s.corruption.kind != CorruptionKind::kClean)
    throw ConfigError(std::string(op) + " requires a clean input song");
}

}  // namespace

StemSet synth_clean_song(std::uint64_t seed, double length_s, int sample_rate) {
  if (length_s < 1.0) throw ConfigError("song length must be >= 1 s");
  const std::size_t n =
      static_cast<std::size_t>(std::llround(length_s * sample_rate));

  StemSet s;
  s.seed = seed;
  s.corruption.kind = CorruptionKind::kClean;
  // One private stream per stem: draws of one stem never shift another's.
  {
    Rng r(derive_seed(seed, "vocals"));
    s.stems[static_cast<int>(Target::kVocals)] = make_vocals(r, n, sample_rate);
  }
  {
    Rng r(derive_seed(seed, "bass"));
    s.stems[static_cast<int>(Target::kBass)] = make_bass(r, n, sample_rate);
  }
  {
    Rng r(derive_seed(seed, "drums"));
    s.stems[static_cast<int>(Target::kDrums)] = make_drums(r, n, sample_rate);
  }
  {
    Rng r(derive_seed(seed, "other"));
    s.stems[static_cast<int>(Target::kOther)] = make_other(r, n, sample_rate);
  }
  s.mixture = sum_stems(s.stems);
  return s;
}

StemSet corrupt_label_noise(const StemSet& s, std::uint64_t seed) {
  require_clean(s, "corrupt_label_noise");
  Rng rng(seed);
  const int a = static_cast<int>(rng.below(kNumTargets));
  int b = static_cast<int>(rng.below(kNumTargets - 1));
  if (b >= a) ++b;

  StemSet out = s;
  std::swap(out.stems[a], out.stems[b]);
  out.corruption.kind = CorruptionKind::kLabelNoise;
  out.corruption.swapped = {std::min(a, b), std::max(a, b)};
  return out;
}

StemSet corrupt_bleeding(const StemSet& s, std::uint64_t seed, double gain_lo,
                         double gain_hi) {
  require_clean(s, "corrupt_bleeding");
  if (gain_lo > gain_hi || gain_lo < 0.0)
    throw ConfigError("bleeding gain range invalid");
  Rng rng(seed);

  StemSet out = s;
  for (int t = 0; t < kNumTargets; ++t) {
    for (int u = 0; u < kNumTargets; ++u) {
      if (u == t) continue;
      const double g = rng.uniform(gain_lo, gain_hi);
      out.corruption.bleed_gains[t][u] = g;
      for (std::size_t i = 0; i < out.stems[t].samples.size(); ++i)
        out.stems[t].samples[i] += g * s.stems[u].samples[i];
    }
  }
  // Rebuild the mixture from the contaminated stems, rescaled so total
  // mixture energy is unchanged.
  Waveform raw = sum_stems(out.stems);
  const double e_old = energy(s.mixture);
  const double e_raw = energy(raw);
  const double scale = e_raw > 0.0 ? std::sqrt(e_old / e_raw) : 1.0;
  for (double& v : raw.samples) v *= scale;
  out.mixture = std::move(raw);
  out.corruption.kind = CorruptionKind::kBleeding;
  return out;
}

StemSet corrupt_effect(const StemSet& s, EffectKind kind, std::uint64_t seed) {
  require_clean(s, "corrupt_effect");
  (void)seed;  // the three effects are parameter-fixed per the EffectsDB recipe

  StemSet out = s;
  const int fs = s.mixture.sample_rate;
  switch (kind) {
    case EffectKind::kDistortion: {
      const double gain = std::pow(10.0, 25.0 / 20.0);
      for (Waveform& w : out.stems)
        for (double& v : w.samples) v = std::tanh(gain * v);
      break;
    }
    case EffectKind::kReverb: {
      ReverbParams p;
      for (Waveform& w : out.stems) w = reverb(w, p);
      break;
    }
    case EffectKind::kLowpass: {
      const auto sections = design_cheby2_lowpass4(3000.0, 30.0, fs);
      const std::vector<Biquad> casc(sections.begin(), sections.end());
      for (Waveform& w : out.stems) w.samples = biquad_cascade(casc, w.samples);
      break;
    }
  }
  out.mixture = sum_stems(out.stems);
  out.corruption.kind = CorruptionKind::kEffect;
  out.corruption.effect = kind;
  return out;
}

std::vector<StemSet> build_corpus(const CorpusSpec& spec) {
  spec.validate();
  const int n = spec.total();

  // Tag assignment, shuffled as one deck; effect kinds split the effects
  // subset into near-equal thirds before the shuffle.
  struct Plan {
    CorruptionKind kind;
    EffectKind effect;
  };
  std::vector<Plan> plan;
  plan.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < spec.n_clean; ++i)
    plan.push_back({CorruptionKind::kClean, EffectKind::kDistortion});
  for (int i = 0; i < spec.n_label_noise; ++i)
    plan.push_back({CorruptionKind::kLabelNoise, EffectKind::kDistortion});
  for (int i = 0; i < spec.n_bleeding; ++i)
    plan.push_back({CorruptionKind::kBleeding, EffectKind::kDistortion});
  const int kd = (spec.n_effects + 2) / 3;
  const int kr = (spec.n_effects + 1) / 3;
  for (int i = 0; i < spec.n_effects; ++i) {
    EffectKind k = i < kd                ? EffectKind::kDistortion
                   : i < kd + kr         ? EffectKind::kReverb
                                         : EffectKind::kLowpass;
    plan.push_back({CorruptionKind::kEffect, k});
  }
  Rng shuffler(derive_seed(spec.master_seed, "shuffle"));
  shuffler.shuffle(plan);

  std::vector<StemSet> corpus(static_cast<std::size_t>(n));
  par::parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const std::uint64_t song_seed = derive_seed(spec.master_seed, i);
    StemSet song =
        synth_clean_song(song_seed, spec.song_length_s, spec.sample_rate);
    const std::uint64_t corrupt_seed = derive_seed(song_seed, "corrupt");
    switch (plan[i].kind) {
      case CorruptionKind::kClean:
        break;
      case CorruptionKind::kLabelNoise:
        song = corrupt_label_noise(song, corrupt_seed);
        break;
      case CorruptionKind::kBleeding:
        song = corrupt_bleeding(song, corrupt_seed);
        break;
      case CorruptionKind::kEffect:
        song = corrupt_effect(song, plan[i].effect, corrupt_seed);
        break;
      case CorruptionKind::kUnknown:
        break;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "song_%04zu", i);
    song.id = buf;
    corpus[i] = std::move(song);
  });
  return corpus;
}

std::vector<StemSet> build_clean_set(int count, double song_length_s,
                                     std::uint64_t seed, int sample_rate,
                                     const std::string& id_prefix) {
  if (count < 1) throw ConfigError("clean set must contain at least one song");
  std::vector<StemSet> set(static_cast<std::size_t>(count));
  par::parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    StemSet song =
        synth_clean_song(derive_seed(seed, i), song_length_s, sample_rate);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s_%04zu", id_prefix.c_str(), i);
    song.id = buf;
    set[i] = std::move(song);
  });
  return set;
}

}  // namespace attriclean
