#ifndef ATTRICLEAN_SYNTH_H
#define ATTRICLEAN_SYNTH_H

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "attriclean/common.h"
#include "attriclean/waveform.h"

namespace attriclean {

enum class CorruptionKind { kUnknown, kClean, kLabelNoise, kBleeding, kEffect };

enum class EffectKind { kDistortion, kReverb, kLowpass };

EffectKind effect_from_name(const std::string& name);
const char* effect_name(EffectKind k);

// Ground truth about how a song was corrupted. Never serialized with the
// song itself; the on-disk corpus keeps tags in a separate ledger file so
// cleaning methods cannot read them by accident.
struct CorruptionInfo {
  CorruptionKind kind = CorruptionKind::kUnknown;
  EffectKind effect = EffectKind::kDistortion;
  std::array<int, 2> swapped = {-1, -1};                       // label noise
  std::array<std::array<double, kNumTargets>, kNumTargets> bleed_gains{};

  bool is_clean() const { return kind == CorruptionKind::kClean; }
  bool is_corrupted() const {
    return kind != CorruptionKind::kClean && kind != CorruptionKind::kUnknown;
  }
  std::string tag() const;
  static CorruptionInfo from_tag(const std::string& tag);
};

// One song: per-target stems plus their mixture.
struct StemSet {
  std::string id;
  std::uint64_t seed = 0;
  std::array<Waveform, kNumTargets> stems;
  Waveform mixture;
  CorruptionInfo corruption;

  const Waveform& stem(Target t) const { return stems[static_cast<int>(t)]; }
  Waveform& stem(Target t) { return stems[static_cast<int>(t)]; }
};

struct CorpusSpec {
  int n_clean = 0;
  int n_label_noise = 0;
  int n_bleeding = 0;
  int n_effects = 0;
  double song_length_s = 6.0;
  int sample_rate = 8000;
  std::uint64_t master_seed = 0;

  int total() const { return n_clean + n_label_noise + n_bleeding + n_effects; }
  void validate() const;
};

// Four spectrally distinguishable stems mixed at unit gains:
// vocals 300-1200 Hz harmonic stack with vibrato, bass 40-120 Hz sinusoid,
// drums sparse decaying noise bursts, other 1.5-3.5 kHz colored noise.
StemSet synth_clean_song(std::uint64_t seed, double length_s,
                         int sample_rate = 8000);

// Swaps the stems of two randomly chosen targets; mixture untouched.
StemSet corrupt_label_noise(const StemSet& s, std::uint64_t seed);

// Leaks every other stem into each reference stem with per-pair gains drawn
// from [gain_lo, gain_hi]; the mixture is rebuilt from the contaminated stems
// and rescaled to the original mixture energy.
StemSet corrupt_bleeding(const StemSet& s, std::uint64_t seed,
                         double gain_lo = 0.1, double gain_hi = 0.3);

// Applies one audio effect to every stem and rebuilds the mixture.
// distortion: 25 dB input gain into tanh; reverb: room 0.8 damping 0.8
// wet 0.5 dry 0.4; lowpass: 4th-order, 3 kHz.
StemSet corrupt_effect(const StemSet& s, EffectKind kind, std::uint64_t seed);

// Requested composition, deterministically shuffled by master_seed; effect
// kinds cover random thirds of the effects subset.
std::vector<StemSet> build_corpus(const CorpusSpec& spec);

// Clean-only corpus used for reference and evaluation sets.
std::vector<StemSet> build_clean_set(int count, double song_length_s,
                                     std::uint64_t seed, int sample_rate = 8000,
                                     const std::string& id_prefix = "song");

}  // namespace attriclean

#endif  // ATTRICLEAN_SYNTH_H
