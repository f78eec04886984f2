#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "attriclean/synth.h"
#include "test_util.h"

using namespace attriclean;

namespace {
StemSet clean_song(std::uint64_t seed = 100) {
  return synth_clean_song(seed, 2.0, 8000);
}
}  // namespace

TEST_CASE("same seed gives a bit-identical song") {
  const StemSet a = clean_song(7);
  const StemSet b = clean_song(7);
  CHECK(a.mixture.samples == b.mixture.samples);
  for (int t = 0; t < kNumTargets; ++t)
    CHECK(a.stems[t].samples == b.stems[t].samples);
  const StemSet c = clean_song(8);
  CHECK(a.mixture.samples != c.mixture.samples);
}

TEST_CASE("bass centroid sits below vocals centroid") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    const StemSet s = clean_song(seed);
    const double bass = testutil::spectral_centroid(s.stem(Target::kBass));
    const double vocals = testutil::spectral_centroid(s.stem(Target::kVocals));
    CHECK(bass < vocals);
  }
}

TEST_CASE("mixture equals the sample-wise stem sum") {
  const StemSet s = clean_song(11);
  for (std::size_t i = 0; i < s.mixture.samples.size(); ++i) {
    double acc = 0.0;
    for (int t = 0; t < kNumTargets; ++t) acc += s.stems[t].samples[i];
    CHECK(s.mixture.samples[i] == acc);
  }
}

TEST_CASE("label noise swaps exactly two stems and keeps the mixture") {
  const StemSet s = clean_song(21);
  const StemSet c = corrupt_label_noise(s, 77);
  CHECK(c.corruption.kind == CorruptionKind::kLabelNoise);
  const int a = c.corruption.swapped[0];
  const int b = c.corruption.swapped[1];
  REQUIRE(a >= 0);
  REQUIRE(b > a);
  CHECK(c.stems[a].samples == s.stems[b].samples);
  CHECK(c.stems[b].samples == s.stems[a].samples);
  for (int t = 0; t < kNumTargets; ++t) {
    if (t != a && t != b) CHECK(c.stems[t].samples == s.stems[t].samples);
  }
  CHECK(c.mixture.samples == s.mixture.samples);
}

TEST_CASE("bleeding with a zero gain range is the identity on stems") {
  const StemSet s = clean_song(31);
  const StemSet c = corrupt_bleeding(s, 5, 0.0, 0.0);
  for (int t = 0; t < kNumTargets; ++t)
    CHECK(c.stems[t].samples == s.stems[t].samples);
}

TEST_CASE("bleeding raises cross-correlation with the leaked stem") {
  const StemSet s = clean_song(41);
  const StemSet c = corrupt_bleeding(s, 6);
  const double before =
      std::abs(testutil::correlation(s.stem(Target::kVocals).samples,
                                     s.stem(Target::kDrums).samples));
  const double after =
      std::abs(testutil::correlation(c.stem(Target::kVocals).samples,
                                     s.stem(Target::kDrums).samples));
  CHECK(after > before);
}

TEST_CASE("bleeding gains stay in range and mixture energy is preserved") {
  const StemSet s = clean_song(51);
  const StemSet c = corrupt_bleeding(s, 7);
  for (int t = 0; t < kNumTargets; ++t) {
    for (int u = 0; u < kNumTargets; ++u) {
      if (u == t) continue;
      CHECK(c.corruption.bleed_gains[t][u] >= 0.1);
      CHECK(c.corruption.bleed_gains[t][u] <= 0.3);
    }
  }
  const double e_old = energy(s.mixture);
  const double e_new = energy(c.mixture);
  CHECK(std::abs(e_new - e_old) / e_old <= 0.01);
}

TEST_CASE("corrupt operators demand a clean input") {
  const StemSet s = clean_song(61);
  const StemSet c = corrupt_bleeding(s, 8);
  CHECK_THROWS_AS(corrupt_label_noise(c, 9), ConfigError);
  CHECK_THROWS_AS(corrupt_bleeding(c, 9), ConfigError);
  CHECK_THROWS_AS(corrupt_effect(c, EffectKind::kLowpass, 9), ConfigError);
}

TEST_CASE("lowpass effect removes nearly all energy above 3 kHz") {
  const StemSet s = clean_song(71);
  const StemSet c = corrupt_effect(s, EffectKind::kLowpass, 10);
  const double before = testutil::energy_above_hz(s.mixture, 3000.0);
  const double after = testutil::energy_above_hz(c.mixture, 3000.0);
  REQUIRE(before > 0.0);
  CHECK(after / before < 0.05);
}

TEST_CASE("distortion clips every stem inside the tanh bound") {
  const StemSet s = clean_song(81);
  const StemSet c = corrupt_effect(s, EffectKind::kDistortion, 11);
  for (int t = 0; t < kNumTargets; ++t) {
    for (double v : c.stems[t].samples) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("reverb extends the signal and keeps a strong dry path") {
  const StemSet s = clean_song(91);
  const StemSet c = corrupt_effect(s, EffectKind::kReverb, 12);
  CHECK(c.mixture.samples.size() >= s.mixture.samples.size());
  for (int t = 0; t < kNumTargets; ++t)
    CHECK(c.stems[t].samples.size() == c.mixture.samples.size());
  const double corr = testutil::correlation(c.mixture.samples, s.mixture.samples);
  CHECK(corr > 0.3);
}

TEST_CASE("unknown effect names are rejected") {
  CHECK_THROWS_AS(effect_from_name("flanger"), ConfigError);
  CHECK(effect_from_name("lowpass") == EffectKind::kLowpass);
}

TEST_CASE("build_corpus delivers the requested composition") {
  CorpusSpec spec;
  spec.n_clean = 10;
  spec.n_label_noise = 5;
  spec.n_bleeding = 5;
  spec.song_length_s = 1.0;
  spec.master_seed = 2024;
  const auto corpus = build_corpus(spec);
  REQUIRE(corpus.size() == 20);
  int clean = 0, ln = 0, bl = 0;
  for (const StemSet& s : corpus) {
    if (s.corruption.kind == CorruptionKind::kClean) ++clean;
    if (s.corruption.kind == CorruptionKind::kLabelNoise) ++ln;
    if (s.corruption.kind == CorruptionKind::kBleeding) ++bl;
  }
  CHECK(clean == 10);
  CHECK(ln == 5);
  CHECK(bl == 5);
  // Deterministic rebuild.
  const auto again = build_corpus(spec);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(corpus[i].id == again[i].id);
    CHECK(corpus[i].mixture.samples == again[i].mixture.samples);
    CHECK(corpus[i].corruption.tag() == again[i].corruption.tag());
  }
}

TEST_CASE("effects corpus covers near-equal thirds of the three kinds") {
  CorpusSpec spec;
  spec.n_clean = 10;
  spec.n_effects = 10;
  spec.song_length_s = 1.0;
  spec.master_seed = 99;
  const auto corpus = build_corpus(spec);
  int dist = 0, rev = 0, lp = 0;
  for (const StemSet& s : corpus) {
    if (s.corruption.kind != CorruptionKind::kEffect) continue;
    if (s.corruption.effect == EffectKind::kDistortion) ++dist;
    if (s.corruption.effect == EffectKind::kReverb) ++rev;
    if (s.corruption.effect == EffectKind::kLowpass) ++lp;
  }
  CHECK(dist + rev + lp == 10);
  CHECK(dist >= 3);
  CHECK(rev >= 3);
  CHECK(lp >= 3);
}

TEST_CASE("a single-song corpus is valid") {
  CorpusSpec spec;
  spec.n_clean = 1;
  spec.song_length_s = 1.0;
  spec.master_seed = 1;
  const auto corpus = build_corpus(spec);
  REQUIRE(corpus.size() == 1);
  CHECK(corpus[0].corruption.kind == CorruptionKind::kClean);
}

TEST_CASE("every corrupted song differs from its clean twin") {
  CorpusSpec spec;
  spec.n_clean = 4;
  spec.n_label_noise = 4;
  spec.n_bleeding = 4;
  spec.n_effects = 3;
  spec.song_length_s = 1.0;
  spec.master_seed = 31337;
  const auto corpus = build_corpus(spec);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const StemSet& song = corpus[i];
    if (!song.corruption.is_corrupted()) continue;
    const StemSet twin =
        synth_clean_song(song.seed, spec.song_length_s, spec.sample_rate);
    double max_rel = 0.0;
    for (int t = 0; t < kNumTargets; ++t) {
      const std::size_t n = twin.stems[t].samples.size();
      std::vector<double> a(song.stems[t].samples.begin(),
                            song.stems[t].samples.begin() + n);
      max_rel = std::max(max_rel, testutil::rel_l2_dist(twin.stems[t].samples, a));
    }
    CHECK(max_rel >= 1e-3);
  }
}

TEST_CASE("corpus spec validation") {
  CorpusSpec spec;
  CHECK_THROWS_AS(spec.validate(), ConfigError);  // empty
  spec.n_clean = -1;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.n_clean = 2;
  spec.song_length_s = 0.2;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}
