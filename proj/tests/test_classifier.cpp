#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "attriclean/classifier.h"
#include "test_util.h"

using namespace attriclean;

namespace {

ClassifierConfig tiny_config(std::uint64_t seed) {
  ClassifierConfig cfg;
  cfg.epochs = 12;
  cfg.steps_per_epoch = 60;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("classifier training is seed-deterministic") {
  const auto refs = build_clean_set(3, 2.0, 7000, 8000, "ref");
  const ClassifierParams a = train_classifier(refs, tiny_config(5));
  const ClassifierParams b = train_classifier(refs, tiny_config(5));
  CHECK(a.theta == b.theta);
  const ClassifierParams c = train_classifier(refs, tiny_config(6));
  CHECK(a.theta != c.theta);
}

TEST_CASE("class probabilities form a distribution") {
  const auto refs = build_clean_set(3, 2.0, 7100, 8000, "ref");
  const ClassifierParams c = train_classifier(refs, tiny_config(7));
  const FrameDataset data = build_frame_dataset(refs, c.embed);
  Rng rng(3);
  for (int probe = 0; probe < 20; ++probe) {
    const auto p = predict_probs(c, data.frame(rng.below(data.size())));
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("an all-zero classifier assigns uniform probabilities") {
  const auto refs = build_clean_set(1, 1.0, 7200, 8000, "ref");
  ClassifierConfig cfg = tiny_config(8);
  ClassifierParams c;
  c.dim = static_cast<std::size_t>(cfg.embed.n_mels);
  c.hidden = cfg.hidden;
  c.embed = cfg.embed;
  c.theta.assign(c.param_count(), 0.0);
  c.feat_mean.assign(c.dim, 0.0);
  c.feat_std.assign(c.dim, 1.0);
  for (Target t : kAllTargets) {
    const ClassProbability p = song_class_score(c, refs[0], t);
    CHECK(p.p_correct == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("classifier gradient matches finite differences") {
  const auto refs = build_clean_set(2, 1.0, 7300, 8000, "ref");
  ClassifierConfig cfg = tiny_config(9);
  ClassifierParams c = train_classifier(refs, cfg);
  const FrameDataset data = build_frame_dataset(refs, cfg.embed);

  std::vector<std::size_t> rows(24);
  std::iota(rows.begin(), rows.end(), std::size_t{10});
  std::vector<double> grad;
  classifier_loss_gradient(c, data, rows, grad);

  Rng rng(31);
  std::vector<std::size_t> coords;
  for (int i = 0; i < 60; ++i) coords.push_back(rng.below(c.param_count()));
  for (int i = 0; i < 20; ++i)
    coords.push_back(c.w2_off() + rng.below(kNumTargets * c.hidden));
  for (int i = 0; i < 20; ++i) coords.push_back(c.b2_off() + rng.below(kNumTargets));

  std::vector<double> tmp;
  const double worst = testutil::fd_max_rel_error(
      c.theta, [&] { return classifier_loss_gradient(c, data, rows, tmp); },
      grad, coords);
  CHECK(worst <= 1e-4);
}

TEST_CASE("held-out frame accuracy reaches 90% on band-separated stems") {
  const auto train_refs = build_clean_set(6, 2.0, 7400, 8000, "ref");
  const auto held_out = build_clean_set(3, 2.0, 7500, 8000, "holdout");
  ClassifierConfig cfg;
  cfg.epochs = 20;
  cfg.steps_per_epoch = 120;
  cfg.seed = 10;
  const ClassifierParams c = train_classifier(train_refs, cfg);

  const FrameDataset data = build_frame_dataset(held_out, cfg.embed);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = predict_probs(c, data.frame(i));
    int argmax = 0;
    for (int k = 1; k < kNumTargets; ++k)
      if (p[k] > p[argmax]) argmax = k;
    if (argmax == data.labels[i]) ++correct;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(data.size());
  CHECK(acc >= 0.9);
}

TEST_CASE("a swapped stem scores below the clean median for its label") {
  const auto refs = build_clean_set(6, 2.0, 7600, 8000, "ref");
  ClassifierConfig cfg;
  cfg.epochs = 16;
  cfg.steps_per_epoch = 100;
  cfg.seed = 11;
  const ClassifierParams c = train_classifier(refs, cfg);

  // Clean songs' vocals probabilities.
  std::vector<double> clean_scores;
  for (std::uint64_t seed = 7700; seed < 7708; ++seed) {
    const StemSet s = synth_clean_song(seed, 2.0, 8000);
    clean_scores.push_back(song_class_score(c, s, Target::kVocals).p_correct);
  }
  std::sort(clean_scores.begin(), clean_scores.end());
  const double median = clean_scores[clean_scores.size() / 2];

  // Bass audio labelled vocals.
  StemSet swapped = synth_clean_song(7800, 2.0, 8000);
  std::swap(swapped.stems[static_cast<int>(Target::kVocals)],
            swapped.stems[static_cast<int>(Target::kBass)]);
  const double p = song_class_score(c, swapped, Target::kVocals).p_correct;
  CHECK(p < median);
}

TEST_CASE("cls_filter keeps ceil(rN) songs and drops label noise first") {
  const auto refs = build_clean_set(6, 2.0, 7900, 8000, "ref");
  ClassifierConfig cfg;
  cfg.epochs = 16;
  cfg.steps_per_epoch = 100;
  cfg.seed = 12;
  const ClassifierParams c = train_classifier(refs, cfg);

  CorpusSpec spec;
  spec.n_clean = 6;
  spec.n_label_noise = 3;
  spec.n_bleeding = 3;
  spec.song_length_s = 2.0;
  spec.master_seed = 8000;
  const auto corpus = build_corpus(spec);

  SUBCASE("r = 1 keeps everything") {
    CHECK(cls_filter(corpus, c, 1.0).retained.size() == corpus.size());
  }
  SUBCASE("r = 0.5 keeps half and the removed set is enriched in label noise") {
    const ClsFilterResult result = cls_filter(corpus, c, 0.5);
    REQUIRE(result.retained.size() == 6);
    int removed_ln = 0, removed_bl = 0;
    for (const StemSet& s : corpus) {
      const bool kept = std::find(result.retained.begin(), result.retained.end(),
                                  s.id) != result.retained.end();
      if (kept) continue;
      if (s.corruption.kind == CorruptionKind::kLabelNoise) ++removed_ln;
      if (s.corruption.kind == CorruptionKind::kBleeding) ++removed_bl;
    }
    CHECK(removed_ln >= removed_bl);
    CHECK(removed_ln == 3);  // every label-noise song must go
  }
}

TEST_CASE("p_correct stays within [0, 1] for corrupted inputs too") {
  const auto refs = build_clean_set(3, 1.0, 8100, 8000, "ref");
  const ClassifierParams c = train_classifier(refs, tiny_config(13));
  const StemSet dirty =
      corrupt_effect(synth_clean_song(8200, 1.0, 8000), EffectKind::kDistortion, 1);
  for (Target t : kAllTargets) {
    const double p = song_class_score(c, dirty, t).p_correct;
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}
