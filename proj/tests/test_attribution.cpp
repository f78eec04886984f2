#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "attriclean/attribution.h"
#include "test_util.h"

using namespace attriclean;

namespace {

struct Fixture {
  std::vector<StemSet> corpus = build_clean_set(5, 2.0, 3000, 8000, "song");
  std::vector<StemSet> refs = build_clean_set(3, 2.0, 4000, 8000, "ref");
  StftConfig stft;
  FramePool pool = build_frame_pool(corpus, Target::kVocals, stft);
  FramePool ref_pool = build_frame_pool(refs, Target::kVocals, stft);
  ModelParams theta = init_params(Target::kVocals, ModelDims{}, 77);
};

FisherDiagonal ones_like(const ModelParams& p) {
  FisherDiagonal f;
  f.target = p.target;
  f.values.assign(p.dims.param_count(), 1.0);
  f.n_samples = 1;
  f.floor_used = 1.0;
  return f;
}

SeparationModel quick_model(const std::vector<StemSet>& corpus,
                            const std::vector<StemSet>& refs,
                            std::uint64_t seed, int epochs = 6) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.steps_per_epoch = 25;
  cfg.seed = seed;
  return train_all(corpus, refs, cfg);
}

}  // namespace

TEST_CASE("fisher diagonal floors every entry when gradients vanish") {
  // Stationary construction: zero params and stem spectra = 0.5 * mixture
  // spectra give zero gradients on every song.
  Fixture fx;
  std::vector<StemSet> rigged = fx.corpus;
  for (StemSet& s : rigged) {
    s.stem(Target::kVocals) = s.mixture;
    for (double& v : s.stem(Target::kVocals).samples) v *= 0.5;
  }
  const FramePool pool = build_frame_pool(rigged, Target::kVocals, fx.stft);
  ModelParams zero;
  zero.dims = ModelDims{};
  zero.theta.assign(zero.dims.param_count(), 0.0);

  const FisherDiagonal f = fisher_diagonal(zero, pool);
  CHECK(f.floor_used == 1e-12);  // abs floor; rel floor of a zero max is zero
  for (double v : f.values) CHECK(v == 1e-12);
}

TEST_CASE("fisher diagonal matches a brute-force per-song loop") {
  Fixture fx;
  const FisherDiagonal f = fisher_diagonal(fx.theta, fx.pool);
  CHECK(f.n_samples == fx.corpus.size());

  // Independent oracle: explicit per-song gradient loop over 20 coordinates.
  Rng rng(55);
  std::vector<double> grad;
  std::vector<std::vector<double>> per_song(fx.corpus.size());
  for (std::size_t i = 0; i < fx.corpus.size(); ++i) {
    song_gradient(fx.theta, fx.pool, i, grad);
    per_song[i] = grad;
  }
  for (int probe = 0; probe < 20; ++probe) {
    const std::size_t c = rng.below(fx.theta.dims.param_count());
    double acc = 0.0;
    for (const auto& g : per_song) acc += g[c] * g[c];
    acc /= static_cast<double>(fx.corpus.size());
    const double expected = std::max(acc, f.floor_used);
    CHECK(f.values[c] == doctest::Approx(expected).epsilon(1e-6));
  }
  for (double v : f.values) CHECK(v >= f.floor_used);
}

TEST_CASE("scaling the loss scales raw fisher entries quadratically") {
  // A loss c * L has gradients c * g, so every raw fisher entry
  // (1/N) sum (c g)^2 is exactly c^2 times the original.
  Fixture fx;
  std::vector<double> grad;
  std::vector<std::vector<double>> per_song(fx.corpus.size());
  for (std::size_t i = 0; i < fx.corpus.size(); ++i) {
    song_gradient(fx.theta, fx.pool, i, grad);
    per_song[i] = grad;
  }
  const double c = 3.0;
  Rng rng(66);
  for (int probe = 0; probe < 10; ++probe) {
    const std::size_t k = rng.below(fx.theta.dims.param_count());
    double raw = 0.0, scaled = 0.0;
    for (const auto& g : per_song) {
      raw += g[k] * g[k];
      scaled += (c * g[k]) * (c * g[k]);
    }
    CHECK(scaled == doctest::Approx(c * c * raw).epsilon(1e-12));
  }
}

TEST_CASE("unlearn with alpha = 0 returns theta bit-exactly") {
  Fixture fx;
  const FisherDiagonal f = fisher_diagonal(fx.theta, fx.pool);
  UnlearnConfig cfg;
  cfg.alpha = 0.0;
  cfg.n_train = fx.corpus.size();
  const ModelParams out = unlearn(fx.theta, f, fx.ref_pool, 0, cfg);
  CHECK(out.theta == fx.theta.theta);
}

TEST_CASE("one adaptive unlearning step raises the reference loss") {
  // Ascent on a trained model: the unlearned song's loss must not drop.
  const auto corpus = build_clean_set(4, 2.0, 3100, 8000, "song");
  const auto refs = build_clean_set(2, 2.0, 4100, 8000, "ref");
  const SeparationModel model = quick_model(corpus, refs, 5);
  const ModelParams& theta = model.per_target[0];
  const FramePool pool = build_frame_pool(corpus, Target::kVocals, StftConfig{});
  const FramePool ref_pool = build_frame_pool(refs, Target::kVocals, StftConfig{});
  const FisherDiagonal f = fisher_diagonal(theta, pool);

  UnlearnConfig cfg;
  cfg.n_train = corpus.size();
  const ModelParams out = unlearn(theta, f, ref_pool, 0, cfg);
  const double before = pool_song_loss(theta, ref_pool, 0);
  const double after = pool_song_loss(out, ref_pool, 0);
  CHECK(after >= before);
  // And the step moved theta by the advertised relative norm.
  double dn = 0.0, tn = 0.0;
  for (std::size_t i = 0; i < out.theta.size(); ++i) {
    const double d = out.theta[i] - theta.theta[i];
    dn += d * d;
    tn += theta.theta[i] * theta.theta[i];
  }
  CHECK(std::sqrt(dn) == doctest::Approx(1e-3 * std::sqrt(tn)).epsilon(1e-6));
}

TEST_CASE("EWC rule with unit fisher and N = 1 equals the naive rule bitwise") {
  Fixture fx;
  UnlearnConfig cfg;
  cfg.alpha = 0.05;
  cfg.n_train = 1;
  cfg.steps = 1;
  const ModelParams ewc = unlearn(fx.theta, ones_like(fx.theta), fx.ref_pool, 1, cfg);
  const ModelParams naive = naive_unlearn(fx.theta, fx.ref_pool, 1, 0.05, 1);
  CHECK(ewc.theta == naive.theta);
}

TEST_CASE("attribution matrix with alpha = 0 is identically zero") {
  Fixture fx;
  const auto refs = build_clean_set(2, 2.0, 4200, 8000, "ref");
  SeparationModel model;
  model.stft = fx.stft;
  for (Target t : kAllTargets)
    model.per_target[static_cast<int>(t)] = init_params(t, ModelDims{}, 88);
  UnlearnConfig cfg;
  cfg.alpha = 0.0;
  cfg.n_train = fx.corpus.size();
  const AttributionMatrix a = attribution_matrix(model, fx.corpus, refs, cfg);
  CHECK(a.n_train == fx.corpus.size());
  CHECK(a.n_refs == refs.size());
  for (double v : a.delta) CHECK(v == 0.0);
}

TEST_CASE("attribution runs exactly M unlearning updates per target") {
  Fixture fx;
  SeparationModel model;
  model.stft = fx.stft;
  for (Target t : kAllTargets)
    model.per_target[static_cast<int>(t)] = init_params(t, ModelDims{}, 99);
  UnlearnConfig cfg;
  cfg.n_train = fx.corpus.size();
  const AttributionMatrix a = attribution_matrix(model, fx.corpus, fx.refs, cfg);
  CHECK(a.unlearn_runs == fx.refs.size() * kNumTargets);
  CHECK(a.delta.size() == fx.corpus.size() * fx.refs.size() * kNumTargets);
  for (double v : a.delta) CHECK(std::isfinite(v));
  for (double v : a.baseline) CHECK(std::isfinite(v));
}

TEST_CASE("a planted duplicate of a reference ranks high in its column") {
  // Train on a corpus whose first song is a bit-copy of reference 0; after
  // unlearning that reference, the duplicate's loss must move more than most
  // other songs' (top 10% of the column for the matching target).
  auto corpus = build_clean_set(10, 2.0, 3200, 8000, "song");
  const auto refs = build_clean_set(3, 2.0, 4300, 8000, "ref");
  corpus[0].stems = refs[0].stems;
  corpus[0].mixture = refs[0].mixture;

  const SeparationModel model = quick_model(corpus, refs, 6, 10);
  UnlearnConfig cfg;
  cfg.n_train = corpus.size();
  const AttributionMatrix a = attribution_matrix(model, corpus, refs, cfg);

  for (Target t : {Target::kVocals, Target::kBass}) {
    const std::size_t ti = static_cast<std::size_t>(t);
    std::vector<double> column(a.n_train);
    for (std::size_t i = 0; i < a.n_train; ++i) column[i] = a.at(i, 0, ti);
    const double dup = column[0];
    std::size_t above = 0;
    for (double v : column)
      if (v > dup) ++above;
    CHECK(above <= a.n_train / 10);  // top 10%
  }
}

TEST_CASE("unified aggregation averages all reference and target cells") {
  AttributionMatrix a;
  a.n_train = 2;
  a.n_refs = 2;
  a.train_ids = {"s0", "s1"};
  a.ref_ids = {"r0", "r1"};
  a.delta.assign(a.n_train * a.n_refs * kNumTargets, 0.0);
  // Encode the spec's 2x2 example [[1,3],[2,4]] identically in each target.
  for (std::size_t t = 0; t < kNumTargets; ++t) {
    a.at(0, 0, t) = 1.0;
    a.at(0, 1, t) = 3.0;
    a.at(1, 0, t) = 2.0;
    a.at(1, 1, t) = 4.0;
  }
  const auto scores = aggregate_unified(a);
  CHECK(scores[0] == doctest::Approx(2.0));
  CHECK(scores[1] == doctest::Approx(3.0));

  SUBCASE("adding a constant shifts every score by that constant") {
    for (double& v : a.delta) v += 5.0;
    const auto shifted = aggregate_unified(a);
    CHECK(shifted[0] == doctest::Approx(7.0));
    CHECK(shifted[1] == doctest::Approx(8.0));
  }
  SUBCASE("single ref, single target slice equals that column") {
    AttributionMatrix b;
    b.n_train = 3;
    b.n_refs = 1;
    b.train_ids = {"a", "b", "c"};
    b.ref_ids = {"r"};
    b.delta.assign(b.n_train * kNumTargets, 0.0);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t t = 0; t < kNumTargets; ++t)
        b.at(i, 0, t) = static_cast<double>(i) + 1.0;
    const auto s = aggregate_unified(b);
    CHECK(s == std::vector<double>{1.0, 2.0, 3.0});
  }
}

TEST_CASE("per-target aggregation and its relation to unified") {
  AttributionMatrix a;
  a.n_train = 2;
  a.n_refs = 3;
  a.train_ids = {"s0", "s1"};
  a.ref_ids = {"r0", "r1", "r2"};
  a.delta.assign(a.n_train * a.n_refs * kNumTargets, 0.0);
  Rng rng(8);
  for (double& v : a.delta) v = rng.uniform(-1.0, 1.0);

  // Averaging the per-target scores over targets equals the unified score
  // when every target has the same number of references.
  const auto unified = aggregate_unified(a);
  for (std::size_t i = 0; i < a.n_train; ++i) {
    double acc = 0.0;
    for (Target t : kAllTargets) acc += aggregate_per_target(a, t)[i];
    CHECK(acc / kNumTargets == doctest::Approx(unified[i]).epsilon(1e-12));
  }

  SUBCASE("constant slice means every song ties") {
    for (std::size_t i = 0; i < a.n_train; ++i)
      for (std::size_t j = 0; j < a.n_refs; ++j) a.at(i, j, 0) = 0.25;
    const auto s = aggregate_per_target(a, Target::kVocals);
    CHECK(s[0] == doctest::Approx(s[1]));
  }
  SUBCASE("no references is an error") {
    AttributionMatrix empty;
    empty.n_train = 2;
    empty.n_refs = 0;
    CHECK_THROWS_AS(aggregate_per_target(empty, Target::kBass), ConfigError);
  }
}

TEST_CASE("filter_ranked keeps the top ceil(rN) with the id tie rule") {
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (int i = 0; i < 200; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "song_%04d", i);
    ids.push_back(buf);
    scores.push_back(static_cast<double>((i * 37) % 200));
  }
  SUBCASE("r = 1 keeps everything") {
    CHECK(filter_ranked(ids, scores, 1.0).size() == 200);
  }
  SUBCASE("r = 0.75 keeps 150 of 200") {
    CHECK(filter_ranked(ids, scores, 0.75).size() == 150);
  }
  SUBCASE("all-equal scores fall back to ascending ids") {
    std::vector<double> equal(200, 1.0);
    const auto kept = filter_ranked(ids, equal, 0.5);
    REQUIRE(kept.size() == 100);
    for (int i = 0; i < 100; ++i) CHECK(kept[i] == ids[i]);
  }
  SUBCASE("invalid ratios and scores are rejected") {
    CHECK_THROWS_AS(filter_ranked(ids, scores, 0.0), ConfigError);
    CHECK_THROWS_AS(filter_ranked(ids, scores, 1.2), ConfigError);
    std::vector<double> bad = scores;
    bad[5] = std::nan("");
    CHECK_THROWS_AS(filter_ranked(ids, bad, 0.5), ConfigError);
  }
}

TEST_CASE("filter_ranked is invariant under monotone score transforms") {
  Rng rng(12);
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (int i = 0; i < 57; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "id_%03d", i);
    ids.push_back(buf);
    scores.push_back(rng.uniform(-4.0, 4.0));
  }
  for (double r : {0.1, 0.33, 0.8}) {
    const auto base = filter_ranked(ids, scores, r);
    std::vector<double> warped = scores;
    for (double& v : warped) v = std::exp(0.5 * v) + 3.0;  // strictly monotone
    CHECK(filter_ranked(ids, warped, r) == base);
    // Low-is-good ordering with negated scores matches too.
    std::vector<double> neg = scores;
    for (double& v : neg) v = -v;
    CHECK(filter_ranked(ids, neg, r, RankOrder::kLowIsGood) == base);
  }
}

TEST_CASE("retained_count rounds up and respects bounds") {
  CHECK(retained_count(200, 0.75) == 150);
  CHECK(retained_count(200, 0.5) == 100);
  CHECK(retained_count(10, 0.05) == 1);
  CHECK(retained_count(7, 0.7) == 5);  // ceil(4.9)
  CHECK(retained_count(3, 1.0) == 3);
}

TEST_CASE("attribution matrices round-trip through the binary format") {
  AttributionMatrix a;
  a.n_train = 3;
  a.n_refs = 2;
  a.train_ids = {"s0", "s1", "s2"};
  a.ref_ids = {"r0", "r1"};
  a.baseline_checksum = 0xdeadbeefULL;
  a.unlearn_runs = 8;
  a.delta.assign(a.n_train * a.n_refs * kNumTargets, 0.0);
  a.baseline.assign(a.n_train * kNumTargets, 0.0);
  Rng rng(17);
  for (double& v : a.delta) v = rng.normal();
  for (double& v : a.baseline) v = rng.uniform(0.0, 2.0);

  const auto path =
      std::filesystem::temp_directory_path() / "attriclean_attr_test.bin";
  save_attribution(a, path);
  const AttributionMatrix b = load_attribution(path);
  CHECK(b.n_train == a.n_train);
  CHECK(b.n_refs == a.n_refs);
  CHECK(b.train_ids == a.train_ids);
  CHECK(b.ref_ids == a.ref_ids);
  CHECK(b.baseline_checksum == a.baseline_checksum);
  CHECK(b.delta == a.delta);
  CHECK(b.baseline == a.baseline);
  std::filesystem::remove(path);
}
