#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "attriclean/sepmodel.h"
#include "test_util.h"

using namespace attriclean;

namespace {

std::vector<StemSet> tiny_corpus(int n, std::uint64_t seed) {
  return build_clean_set(n, 2.0, seed, 8000, "song");
}

FramePool tiny_pool(const std::vector<StemSet>& corpus,
                    Target t = Target::kVocals) {
  return build_frame_pool(corpus, t, StftConfig{});
}

}  // namespace

TEST_CASE("zero parameters give a 0.5 mask everywhere") {
  ModelParams p;
  p.dims = ModelDims{};
  p.theta.assign(p.dims.param_count(), 0.0);
  std::vector<double> frame(p.dims.bins, 1.0);
  const auto mask = forward_mask(p, frame);
  for (double m : mask) CHECK(m == doctest::Approx(0.5));
}

TEST_CASE("masks stay strictly inside (0, 1)") {
  const ModelParams p = init_params(Target::kBass, ModelDims{}, 3);
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> frame(p.dims.bins);
    for (double& v : frame) v = rng.uniform(0.0, 30.0);
    for (double m : forward_mask(p, frame)) {
      CHECK(m > 0.0);
      CHECK(m < 1.0);
    }
  }
}

TEST_CASE("raising one output bias raises only that mask entry") {
  ModelParams p = init_params(Target::kOther, ModelDims{}, 5);
  std::vector<double> frame(p.dims.bins, 2.0);
  const auto before = forward_mask(p, frame);
  const std::size_t k = 17;
  p.theta[p.dims.b2_off() + k] += 0.5;
  const auto after = forward_mask(p, frame);
  CHECK(after[k] > before[k]);
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (i != k) CHECK(after[i] == doctest::Approx(before[i]));
  }
}

TEST_CASE("song loss is deterministic and strictly positive") {
  const auto corpus = tiny_corpus(2, 900);
  const ModelParams p = init_params(Target::kVocals, ModelDims{}, 7);
  const LossRecord a = song_loss(p, corpus[0], Target::kVocals, StftConfig{});
  const LossRecord b = song_loss(p, corpus[0], Target::kVocals, StftConfig{});
  CHECK(a.loss == b.loss);
  CHECK(a.loss > 0.0);
  CHECK(a.song_id == corpus[0].id);
}

TEST_CASE("loss stays positive even when the stem equals the mixture") {
  // A sigmoid mask never reaches 1, so the fit cannot be exact.
  StemSet s = synth_clean_song(1234, 1.0, 8000);
  s.stems[static_cast<int>(Target::kVocals)] = s.mixture;
  const ModelParams p = init_params(Target::kVocals, ModelDims{}, 9);
  const LossRecord rec = song_loss(p, s, Target::kVocals, StftConfig{});
  CHECK(rec.loss > 0.0);
}

TEST_CASE("batch gradient matches central finite differences") {
  const auto corpus = tiny_corpus(2, 901);
  const FramePool pool = tiny_pool(corpus);
  ModelParams p = init_params(Target::kVocals, ModelDims{}, 11);

  std::vector<std::size_t> rows(32);
  std::iota(rows.begin(), rows.end(), std::size_t{40});
  std::vector<double> grad;
  batch_gradient(p, pool, rows, grad);

  // 100 random coordinates across all four parameter blocks.
  Rng rng(23);
  std::vector<std::size_t> coords;
  const ModelDims d = p.dims;
  for (int i = 0; i < 70; ++i) coords.push_back(rng.below(d.param_count()));
  for (int i = 0; i < 10; ++i) coords.push_back(d.b1_off() + rng.below(d.hidden));
  for (int i = 0; i < 10; ++i) coords.push_back(d.b2_off() + rng.below(d.bins));
  for (int i = 0; i < 10; ++i) coords.push_back(d.w2_off() + rng.below(d.bins * d.hidden));

  std::vector<double> tmp;
  const double worst = testutil::fd_max_rel_error(
      p.theta,
      [&] { return batch_gradient(p, pool, rows, tmp); },
      grad, coords);
  CHECK(worst <= 1e-4);
}

TEST_CASE("gradient vanishes at a synthetic stationary point") {
  // With W2 = 0 and b2 = 0 the mask is identically 0.5; choosing the stem
  // as 0.5 * mixture makes every frame error zero, so only the b2/W2 path
  // could move, and its factor (m*x - y) is zero too.
  const auto corpus = tiny_corpus(1, 902);
  std::vector<StemSet> rigged = corpus;
  StemSet& s = rigged[0];
  s.stem(Target::kVocals) = s.mixture;
  for (double& v : s.stem(Target::kVocals).samples) v *= 0.5;
  // Magnitude spectra are linear under positive scaling, so |stem| frames are
  // exactly 0.5 * |mixture| frames.
  const FramePool pool = tiny_pool(rigged);
  ModelParams p;
  p.dims = ModelDims{};
  p.theta.assign(p.dims.param_count(), 0.0);

  std::vector<std::size_t> rows(pool.total_frames());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  std::vector<double> grad;
  const double loss = batch_gradient(p, pool, rows, grad);
  CHECK(loss == 0.0);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("the gradient of a scaled loss is the scaled gradient") {
  const auto corpus = tiny_corpus(1, 903);
  const FramePool pool = tiny_pool(corpus);
  ModelParams p = init_params(Target::kVocals, ModelDims{}, 13);
  std::vector<std::size_t> rows(16);
  std::iota(rows.begin(), rows.end(), std::size_t{0});

  std::vector<double> grad;
  batch_gradient(p, pool, rows, grad);
  const double c = 3.5;
  std::vector<double> scaled = grad;
  for (double& g : scaled) g *= c;

  // Finite differences of c * L against c * grad L.
  Rng rng(29);
  std::vector<std::size_t> coords;
  for (int i = 0; i < 25; ++i) coords.push_back(rng.below(p.dims.param_count()));
  std::vector<double> tmp;
  const double worst = testutil::fd_max_rel_error(
      p.theta,
      [&] { return c * batch_gradient(p, pool, rows, tmp); },
      scaled, coords);
  CHECK(worst <= 1e-4);

  // Mean semantics: duplicating the batch leaves loss and gradient unchanged.
  std::vector<std::size_t> twice = rows;
  twice.insert(twice.end(), rows.begin(), rows.end());
  std::vector<double> g2;
  const double l1 = batch_gradient(p, pool, rows, grad);
  const double l2 = batch_gradient(p, pool, twice, g2);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  for (std::size_t i = 0; i < grad.size(); ++i)
    CHECK(grad[i] == doctest::Approx(g2[i]).epsilon(1e-9));
}

TEST_CASE("training improves on epoch zero and is seed-deterministic") {
  const auto corpus = tiny_corpus(6, 904);
  const auto refs = tiny_corpus(3, 905);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.steps_per_epoch = 30;
  cfg.seed = 42;

  const FramePool train_pool = tiny_pool(corpus);
  const FramePool val_pool = tiny_pool(refs);
  const TrainResult a = train_target(train_pool, val_pool, Target::kVocals, cfg);
  const TrainResult b = train_target(train_pool, val_pool, Target::kVocals, cfg);

  CHECK(a.params.theta == b.params.theta);
  CHECK(a.best_epoch == b.best_epoch);
  REQUIRE(a.log.size() == static_cast<std::size_t>(cfg.epochs) + 1);
  CHECK(a.log[a.best_epoch].train_loss < a.log[0].train_loss);

  // The selected checkpoint's validation loss never exceeds the final epoch's.
  CHECK(a.log[a.best_epoch].val_loss <= a.log.back().val_loss);

  TrainConfig other = cfg;
  other.seed = 43;
  const TrainResult c = train_target(train_pool, val_pool, Target::kVocals, other);
  CHECK(a.params.theta != c.params.theta);
}

TEST_CASE("trained model beats untrained parameters on eval SDR") {
  const auto corpus = tiny_corpus(6, 906);
  const auto refs = tiny_corpus(3, 907);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.steps_per_epoch = 40;
  cfg.seed = 4;
  const SeparationModel trained = train_all(corpus, refs, cfg);

  SeparationModel untrained;
  untrained.stft = cfg.stft;
  for (Target t : kAllTargets)
    untrained.per_target[static_cast<int>(t)] =
        init_params(t, cfg.dims, derive_seed(4, static_cast<int>(t)));

  const auto eval_set = tiny_corpus(3, 908);
  double trained_mean = 0.0, untrained_mean = 0.0;
  for (const StemSet& s : eval_set) {
    const auto est_t = separate(trained, s.mixture);
    const auto est_u = separate(untrained, s.mixture);
    for (Target t : kAllTargets) {
      trained_mean += sdr(s.stem(t), est_t[static_cast<int>(t)]);
      untrained_mean += sdr(s.stem(t), est_u[static_cast<int>(t)]);
    }
  }
  CHECK(trained_mean > untrained_mean);
}

TEST_CASE("training rejects bad configs") {
  const auto corpus = tiny_corpus(2, 909);
  const FramePool pool = tiny_pool(corpus);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train_target(pool, pool, Target::kVocals, cfg), ConfigError);
  cfg.epochs = 1;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(train_target(pool, pool, Target::kVocals, cfg), ConfigError);
}

TEST_CASE("a saturated mask reconstructs the mixture through separate") {
  const auto corpus = tiny_corpus(1, 910);
  SeparationModel model;
  model.stft = StftConfig{};
  for (Target t : kAllTargets) {
    ModelParams p;
    p.target = t;
    p.dims = ModelDims{};
    p.theta.assign(p.dims.param_count(), 0.0);
    // b2 = +40 drives the sigmoid to 1 - 4e-18: an all-pass mask.
    for (std::size_t k = 0; k < p.dims.bins; ++k)
      p.theta[p.dims.b2_off() + k] = 40.0;
    model.per_target[static_cast<int>(t)] = p;
  }
  const Waveform& mix = corpus[0].mixture;
  const auto estimates = separate(model, mix);
  for (const auto& est : estimates) {
    REQUIRE(est.samples.size() == mix.samples.size());
    CHECK(testutil::rel_l2_dist(est.samples, mix.samples) <= 1e-3);
  }
}

TEST_CASE("separate of silence is silence") {
  const auto corpus = tiny_corpus(1, 911);
  TrainConfig cfg;
  SeparationModel model;
  model.stft = cfg.stft;
  for (Target t : kAllTargets)
    model.per_target[static_cast<int>(t)] = init_params(t, cfg.dims, 5);
  Waveform zero;
  zero.sample_rate = 8000;
  zero.samples.assign(16000, 0.0);
  const auto estimates = separate(model, zero);
  for (const auto& est : estimates) {
    REQUIRE(est.samples.size() == zero.samples.size());
    for (double v : est.samples) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  const auto corpus = tiny_corpus(2, 912);
  const auto refs = tiny_corpus(2, 913);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 5;
  const SeparationModel model = train_all(corpus, refs, cfg);

  const auto dir = std::filesystem::temp_directory_path() / "attriclean_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(model, dir);
  const SeparationModel back = load_checkpoint(dir);
  CHECK(back.stft.window == model.stft.window);
  for (int t = 0; t < kNumTargets; ++t)
    CHECK(back.per_target[t].theta == model.per_target[t].theta);
  CHECK(params_checksum(back) == params_checksum(model));
  std::filesystem::remove_all(dir);
}
