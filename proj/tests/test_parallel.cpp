#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "attriclean/parallel.h"
#include "attriclean/serial_ref.h"
#include "test_util.h"

using namespace attriclean;

namespace {

struct Workload {
  std::vector<StemSet> corpus = build_clean_set(6, 2.0, 9000, 8000, "song");
  std::vector<StemSet> refs = build_clean_set(3, 2.0, 9100, 8000, "ref");
  StftConfig stft;
  FramePool pool = build_frame_pool(corpus, Target::kVocals, stft);
  ModelParams params = init_params(Target::kVocals, ModelDims{}, 50);
};

// Toggle the OpenMP kernels off, run, restore.
template <class Fn>
auto run_disabled(Fn&& fn) {
  const bool was = par::enabled();
  par::set_enabled(false);
  auto out = fn();
  par::set_enabled(was);
  return out;
}

}  // namespace

TEST_CASE("block partition covers the range and ignores thread count") {
  for (std::size_t n : {1u, 5u, 31u, 32u, 33u, 1000u}) {
    const std::size_t blocks = par::block_count(n);
    std::size_t covered = 0;
    std::size_t prev_end = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
      const auto [lo, hi] = par::block_range(n, blocks, b);
      CHECK(lo == prev_end);
      covered += hi - lo;
      prev_end = hi;
    }
    CHECK(covered == n);
  }
}

TEST_CASE("stft kernel is bit-identical with OpenMP on and off") {
  Workload w;
  const Spectrogram on = stft_magnitude(w.corpus[0].mixture, 256, 128);
  const Spectrogram off = run_disabled(
      [&] { return stft_magnitude(w.corpus[0].mixture, 256, 128); });
  CHECK(on.mag == off.mag);
}

TEST_CASE("stft kernel matches the serial reference bit for bit") {
  Workload w;
  const Spectrogram omp = stft_magnitude(w.corpus[0].mixture, 256, 128);
  const Spectrogram ref =
      serial::stft_magnitude(w.corpus[0].mixture, 256, 128);
  CHECK(omp.mag == ref.mag);
}

TEST_CASE("log-mel kernel matches the serial reference bit for bit") {
  Workload w;
  const Spectrogram s = stft_magnitude(w.corpus[0].mixture, 256, 128);
  const MelFilterbank fb = MelFilterbank::build(20, 30.0, 3800.0, 8000, 256);
  CHECK(log_mel_embed(s, fb).data == serial::log_mel_embed(s, fb).data);
}

TEST_CASE("batch gradient is invariant to the OpenMP switch") {
  Workload w;
  std::vector<std::size_t> rows(200);
  Rng rng(4);
  for (auto& r : rows) r = rng.below(w.pool.total_frames());
  std::vector<double> g_on, g_off;
  const double l_on = batch_gradient(w.params, w.pool, rows, g_on);
  const double l_off = run_disabled(
      [&] {
        std::vector<double> g;
        const double l = batch_gradient(w.params, w.pool, rows, g);
        g_off = g;
        return l;
      });
  CHECK(l_on == l_off);
  CHECK(g_on == g_off);  // fixed block partition makes this exact
}

TEST_CASE("batch gradient agrees with the serial reference numerically") {
  Workload w;
  std::vector<std::size_t> rows(200);
  Rng rng(4);
  for (auto& r : rows) r = rng.below(w.pool.total_frames());
  std::vector<double> g_omp, g_ref;
  const double l_omp = batch_gradient(w.params, w.pool, rows, g_omp);
  const double l_ref = serial::batch_gradient(w.params, w.pool, rows, g_ref);
  CHECK(l_omp == doctest::Approx(l_ref).epsilon(1e-12));
  double max_rel = 0.0;
  for (std::size_t i = 0; i < g_omp.size(); ++i) {
    const double denom = std::max(std::abs(g_ref[i]), 1e-12);
    max_rel = std::max(max_rel, std::abs(g_omp[i] - g_ref[i]) / denom);
  }
  CHECK(max_rel <= 1e-9);

  // For batches not bigger than the block budget the partition is one frame
  // per block, which reproduces the serial summation order exactly.
  std::vector<std::size_t> small(rows.begin(), rows.begin() + 32);
  std::vector<double> gs, go;
  batch_gradient(w.params, w.pool, small, go);
  serial::batch_gradient(w.params, w.pool, small, gs);
  CHECK(go == gs);
}

TEST_CASE("corpus losses and fisher match their serial references") {
  Workload w;
  const auto losses_omp = corpus_losses(w.params, w.pool);
  const auto losses_ref = serial::corpus_losses(w.params, w.pool);
  CHECK(losses_omp == losses_ref);  // per-song outputs, no cross-song reduction

  const FisherDiagonal f_omp = fisher_diagonal(w.params, w.pool);
  const FisherDiagonal f_ref = serial::fisher_diagonal(w.params, w.pool);
  CHECK(f_omp.floor_used == doctest::Approx(f_ref.floor_used).epsilon(1e-12));
  double max_rel = 0.0;
  for (std::size_t i = 0; i < f_omp.values.size(); ++i) {
    const double denom = std::max(f_ref.values[i], 1e-300);
    max_rel = std::max(max_rel, std::abs(f_omp.values[i] - f_ref.values[i]) / denom);
  }
  CHECK(max_rel <= 1e-9);

  const FisherDiagonal f_off =
      run_disabled([&] { return fisher_diagonal(w.params, w.pool); });
  CHECK(f_omp.values == f_off.values);  // switch-invariance is exact
}

TEST_CASE("per-song FAD scores match the serial reference bit for bit") {
  Workload w;
  EmbedConfig cfg;
  const GaussianStats ref = reference_stats(w.refs, cfg);
  const auto omp_scores = per_song_fad_scores(w.corpus, ref, cfg);
  const auto ref_scores = serial::per_song_fad_scores(w.corpus, ref, cfg);
  REQUIRE(omp_scores.size() == ref_scores.size());
  for (std::size_t i = 0; i < omp_scores.size(); ++i) {
    CHECK(omp_scores[i].id == ref_scores[i].id);
    CHECK(omp_scores[i].score == ref_scores[i].score);
  }
}

TEST_CASE("corpus synthesis is invariant to the OpenMP switch") {
  CorpusSpec spec;
  spec.n_clean = 3;
  spec.n_label_noise = 2;
  spec.n_bleeding = 2;
  spec.n_effects = 3;
  spec.song_length_s = 1.0;
  spec.master_seed = 777;
  const auto on = build_corpus(spec);
  const auto off = run_disabled([&] { return build_corpus(spec); });
  REQUIRE(on.size() == off.size());
  for (std::size_t i = 0; i < on.size(); ++i) {
    CHECK(on[i].id == off[i].id);
    CHECK(on[i].corruption.tag() == off[i].corruption.tag());
    CHECK(on[i].mixture.samples == off[i].mixture.samples);
  }
}
