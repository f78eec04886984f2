// Benchmark of the OpenMP kernels against their serial reference
// implementations. Prints per-kernel wall time, speedup, and the maximum
// absolute difference between both paths (expected 0 for map-style kernels,
// ~1e-15 relative for the block reductions).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "attriclean/parallel.h"
#include "attriclean/rng.h"
#include "attriclean/serial_ref.h"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ac = attriclean;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const double t0 = now_s();
    fn();
    best = std::min(best, now_s() - t0);
  }
  return best;
}

void report(const char* name, double serial_s, double omp_s, double max_diff) {
  std::printf("%-24s serial %9.4f s   omp %9.4f s   speedup %5.2fx   max|diff| %.3e\n",
              name, serial_s, omp_s, serial_s / omp_s, max_diff);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both columns run serial code\n");
#endif

  const int kReps = 3;
  ac::CorpusSpec spec;
  spec.n_clean = 24;
  spec.song_length_s = 4.0;
  spec.master_seed = 4242;
  const auto corpus = ac::build_corpus(spec);
  const auto refs = ac::build_clean_set(6, 4.0, 777, spec.sample_rate, "ref");
  const ac::StftConfig stft;

  // stft over the whole corpus
  {
    ac::Spectrogram out_serial, out_omp;
    const double ts = time_best_of(kReps, [&] {
      for (const auto& s : corpus)
        out_serial = ac::serial::stft_magnitude(s.mixture, stft.window, stft.hop);
    });
    const double to = time_best_of(kReps, [&] {
      for (const auto& s : corpus)
        out_omp = ac::stft_magnitude(s.mixture, stft.window, stft.hop);
    });
    report("stft_magnitude", ts, to, max_abs_diff(out_serial.mag, out_omp.mag));
  }

  // log-mel embedding
  {
    const auto spec_mag = ac::stft_magnitude(corpus[0].mixture, stft.window, stft.hop);
    const auto fb = ac::MelFilterbank::build(20, 30.0, 3800.0, spec.sample_rate,
                                             stft.window);
    ac::EmbeddingSequence es, eo;
    const double ts = time_best_of(kReps, [&] {
      for (int i = 0; i < 40; ++i) es = ac::serial::log_mel_embed(spec_mag, fb);
    });
    const double to = time_best_of(kReps, [&] {
      for (int i = 0; i < 40; ++i) eo = ac::log_mel_embed(spec_mag, fb);
    });
    report("log_mel_embed", ts, to, max_abs_diff(es.data, eo.data));
  }

  const ac::FramePool pool =
      ac::build_frame_pool(corpus, ac::Target::kVocals, stft);
  const ac::ModelParams params =
      ac::init_params(ac::Target::kVocals, ac::ModelDims{}, 99);

  // batch gradient
  {
    std::vector<std::size_t> rows(2048);
    ac::Rng rng(5);
    for (auto& r : rows) r = rng.below(pool.total_frames());
    std::vector<double> gs, go;
    const double ts = time_best_of(
        kReps, [&] { ac::serial::batch_gradient(params, pool, rows, gs); });
    const double to =
        time_best_of(kReps, [&] { ac::batch_gradient(params, pool, rows, go); });
    report("batch_gradient", ts, to, max_abs_diff(gs, go));
  }

  // corpus losses
  {
    std::vector<double> ls, lo;
    const double ts = time_best_of(
        kReps, [&] { ls = ac::serial::corpus_losses(params, pool); });
    const double to =
        time_best_of(kReps, [&] { lo = ac::corpus_losses(params, pool); });
    report("corpus_losses", ts, to, max_abs_diff(ls, lo));
  }

  // fisher diagonal
  {
    ac::FisherDiagonal fs, fo;
    const double ts = time_best_of(
        kReps, [&] { fs = ac::serial::fisher_diagonal(params, pool); });
    const double to =
        time_best_of(kReps, [&] { fo = ac::fisher_diagonal(params, pool); });
    report("fisher_diagonal", ts, to, max_abs_diff(fs.values, fo.values));
  }

  // per-song FAD scores
  {
    ac::EmbedConfig ecfg;
    const auto ref_stats = ac::reference_stats(refs, ecfg);
    std::vector<ac::FadScore> ss, so;
    const double ts = time_best_of(kReps, [&] {
      ss = ac::serial::per_song_fad_scores(corpus, ref_stats, ecfg);
    });
    const double to = time_best_of(
        kReps, [&] { so = ac::per_song_fad_scores(corpus, ref_stats, ecfg); });
    double d = 0.0;
    for (std::size_t i = 0; i < ss.size(); ++i)
      d = std::max(d, std::abs(ss[i].score - so[i].score));
    report("per_song_fad_scores", ts, to, d);
  }

  return 0;
}
