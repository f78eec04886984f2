#include "attriclean/attribution.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "attriclean/parallel.h"

namespace attriclean {

void UnlearnConfig::validate() const {
  if (alpha.has_value() && *alpha < 0.0)
    throw ConfigError("alpha must be >= 0");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (n_train < 1) throw ConfigError("N must be >= 1");
  if (target_rel_step <= 0.0)
    throw ConfigError("target_rel_step must be > 0");
}

FisherDiagonal fisher_diagonal(const ModelParams& p, const FramePool& pool,
                               const FisherOptions& opt) {
  const std::size_t P = p.dims.param_count();
  const std::size_t n = pool.num_songs();
  if (n == 0) throw ConfigError("fisher_diagonal: empty pool");

  // Per-song gradients squared, accumulated over a fixed block partition so
  // the result is bit-identical at any thread count.
  const std::size_t blocks = par::block_count(n);
  std::vector<std::vector<double>> partial(blocks);
  par::parallel_for(blocks, [&](std::size_t b) {
    auto [lo, hi] = par::block_range(n, blocks, b);
    partial[b].assign(P, 0.0);
    std::vector<double> grad;
    for (std::size_t i = lo; i < hi; ++i) {
      song_gradient(p, pool, i, grad);
      double* acc = partial[b].data();
      for (std::size_t k = 0; k < P; ++k) acc[k] += grad[k] * grad[k];
    }
  });

  FisherDiagonal f;
  f.target = p.target;
  f.n_samples = n;
  f.values.assign(P, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t k = 0; k < P; ++k) f.values[k] += partial[b][k];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  double max_entry = 0.0;
  for (double& v : f.values) {
    v *= inv_n;
    max_entry = std::max(max_entry, v);
  }
  f.floor_used = std::max(opt.rel_floor * max_entry, opt.abs_floor);
  for (double& v : f.values) v = std::max(v, f.floor_used);
  return f;
}

ModelParams unlearn(const ModelParams& p, const FisherDiagonal& fisher,
                    const FramePool& ref_pool, std::size_t ref_index,
                    const UnlearnConfig& cfg,
                    std::uint64_t* invocation_counter) {
  cfg.validate();
  if (fisher.values.size() != p.dims.param_count())
    throw ConfigError("fisher dimension does not match model");
  if (invocation_counter != nullptr) ++(*invocation_counter);

  ModelParams out = p;
  std::vector<double> grad;
  double alpha = cfg.alpha.value_or(0.0);
  const double scale_n = 1.0 / static_cast<double>(cfg.n_train);

  for (int step = 0; step < cfg.steps; ++step) {
    if (cfg.alpha.has_value() && alpha == 0.0) break;  // explicit no-op
    song_gradient(out, ref_pool, ref_index, grad);
    if (step == 0 && !cfg.alpha.has_value()) {
      // Adaptive alpha: first step moves theta by target_rel_step * ||theta||.
      double step_norm2 = 0.0, theta_norm2 = 0.0;
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double d = scale_n * (grad[i] / fisher.values[i]);
        step_norm2 += d * d;
        theta_norm2 += out.theta[i] * out.theta[i];
      }
      alpha = step_norm2 > 0.0
                  ? cfg.target_rel_step * std::sqrt(theta_norm2 / step_norm2)
                  : 0.0;
    }
    const double scale = alpha * scale_n;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      out.theta[i] += scale * (grad[i] / fisher.values[i]);
    }
  }
  for (double v : out.theta) {
    if (!std::isfinite(v)) throw StageError("unlearning diverged");
  }
  return out;
}

ModelParams naive_unlearn(const ModelParams& p, const FramePool& ref_pool,
                          std::size_t ref_index, double alpha, int steps) {
  ModelParams out = p;
  std::vector<double> grad;
  for (int step = 0; step < steps; ++step) {
    song_gradient(out, ref_pool, ref_index, grad);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      out.theta[i] += alpha * grad[i];
    }
  }
  for (double v : out.theta) {
    if (!std::isfinite(v)) throw StageError("unlearning diverged");
  }
  return out;
}

AttributionMatrix attribution_matrix(const SeparationModel& baseline,
                                     const std::vector<StemSet>& corpus,
                                     const std::vector<StemSet>& refs,
                                     const UnlearnConfig& cfg) {
  cfg.validate();
  if (corpus.empty() || refs.empty())
    throw ConfigError("attribution needs a corpus and a reference set");

  AttributionMatrix a;
  a.n_train = corpus.size();
  a.n_refs = refs.size();
  for (const StemSet& s : corpus) a.train_ids.push_back(s.id);
  for (const StemSet& s : refs) a.ref_ids.push_back(s.id);
  a.delta.assign(a.n_train * a.n_refs * kNumTargets, 0.0);
  a.baseline.assign(a.n_train * kNumTargets, 0.0);
  a.baseline_checksum = params_checksum(baseline);

  std::atomic<std::uint64_t> runs{0};
  auto corpus_mix = build_mix_frames(corpus, baseline.stft);
  auto refs_mix = build_mix_frames(refs, baseline.stft);

  for (Target target : kAllTargets) {
    const int t = static_cast<int>(target);
    const ModelParams& theta = baseline.per_target[t];
    const FramePool pool = build_frame_pool(corpus, target, baseline.stft, corpus_mix);
    const FramePool ref_pool = build_frame_pool(refs, target, baseline.stft, refs_mix);
    const FisherDiagonal fisher = fisher_diagonal(theta, pool, cfg.fisher);

    const std::vector<double> base = corpus_losses(theta, pool);
    for (std::size_t i = 0; i < a.n_train; ++i)
      a.baseline[i * kNumTargets + t] = base[i];

    // One unlearned model per reference; each task owns its matrix column.
    std::vector<std::string> failure(a.n_refs);
    par::parallel_for(a.n_refs, [&](std::size_t j) {
      try {
        std::uint64_t local_runs = 0;
        const ModelParams theta_j =
            unlearn(theta, fisher, ref_pool, j, cfg, &local_runs);
        runs.fetch_add(local_runs, std::memory_order_relaxed);
        for (std::size_t i = 0; i < a.n_train; ++i) {
          const double lp = pool_song_loss(theta_j, pool, i);
          a.at(i, j, static_cast<std::size_t>(t)) = lp - base[i];
        }
      } catch (const std::exception& e) {
        failure[j] = e.what();
      }
    });
    for (std::size_t j = 0; j < a.n_refs; ++j) {
      if (!failure[j].empty())
        throw StageError("attribution failed for ref " + a.ref_ids[j] +
                         ", target " + target_name(target) + ": " + failure[j]);
    }
  }
  a.unlearn_runs = runs.load();
  return a;
}

std::vector<double> aggregate_unified(const AttributionMatrix& a) {
  if (a.n_refs == 0) throw ConfigError("attribution matrix has no references");
  std::vector<double> scores(a.n_train, 0.0);
  const double inv = 1.0 / static_cast<double>(a.n_refs * kNumTargets);
  for (std::size_t i = 0; i < a.n_train; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.n_refs; ++j)
      for (std::size_t t = 0; t < kNumTargets; ++t) acc += a.at(i, j, t);
    scores[i] = acc * inv;
  }
  return scores;
}

std::vector<double> aggregate_per_target(const AttributionMatrix& a, Target t) {
  if (a.n_refs == 0) throw ConfigError("no references for target");
  std::vector<double> scores(a.n_train, 0.0);
  const double inv = 1.0 / static_cast<double>(a.n_refs);
  const std::size_t ti = static_cast<std::size_t>(t);
  for (std::size_t i = 0; i < a.n_train; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.n_refs; ++j) acc += a.at(i, j, ti);
    scores[i] = acc * inv;
  }
  return scores;
}

std::size_t retained_count(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw ConfigError("retention ratio must be in (0, 1]");
  const auto k = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(n) - 1e-9));
  return std::min(std::max<std::size_t>(k, 1), n);
}

std::vector<std::string> filter_ranked(const std::vector<std::string>& ids,
                                       const std::vector<double>& scores,
                                       double ratio, RankOrder order) {
  if (ids.size() != scores.size())
    throw ConfigError("filter_ranked: ids/scores size mismatch");
  for (double s : scores) {
    if (!std::isfinite(s)) throw ConfigError("filter_ranked: non-finite score");
  }
  const std::size_t keep = retained_count(ids.size(), ratio);

  std::vector<std::size_t> idx(ids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) {
      return order == RankOrder::kHighIsGood ? scores[a] > scores[b]
                                             : scores[a] < scores[b];
    }
    return ids[a] < ids[b];
  });

  std::vector<std::string> retained;
  retained.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) retained.push_back(ids[idx[r]]);
  std::sort(retained.begin(), retained.end());
  return retained;
}

namespace {
constexpr char kAttrMagic[8] = {'A', 'T', 'C', 'L', 'A', 'T', 'R', '1'};

void write_id_list(std::ofstream& out, const std::vector<std::string>& ids) {
  for (const std::string& id : ids) {
    const std::uint32_t len = static_cast<std::uint32_t>(id.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(id.data(), len);
  }
}

std::vector<std::string> read_id_list(std::ifstream& in, std::size_t count) {
  std::vector<std::string> ids(count);
  for (std::string& id : ids) {
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    id.resize(len);
    in.read(id.data(), len);
  }
  return ids;
}
}  // namespace

void save_attribution(const AttributionMatrix& a,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError("cannot write: " + path.string());
  out.write(kAttrMagic, 8);
  const std::uint64_t n = a.n_train, m = a.n_refs, t = kNumTargets;
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&m), sizeof(m));
  out.write(reinterpret_cast<const char*>(&t), sizeof(t));
  out.write(reinterpret_cast<const char*>(&a.baseline_checksum),
            sizeof(a.baseline_checksum));
  write_id_list(out, a.train_ids);
  write_id_list(out, a.ref_ids);
  out.write(reinterpret_cast<const char*>(a.baseline.data()),
            static_cast<std::streamsize>(a.baseline.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(a.delta.data()),
            static_cast<std::streamsize>(a.delta.size() * sizeof(double)));
  if (!out) throw StageError("write failed: " + path.string());
}

AttributionMatrix load_attribution(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("cannot open: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (std::memcmp(magic, kAttrMagic, 8) != 0)
    throw StageError("bad attribution file magic: " + path.string());
  AttributionMatrix a;
  std::uint64_t n = 0, m = 0, t = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&m), sizeof(m));
  in.read(reinterpret_cast<char*>(&t), sizeof(t));
  in.read(reinterpret_cast<char*>(&a.baseline_checksum),
          sizeof(a.baseline_checksum));
  if (t != kNumTargets)
    throw StageError("attribution file target count mismatch");
  a.n_train = n;
  a.n_refs = m;
  a.train_ids = read_id_list(in, n);
  a.ref_ids = read_id_list(in, m);
  a.baseline.resize(n * kNumTargets);
  a.delta.resize(n * m * kNumTargets);
  in.read(reinterpret_cast<char*>(a.baseline.data()),
          static_cast<std::streamsize>(a.baseline.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(a.delta.data()),
          static_cast<std::streamsize>(a.delta.size() * sizeof(double)));
  if (!in) throw StageError("truncated attribution file: " + path.string());
  return a;
}

}  // namespace attriclean
