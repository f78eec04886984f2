#include "attriclean/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "attriclean/parallel.h"
#include "attriclean/rng.h"

namespace attriclean {

namespace fs = std::filesystem;
using nlohmann::json;

Method method_from_name(const std::string& name) {
  if (name == "none") return Method::kNone;
  if (name == "unlearn_unified") return Method::kUnlearnUnified;
  if (name == "unlearn_per_target") return Method::kUnlearnPerTarget;
  if (name == "fad") return Method::kFad;
  if (name == "cls") return Method::kCls;
  throw ConfigError("unknown method: " + name);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kNone: return "none";
    case Method::kUnlearnUnified: return "unlearn_unified";
    case Method::kUnlearnPerTarget: return "unlearn_per_target";
    case Method::kFad: return "fad";
    case Method::kCls: return "cls";
  }
  return "?";
}

void PipelineConfig::validate() const {
  corpus.validate();
  if (refs.count < 1) throw ConfigError("refs.count must be >= 1");
  if (eval.count < 1) throw ConfigError("eval.count must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (method != Method::kNone && ratios.empty())
    throw ConfigError("ratios must be non-empty for a cleaning method");
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0))
      throw ConfigError("ratios must lie in (0, 1]");
  }
  unlearn.validate();
}

json PipelineConfig::to_json() const {
  json j;
  j["corpus"] = {{"n_clean", corpus.n_clean},
                 {"n_label_noise", corpus.n_label_noise},
                 {"n_bleeding", corpus.n_bleeding},
                 {"n_effects", corpus.n_effects},
                 {"song_length_s", corpus.song_length_s},
                 {"sample_rate", corpus.sample_rate},
                 {"master_seed", corpus.master_seed}};
  j["refs"] = {{"count", refs.count},
               {"song_length_s", refs.song_length_s},
               {"seed", refs.seed}};
  j["eval"] = {{"count", eval.count},
               {"song_length_s", eval.song_length_s},
               {"seed", eval.seed}};
  j["method"] = method_name(method);
  j["ratios"] = ratios;
  j["seeds"] = seeds;
  j["train"] = {{"epochs", train.epochs},
                {"steps_per_epoch", train.steps_per_epoch},
                {"batch", train.batch},
                {"learning_rate", train.learning_rate},
                {"hidden", train.dims.hidden},
                {"window", train.stft.window},
                {"hop", train.stft.hop}};
  j["unlearn"] = {{"target_rel_step", unlearn.target_rel_step},
                  {"steps", unlearn.steps}};
  if (unlearn.alpha.has_value()) j["unlearn"]["alpha"] = *unlearn.alpha;
  j["embed"] = {{"n_mels", embed.n_mels},
                {"f_min", embed.f_min},
                {"f_max", embed.f_max}};
  j["cls"] = {{"hidden", cls.hidden},
              {"dropout", cls.dropout},
              {"epochs", cls.epochs},
              {"steps_per_epoch", cls.steps_per_epoch},
              {"batch", cls.batch},
              {"learning_rate", cls.learning_rate}};
  j["out_dir"] = out_dir.string();
  return j;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig cfg;
  if (j.contains("corpus")) {
    const json& c = j.at("corpus");
    cfg.corpus.n_clean = c.value("n_clean", 0);
    cfg.corpus.n_label_noise = c.value("n_label_noise", 0);
    cfg.corpus.n_bleeding = c.value("n_bleeding", 0);
    cfg.corpus.n_effects = c.value("n_effects", 0);
    cfg.corpus.song_length_s = c.value("song_length_s", 6.0);
    cfg.corpus.sample_rate = c.value("sample_rate", 8000);
    cfg.corpus.master_seed = c.value("master_seed", 0ULL);
  }
  auto read_set = [](const json& s, CleanSetSpec& out) {
    out.count = s.value("count", out.count);
    out.song_length_s = s.value("song_length_s", out.song_length_s);
    out.seed = s.value("seed", out.seed);
  };
  if (j.contains("refs")) read_set(j.at("refs"), cfg.refs);
  if (j.contains("eval")) read_set(j.at("eval"), cfg.eval);
  cfg.method = method_from_name(j.value("method", "unlearn_unified"));
  cfg.ratios = j.value("ratios", std::vector<double>{});
  cfg.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  if (j.contains("train")) {
    const json& t = j.at("train");
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.steps_per_epoch =
        t.value("steps_per_epoch", cfg.train.steps_per_epoch);
    cfg.train.batch = t.value("batch", cfg.train.batch);
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.dims.hidden = t.value("hidden", cfg.train.dims.hidden);
    cfg.train.stft.window = t.value("window", cfg.train.stft.window);
    cfg.train.stft.hop = t.value("hop", cfg.train.stft.hop);
  }
  cfg.train.dims.bins = static_cast<std::size_t>(cfg.train.stft.window) / 2 + 1;
  if (j.contains("unlearn")) {
    const json& u = j.at("unlearn");
    if (u.contains("alpha") && !u.at("alpha").is_null())
      cfg.unlearn.alpha = u.at("alpha").get<double>();
    cfg.unlearn.target_rel_step =
        u.value("target_rel_step", cfg.unlearn.target_rel_step);
    cfg.unlearn.steps = u.value("steps", cfg.unlearn.steps);
  }
  if (j.contains("embed")) {
    const json& e = j.at("embed");
    cfg.embed.n_mels = e.value("n_mels", cfg.embed.n_mels);
    cfg.embed.f_min = e.value("f_min", cfg.embed.f_min);
    cfg.embed.f_max = e.value("f_max", cfg.embed.f_max);
  }
  cfg.embed.stft = cfg.train.stft;
  if (j.contains("cls")) {
    const json& c = j.at("cls");
    cfg.cls.hidden = c.value("hidden", cfg.cls.hidden);
    cfg.cls.dropout = c.value("dropout", cfg.cls.dropout);
    cfg.cls.epochs = c.value("epochs", cfg.cls.epochs);
    cfg.cls.steps_per_epoch =
        c.value("steps_per_epoch", cfg.cls.steps_per_epoch);
    cfg.cls.batch = c.value("batch", cfg.cls.batch);
    cfg.cls.learning_rate = c.value("learning_rate", cfg.cls.learning_rate);
  }
  cfg.cls.embed = cfg.embed;
  cfg.out_dir = j.value("out_dir", std::string{});
  return cfg;
}

PipelineConfig PipelineConfig::from_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("bad config json: " + std::string(e.what()));
  }
  return from_json(j);
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string hash_hex(const std::string& payload) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : payload) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

bool key_matches(const fs::path& key_file, const std::string& key) {
  std::ifstream in(key_file);
  if (!in) return false;
  std::string stored;
  std::getline(in, stored);
  return stored == key;
}

void write_key(const fs::path& key_file, const std::string& key) {
  std::ofstream out(key_file);
  out << key << "\n";
}

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double lap() {
    const auto t1 = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(t1 - t0).count();
    t0 = t1;
    return s;
  }
};

double clean_fraction(const Ledger& ledger,
                      const std::vector<std::string>& ids) {
  if (ids.empty()) return 0.0;
  std::size_t clean = 0;
  for (const std::string& id : ids) {
    const auto it = ledger.find(id);
    if (it != ledger.end() && it->second == "clean") ++clean;
  }
  return static_cast<double>(clean) / static_cast<double>(ids.size());
}

std::string ratio_label(double r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", r);
  return buf;
}

}  // namespace

SdrSummary evaluate_sdr(const SeparationModel& model,
                        const std::vector<StemSet>& eval_set) {
  if (eval_set.empty()) throw ConfigError("evaluate_sdr: empty eval set");
  std::vector<std::array<double, kNumTargets>> per_song(eval_set.size());
  par::parallel_for(eval_set.size(), [&](std::size_t i) {
    const auto estimates = separate(model, eval_set[i].mixture);
    for (Target t : kAllTargets) {
      per_song[i][static_cast<int>(t)] =
          sdr(eval_set[i].stem(t), estimates[static_cast<int>(t)]);
    }
  });
  SdrSummary s;
  double acc = 0.0;
  for (int t = 0; t < kNumTargets; ++t) {
    std::vector<double> vals(eval_set.size());
    for (std::size_t i = 0; i < eval_set.size(); ++i) vals[i] = per_song[i][t];
    s.median[t] = median(std::move(vals));
    acc += s.median[t];
  }
  s.mean = acc / kNumTargets;
  return s;
}

namespace {

// Per-method scoring output: either one unified column or one per target.
struct MethodScores {
  std::vector<std::string> ids;
  std::vector<double> unified;
  std::array<std::vector<double>, kNumTargets> per_target;
  bool is_per_target = false;
  RankOrder order = RankOrder::kHighIsGood;
};

MethodScores score_corpus(const PipelineConfig& cfg, Method method,
                          const SeparationModel& baseline,
                          const std::vector<StemSet>& corpus,
                          const std::vector<StemSet>& refs,
                          std::uint64_t run_seed) {
  MethodScores out;
  for (const StemSet& s : corpus) out.ids.push_back(s.id);
  switch (method) {
    case Method::kNone:
      throw ConfigError("method none has no scoring stage");
    case Method::kUnlearnUnified:
    case Method::kUnlearnPerTarget: {
      UnlearnConfig uc = cfg.unlearn;
      uc.n_train = corpus.size();
      const AttributionMatrix a =
          attribution_matrix(baseline, corpus, refs, uc);
      out.ids = a.train_ids;
      if (method == Method::kUnlearnUnified) {
        out.unified = aggregate_unified(a);
      } else {
        out.is_per_target = true;
        for (Target t : kAllTargets)
          out.per_target[static_cast<int>(t)] = aggregate_per_target(a, t);
      }
      out.order = RankOrder::kHighIsGood;
      break;
    }
    case Method::kFad: {
      const GaussianStats ref = reference_stats(refs, cfg.embed);
      const auto scores = per_song_fad_scores(corpus, ref, cfg.embed);
      for (const FadScore& s : scores) out.unified.push_back(s.score);
      out.order = RankOrder::kLowIsGood;
      break;
    }
    case Method::kCls: {
      ClassifierConfig cc = cfg.cls;
      cc.embed = cfg.embed;
      cc.seed = derive_seed(run_seed, "cls");
      const ClassifierParams c = train_classifier(refs, cc);
      // Ratio 1 keeps everything; only the scores matter here.
      const ClsFilterResult r = cls_filter(corpus, c, 1.0);
      out.ids = r.ids;
      out.unified = r.song_scores;
      out.order = RankOrder::kHighIsGood;
      break;
    }
  }
  return out;
}

RetainedSets make_retained(const MethodScores& scores, double ratio) {
  RetainedSets r;
  r.ratio = ratio;
  if (!scores.is_per_target) {
    r.mode = "unified";
    r.sets["unified"] =
        filter_ranked(scores.ids, scores.unified, ratio, scores.order);
  } else {
    r.mode = "per_target";
    std::set<std::string> uni;
    for (Target t : kAllTargets) {
      auto set = filter_ranked(scores.ids, scores.per_target[static_cast<int>(t)],
                               ratio, scores.order);
      uni.insert(set.begin(), set.end());
      r.sets[target_name(t)] = std::move(set);
    }
    r.sets["union"] = std::vector<std::string>(uni.begin(), uni.end());
  }
  return r;
}

SeparationModel retrain_on_retained(const std::vector<StemSet>& corpus,
                                    const std::vector<StemSet>& refs,
                                    const RetainedSets& retained,
                                    const TrainConfig& tc) {
  if (retained.mode == "unified") {
    return train_all(subset_by_ids(corpus, retained.sets.at("unified")), refs,
                     tc);
  }
  // Per-target mode: each target model trains on its own cleaned set.
  SeparationModel model;
  model.stft = tc.stft;
  auto refs_mix = build_mix_frames(refs, tc.stft);
  for (Target t : kAllTargets) {
    const auto subset =
        subset_by_ids(corpus, retained.sets.at(target_name(t)));
    const FramePool train_pool = build_frame_pool(subset, t, tc.stft);
    const FramePool val_pool = build_frame_pool(refs, t, tc.stft, refs_mix);
    model.per_target[static_cast<int>(t)] =
        train_target(train_pool, val_pool, t, tc).params;
  }
  return model;
}

std::map<std::string, double> retained_fractions(const Ledger& ledger,
                                                 const RetainedSets& retained) {
  std::map<std::string, double> out;
  if (retained.mode == "unified") {
    out["unified"] = clean_fraction(ledger, retained.sets.at("unified"));
    return out;
  }
  double acc = 0.0;
  for (Target t : kAllTargets) {
    const double f = clean_fraction(ledger, retained.sets.at(target_name(t)));
    out[target_name(t)] = f;
    acc += f;
  }
  out["mean"] = acc / kNumTargets;
  out["union"] = clean_fraction(ledger, retained.sets.at("union"));
  return out;
}

}  // namespace

std::vector<StemSet> subset_by_ids(const std::vector<StemSet>& corpus,
                                   const std::vector<std::string>& ids) {
  const std::set<std::string> keep(ids.begin(), ids.end());
  std::vector<StemSet> out;
  out.reserve(ids.size());
  for (const StemSet& s : corpus) {
    if (keep.count(s.id) != 0) out.push_back(s);
  }
  if (out.size() != keep.size())
    throw StageError("retained ids not all present in corpus");
  return out;
}

CleaningReport run_pipeline(const PipelineConfig& cfg, StageTimings* timings) {
  cfg.validate();
  StageTimings local;
  StageTimings& tm = timings != nullptr ? *timings : local;
  Stopwatch sw;

  const std::vector<StemSet> corpus = build_corpus(cfg.corpus);
  const std::vector<StemSet> refs =
      build_clean_set(cfg.refs.count, cfg.refs.song_length_s, cfg.refs.seed,
                      cfg.corpus.sample_rate, "ref");
  const std::vector<StemSet> eval_set =
      build_clean_set(cfg.eval.count, cfg.eval.song_length_s, cfg.eval.seed,
                      cfg.corpus.sample_rate, "eval");
  const Ledger ledger = ledger_from_corpus(corpus);
  tm.add("synth", sw.lap());

  const bool persist = !cfg.out_dir.empty();
  if (persist) {
    fs::create_directories(cfg.out_dir);
    save_corpus(corpus, cfg.out_dir / "corpus");
    save_corpus(refs, cfg.out_dir / "refs");
    save_corpus(eval_set, cfg.out_dir / "eval");
    std::ofstream out(cfg.out_dir / "config.json");
    out << cfg.to_json().dump(2) << "\n";
    tm.add("persist_sets", sw.lap());
  }

  const std::string data_digest =
      hash_hex(std::to_string(corpus_digest(corpus)) + "/" +
               std::to_string(corpus_digest(refs)));

  CleaningReport report;
  report.n_corpus = corpus.size();
  report.method = method_name(cfg.method);

  std::vector<std::string> all_ids;
  for (const StemSet& s : corpus) all_ids.push_back(s.id);

  for (std::uint64_t seed : cfg.seeds) {
    const fs::path seed_dir =
        persist ? cfg.out_dir / "seeds" / ("seed_" + std::to_string(seed))
                : fs::path{};
    if (persist) fs::create_directories(seed_dir);

    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, "train");

    SeparationModel baseline;
    try {
      const std::string bkey = hash_hex(
          cfg.to_json()["train"].dump() + data_digest + std::to_string(seed));
      const fs::path ckpt_dir = seed_dir / "ckpt_baseline";
      if (persist && key_matches(seed_dir / "ckpt_baseline.key", bkey)) {
        baseline = load_checkpoint(ckpt_dir);
      } else {
        std::array<std::vector<EpochRecord>, kNumTargets> logs;
        baseline = train_all(corpus, refs, tc, &logs);
        if (persist) {
          save_checkpoint(baseline, ckpt_dir, &logs);
          write_key(seed_dir / "ckpt_baseline.key", bkey);
        }
      }
      tm.add("baseline_train seed=" + std::to_string(seed), sw.lap());
    } catch (const std::exception& e) {
      ReportRow row;
      row.method = "none";
      row.seed = seed;
      row.error = std::string("baseline training failed: ") + e.what();
      report.rows.push_back(row);
      for (double ratio : cfg.ratios) {
        ReportRow cell;
        cell.method = method_name(cfg.method);
        cell.ratio = ratio;
        cell.seed = seed;
        cell.error = "skipped: baseline training failed";
        if (cfg.method != Method::kNone) report.rows.push_back(cell);
      }
      continue;
    }

    {
      ReportRow row;
      row.method = "none";
      row.ratio = 1.0;
      row.seed = seed;
      row.retained_clean_fraction["all"] = clean_fraction(ledger, all_ids);
      row.sdr = evaluate_sdr(baseline, eval_set);
      report.rows.push_back(row);
      tm.add("baseline_eval seed=" + std::to_string(seed), sw.lap());
    }
    if (cfg.method == Method::kNone) continue;

    MethodScores scores;
    try {
      scores = score_corpus(cfg, cfg.method, baseline, corpus, refs, seed);
      if (persist) {
        const fs::path score_path =
            seed_dir / ("scores_" + std::string(method_name(cfg.method)) + ".tsv");
        if (scores.is_per_target) {
          save_scores(scores_from_per_target(method_name(cfg.method),
                                             scores.order, scores.ids,
                                             scores.per_target),
                      score_path);
        } else {
          save_scores(scores_from_unified(method_name(cfg.method), scores.order,
                                          scores.ids, scores.unified),
                      score_path);
        }
      }
      tm.add("scoring seed=" + std::to_string(seed), sw.lap());
    } catch (const std::exception& e) {
      for (double ratio : cfg.ratios) {
        ReportRow cell;
        cell.method = method_name(cfg.method);
        cell.ratio = ratio;
        cell.seed = seed;
        cell.error = std::string("scoring failed: ") + e.what();
        report.rows.push_back(cell);
      }
      continue;
    }

    for (double ratio : cfg.ratios) {
      ReportRow cell;
      cell.method = method_name(cfg.method);
      cell.ratio = ratio;
      cell.seed = seed;
      try {
        const RetainedSets retained = make_retained(scores, ratio);
        if (persist) {
          save_retained(retained,
                        seed_dir / ("retained_r" + ratio_label(ratio) + ".json"));
        }
        SeparationModel cleaned;
        const fs::path rdir = seed_dir / ("ckpt_r" + ratio_label(ratio));
        std::string rkey;
        if (persist) {
          std::string ids_cat;
          for (const auto& [name, set] : retained.sets) {
            ids_cat += name + ":";
            for (const std::string& id : set) ids_cat += id + ",";
          }
          rkey = hash_hex(cfg.to_json()["train"].dump() + data_digest +
                          std::to_string(seed) + ids_cat);
        }
        if (persist && key_matches(rdir.string() + ".key", rkey)) {
          cleaned = load_checkpoint(rdir);
        } else {
          cleaned = retrain_on_retained(corpus, refs, retained, tc);
          if (persist) {
            save_checkpoint(cleaned, rdir);
            write_key(rdir.string() + ".key", rkey);
          }
        }
        cell.retained = retained.sets;
        cell.retained_clean_fraction = retained_fractions(ledger, retained);
        cell.sdr = evaluate_sdr(cleaned, eval_set);
        tm.add("retrain_eval seed=" + std::to_string(seed) +
                   " r=" + ratio_label(ratio),
               sw.lap());
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      report.rows.push_back(cell);
    }
  }
  return report;
}

double gap_closed(double dirty, double cleaned, double clean_ub) {
  const double denom = clean_ub - dirty;
  if (denom == 0.0) throw ConfigError("gap_closed: zero denominator");
  return (cleaned - dirty) / denom;
}

double best_ratio(const CleaningReport& report) {
  std::map<double, std::pair<double, int>> by_ratio;  // ratio -> (sum, n)
  for (const ReportRow& row : report.rows) {
    if (row.method == "none" || !row.error.empty()) continue;
    auto& [sum, n] = by_ratio[row.ratio];
    sum += row.sdr.mean;
    n += 1;
  }
  if (by_ratio.empty()) throw ConfigError("best_ratio: empty report");
  double best = 0.0, best_sdr = -1e300;
  for (const auto& [ratio, acc] : by_ratio) {
    const double avg = acc.first / acc.second;
    if (avg >= best_sdr) {  // ties keep the larger ratio (map is ascending)
      best_sdr = avg;
      best = ratio;
    }
  }
  return best;
}

json CleaningReport::to_json() const {
  json j;
  j["n_corpus"] = n_corpus;
  j["method"] = method;
  json rows_j = json::array();
  for (const ReportRow& row : rows) {
    json r;
    r["method"] = row.method;
    r["ratio"] = row.ratio;
    r["seed"] = row.seed;
    json retained_j = json::object();
    for (const auto& [name, ids] : row.retained) retained_j[name] = ids;
    r["retained"] = retained_j;
    r["retained_clean_fraction"] = row.retained_clean_fraction;
    r["sdr"] = {{"vocals", row.sdr.median[0]},
                {"bass", row.sdr.median[1]},
                {"drums", row.sdr.median[2]},
                {"other", row.sdr.median[3]},
                {"mean", row.sdr.mean}};
    if (!row.error.empty()) r["error"] = row.error;
    rows_j.push_back(r);
  }
  j["rows"] = rows_j;
  return j;
}

CleaningReport CleaningReport::from_json(const json& j) {
  CleaningReport rep;
  rep.n_corpus = j.at("n_corpus").get<std::size_t>();
  rep.method = j.at("method").get<std::string>();
  for (const json& r : j.at("rows")) {
    ReportRow row;
    row.method = r.at("method").get<std::string>();
    row.ratio = r.at("ratio").get<double>();
    row.seed = r.at("seed").get<std::uint64_t>();
    for (auto it = r.at("retained").begin(); it != r.at("retained").end(); ++it)
      row.retained[it.key()] = it.value().get<std::vector<std::string>>();
    for (auto it = r.at("retained_clean_fraction").begin();
         it != r.at("retained_clean_fraction").end(); ++it)
      row.retained_clean_fraction[it.key()] = it.value().get<double>();
    const json& s = r.at("sdr");
    row.sdr.median = {s.at("vocals").get<double>(), s.at("bass").get<double>(),
                      s.at("drums").get<double>(), s.at("other").get<double>()};
    row.sdr.mean = s.at("mean").get<double>();
    row.error = r.value("error", "");
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

std::string render_report_text(const CleaningReport& report) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-20s %-6s %-6s %-8s %7s %7s %7s %7s %7s\n",
                "method", "ratio", "seed", "%clean", "vocals", "bass", "drums",
                "other", "avg");
  out << buf;
  for (const ReportRow& row : report.rows) {
    if (!row.error.empty()) {
      std::snprintf(buf, sizeof(buf), "%-20s %-6g %-6llu FAILED: %s\n",
                    row.method.c_str(), row.ratio,
                    static_cast<unsigned long long>(row.seed),
                    row.error.c_str());
      out << buf;
      continue;
    }
    double frac = 0.0;
    if (row.retained_clean_fraction.count("unified") != 0) {
      frac = row.retained_clean_fraction.at("unified");
    } else if (row.retained_clean_fraction.count("mean") != 0) {
      frac = row.retained_clean_fraction.at("mean");
    } else if (row.retained_clean_fraction.count("all") != 0) {
      frac = row.retained_clean_fraction.at("all");
    }
    std::snprintf(buf, sizeof(buf),
                  "%-20s %-6g %-6llu %-8.1f %7.2f %7.2f %7.2f %7.2f %7.2f\n",
                  row.method.c_str(), row.ratio,
                  static_cast<unsigned long long>(row.seed), 100.0 * frac,
                  row.sdr.median[0], row.sdr.median[1], row.sdr.median[2],
                  row.sdr.median[3], row.sdr.mean);
    out << buf;
  }
  return out.str();
}

void save_report(const CleaningReport& report, const fs::path& json_path) {
  std::ofstream out(json_path);
  if (!out) throw StageError("cannot write: " + json_path.string());
  out << report.to_json().dump(2) << "\n";
}

CleaningReport load_report(const fs::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw StageError("cannot open: " + json_path.string());
  json j;
  in >> j;
  return CleaningReport::from_json(j);
}

}  // namespace attriclean
