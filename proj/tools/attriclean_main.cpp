// attriclean: data cleaning toolkit for synthetic source-separation corpora.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "attriclean/corpus_io.h"
#include "attriclean/parallel.h"
#include "attriclean/pipeline.h"
#include "attriclean/rng.h"
#include "attriclean/serial_ref.h"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ac = attriclean;
using nlohmann::json;

namespace {

ac::CorpusSpec corpus_spec_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ac::ConfigError("cannot open spec: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ac::ConfigError("bad spec json: " + std::string(e.what()));
  }
  ac::CorpusSpec spec;
  spec.n_clean = j.value("n_clean", 0);
  spec.n_label_noise = j.value("n_label_noise", 0);
  spec.n_bleeding = j.value("n_bleeding", 0);
  spec.n_effects = j.value("n_effects", 0);
  spec.song_length_s = j.value("song_length_s", 6.0);
  spec.sample_rate = j.value("sample_rate", 8000);
  spec.master_seed = j.value("master_seed", 0ULL);
  return spec;
}

struct TrainFlags {
  int epochs = 30;
  int steps_per_epoch = 120;
  int batch = 64;
  double lr = 0.01;
  int hidden = 32;
  int window = 256;
  int hop = 128;
  std::uint64_t seed = 1;

  ac::TrainConfig to_config() const {
    ac::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.steps_per_epoch = steps_per_epoch;
    cfg.batch = batch;
    cfg.learning_rate = lr;
    cfg.dims.hidden = static_cast<std::size_t>(hidden);
    cfg.stft.window = window;
    cfg.stft.hop = hop;
    cfg.dims.bins = static_cast<std::size_t>(window) / 2 + 1;
    cfg.seed = seed;
    return cfg;
  }

  void add_options(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs);
    cmd->add_option("--steps-per-epoch", steps_per_epoch);
    cmd->add_option("--batch", batch);
    cmd->add_option("--lr", lr);
    cmd->add_option("--hidden", hidden);
    cmd->add_option("--window", window);
    cmd->add_option("--hop", hop);
    cmd->add_option("--seed", seed);
  }
};

void write_timings(const ac::StageTimings& tm, const std::string& path) {
  std::ofstream out(path);
  for (const auto& [stage, s] : tm.seconds) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-48s %10.3f s\n", stage.c_str(), s);
    out << buf;
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"noise-agnostic data cleaning for source-separation corpora"};
  app.require_subcommand(1);

  bool serial = false;
  int threads = 0;
  app.add_flag("--serial", serial, "disable the OpenMP kernels");
  app.add_option("--threads", threads, "OpenMP thread count (0 = default)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a contaminated corpus");
  std::string synth_spec, synth_out;
  synth->add_option("--spec", synth_spec, "corpus spec json")->required();
  synth->add_option("--out", synth_out, "output corpus directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train the baseline mask models");
  std::string train_corpus, train_refs, train_out;
  TrainFlags train_flags;
  train->add_option("--corpus", train_corpus)->required();
  train->add_option("--refs", train_refs, "clean validation set")->required();
  train->add_option("--out", train_out, "checkpoint directory")->required();
  train_flags.add_options(train);

  // attribute
  auto* attrib = app.add_subcommand(
      "attribute", "unlearning-based attribution matrix and scores");
  std::string at_ckpt, at_corpus, at_refs, at_out;
  double at_rel_step = 1e-3;
  double at_alpha = -1.0;
  int at_steps = 1;
  attrib->add_option("--ckpt", at_ckpt)->required();
  attrib->add_option("--corpus", at_corpus)->required();
  attrib->add_option("--refs", at_refs)->required();
  attrib->add_option("--out", at_out, "attribution tensor file")->required();
  attrib->add_option("--alpha", at_alpha, "fixed alpha (<0 = adaptive)");
  attrib->add_option("--rel-step", at_rel_step);
  attrib->add_option("--steps", at_steps);

  // fad
  auto* fad = app.add_subcommand("fad", "per-song FAD scores and filter");
  std::string fad_corpus, fad_refs, fad_out;
  double fad_ratio = 0.5;
  int fad_mels = 20;
  fad->add_option("--corpus", fad_corpus)->required();
  fad->add_option("--refs", fad_refs)->required();
  fad->add_option("--ratio", fad_ratio);
  fad->add_option("--out", fad_out, "score table file")->required();
  fad->add_option("--n-mels", fad_mels);

  // clsfilter
  auto* clsf = app.add_subcommand("clsfilter", "classifier-baseline filter");
  std::string cls_corpus, cls_refs, cls_out;
  double cls_ratio = 0.5;
  std::uint64_t cls_seed = 1;
  clsf->add_option("--refs", cls_refs)->required();
  clsf->add_option("--corpus", cls_corpus)->required();
  clsf->add_option("--ratio", cls_ratio);
  clsf->add_option("--out", cls_out, "score table file")->required();
  clsf->add_option("--seed", cls_seed);

  // filter
  auto* filter = app.add_subcommand("filter", "rank scores and retain top r");
  std::string fl_scores, fl_mode = "unified", fl_out;
  double fl_ratio = 0.75;
  filter->add_option("--scores", fl_scores)->required();
  filter->add_option("--ratio", fl_ratio)->required();
  filter->add_option("--mode", fl_mode)
      ->check(CLI::IsMember({"unified", "per-target"}));
  filter->add_option("--out", fl_out, "retained set json")->required();

  // retrain
  auto* retrain = app.add_subcommand("retrain", "train on a retained subset");
  std::string rt_corpus, rt_refs, rt_retain, rt_out;
  TrainFlags rt_flags;
  retrain->add_option("--corpus", rt_corpus)->required();
  retrain->add_option("--refs", rt_refs)->required();
  retrain->add_option("--retain", rt_retain, "retained set json")->required();
  retrain->add_option("--out", rt_out)->required();
  rt_flags.add_options(retrain);

  // eval
  auto* eval = app.add_subcommand("eval", "median SDR on an eval set");
  std::string ev_ckpt, ev_set, ev_json;
  eval->add_option("--ckpt", ev_ckpt)->required();
  eval->add_option("--eval", ev_set)->required();
  eval->add_option("--json", ev_json, "also write the summary as json");

  // run
  auto* run = app.add_subcommand("run", "full cleaning pipeline");
  std::string run_config, run_out;
  run->add_option("--config", run_config)->required();
  run->add_option("--out", run_out, "override config out_dir");

  // report
  auto* report = app.add_subcommand("report", "render a report json");
  std::string rp_in;
  report->add_option("--in", rp_in)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // bad arguments are configuration errors
  }

  if (serial) ac::par::set_enabled(false);
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  if (synth->parsed()) {
    const ac::CorpusSpec spec = corpus_spec_from_file(synth_spec);
    const auto corpus = ac::build_corpus(spec);
    ac::save_corpus(corpus, synth_out);
    std::printf("wrote %zu songs to %s\n", corpus.size(), synth_out.c_str());
    return 0;
  }

  if (train->parsed()) {
    const auto corpus = ac::load_corpus(train_corpus);
    const auto refs = ac::load_corpus(train_refs);
    std::array<std::vector<ac::EpochRecord>, ac::kNumTargets> logs;
    const auto model = ac::train_all(corpus, refs, train_flags.to_config(), &logs);
    ac::save_checkpoint(model, train_out, &logs);
    std::printf("checkpoint written to %s\n", train_out.c_str());
    return 0;
  }

  if (attrib->parsed()) {
    const auto model = ac::load_checkpoint(at_ckpt);
    const auto corpus = ac::load_corpus(at_corpus);
    const auto refs = ac::load_corpus(at_refs);
    ac::UnlearnConfig cfg;
    if (at_alpha >= 0.0) cfg.alpha = at_alpha;
    cfg.target_rel_step = at_rel_step;
    cfg.steps = at_steps;
    cfg.n_train = corpus.size();
    const auto a = ac::attribution_matrix(model, corpus, refs, cfg);
    ac::save_attribution(a, at_out);

    ac::save_scores(
        ac::scores_from_unified("unlearn_unified", ac::RankOrder::kHighIsGood,
                                a.train_ids, ac::aggregate_unified(a)),
        at_out + ".scores.tsv");
    std::array<std::vector<double>, ac::kNumTargets> per_t;
    for (ac::Target t : ac::kAllTargets)
      per_t[static_cast<int>(t)] = ac::aggregate_per_target(a, t);
    ac::save_scores(
        ac::scores_from_per_target("unlearn_per_target",
                                   ac::RankOrder::kHighIsGood, a.train_ids,
                                   per_t),
        at_out + ".scores_per_target.tsv");
    std::printf("attribution: %zu x %zu x %d cells, %llu unlearning runs\n",
                a.n_train, a.n_refs, ac::kNumTargets,
                static_cast<unsigned long long>(a.unlearn_runs));
    return 0;
  }

  if (fad->parsed()) {
    const auto corpus = ac::load_corpus(fad_corpus);
    const auto refs = ac::load_corpus(fad_refs);
    ac::EmbedConfig cfg;
    cfg.n_mels = fad_mels;
    const auto result = ac::fad_filter(corpus, refs, fad_ratio, cfg);
    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto& s : result.scores) {
      ids.push_back(s.id);
      values.push_back(s.score);
    }
    ac::save_scores(
        ac::scores_from_unified("fad", ac::RankOrder::kLowIsGood, ids, values),
        fad_out);
    ac::RetainedSets retained;
    retained.mode = "unified";
    retained.ratio = fad_ratio;
    retained.sets["unified"] = result.retained;
    ac::save_retained(retained, fad_out + ".retained.json");
    std::printf("fad: retained %zu of %zu songs\n", result.retained.size(),
                corpus.size());
    return 0;
  }

  if (clsf->parsed()) {
    const auto corpus = ac::load_corpus(cls_corpus);
    const auto refs = ac::load_corpus(cls_refs);
    ac::ClassifierConfig cfg;
    cfg.seed = cls_seed;
    const auto params = ac::train_classifier(refs, cfg);
    const auto result = ac::cls_filter(corpus, params, cls_ratio);
    ac::save_scores(ac::scores_from_unified("cls", ac::RankOrder::kHighIsGood,
                                            result.ids, result.song_scores),
                    cls_out);
    ac::RetainedSets retained;
    retained.mode = "unified";
    retained.ratio = cls_ratio;
    retained.sets["unified"] = result.retained;
    ac::save_retained(retained, cls_out + ".retained.json");
    std::printf("cls: retained %zu of %zu songs\n", result.retained.size(),
                corpus.size());
    return 0;
  }

  if (filter->parsed()) {
    const ac::ScoreTable table = ac::load_scores(fl_scores);
    ac::RetainedSets retained;
    retained.ratio = fl_ratio;
    if (fl_mode == "unified") {
      if (table.columns.size() != 1)
        throw ac::ConfigError("unified filter expects a one-column score table");
      std::vector<double> values;
      for (const auto& row : table.values) values.push_back(row[0]);
      retained.mode = "unified";
      retained.sets["unified"] =
          ac::filter_ranked(table.ids, values, fl_ratio, table.order);
    } else {
      if (table.columns.size() != ac::kNumTargets)
        throw ac::ConfigError(
            "per-target filter expects a four-column score table");
      retained.mode = "per_target";
      std::set<std::string> uni;
      for (int t = 0; t < ac::kNumTargets; ++t) {
        std::vector<double> values;
        for (const auto& row : table.values) values.push_back(row[t]);
        auto set = ac::filter_ranked(table.ids, values, fl_ratio, table.order);
        uni.insert(set.begin(), set.end());
        retained.sets[ac::kTargetNames[t]] = std::move(set);
      }
      retained.sets["union"] = std::vector<std::string>(uni.begin(), uni.end());
    }
    ac::save_retained(retained, fl_out);
    std::printf("retained %zu ids -> %s\n",
                retained.sets.begin()->second.size(), fl_out.c_str());
    return 0;
  }

  if (retrain->parsed()) {
    const auto corpus = ac::load_corpus(rt_corpus);
    const auto refs = ac::load_corpus(rt_refs);
    const ac::RetainedSets retained = ac::load_retained(rt_retain);
    const ac::TrainConfig cfg = rt_flags.to_config();
    ac::SeparationModel model;
    if (retained.mode == "unified") {
      model = ac::train_all(
          ac::subset_by_ids(corpus, retained.sets.at("unified")), refs, cfg);
    } else {
      model.stft = cfg.stft;
      for (ac::Target t : ac::kAllTargets) {
        const auto subset =
            ac::subset_by_ids(corpus, retained.sets.at(ac::target_name(t)));
        const auto pool = ac::build_frame_pool(subset, t, cfg.stft);
        const auto val = ac::build_frame_pool(refs, t, cfg.stft);
        model.per_target[static_cast<int>(t)] =
            ac::train_target(pool, val, t, cfg).params;
      }
    }
    ac::save_checkpoint(model, rt_out);
    std::printf("retrained checkpoint written to %s\n", rt_out.c_str());
    return 0;
  }

  if (eval->parsed()) {
    const auto model = ac::load_checkpoint(ev_ckpt);
    const auto eval_set = ac::load_corpus(ev_set);
    const ac::SdrSummary s = ac::evaluate_sdr(model, eval_set);
    std::printf("%-8s %7s\n", "target", "median");
    for (int t = 0; t < ac::kNumTargets; ++t)
      std::printf("%-8s %7.2f\n", ac::kTargetNames[t], s.median[t]);
    std::printf("%-8s %7.2f\n", "mean", s.mean);
    if (!ev_json.empty()) {
      json j;
      for (int t = 0; t < ac::kNumTargets; ++t)
        j[ac::kTargetNames[t]] = s.median[t];
      j["mean"] = s.mean;
      std::ofstream out(ev_json);
      out << j.dump(2) << "\n";
    }
    return 0;
  }

  if (run->parsed()) {
    ac::PipelineConfig cfg = ac::PipelineConfig::from_json_file(run_config);
    if (!run_out.empty()) cfg.out_dir = run_out;
    if (cfg.out_dir.empty())
      throw ac::ConfigError("run needs an out_dir (config or --out)");
    ac::StageTimings tm;
    const ac::CleaningReport rep = ac::run_pipeline(cfg, &tm);
    ac::save_report(rep, cfg.out_dir / "report.json");
    {
      std::ofstream out(cfg.out_dir / "report.txt");
      out << ac::render_report_text(rep);
    }
    write_timings(tm, (cfg.out_dir / "timings.txt").string());
    std::fputs(ac::render_report_text(rep).c_str(), stdout);
    for (const auto& row : rep.rows) {
      if (!row.error.empty()) return 3;
    }
    return 0;
  }

  if (report->parsed()) {
    const ac::CleaningReport rep = ac::load_report(rp_in);
    std::fputs(ac::render_report_text(rep).c_str(), stdout);
    bool has_method_rows = false;
    for (const auto& row : rep.rows) {
      if (row.method != "none" && row.error.empty()) has_method_rows = true;
    }
    if (has_method_rows)
      std::printf("best ratio: %g\n", ac::best_ratio(rep));
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ac::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ac::StageError& e) {
    std::fprintf(stderr, "stage failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
