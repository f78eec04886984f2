#ifndef ATTRICLEAN_PIPELINE_H
#define ATTRICLEAN_PIPELINE_H

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "attriclean/classifier.h"
#include "attriclean/corpus_io.h"
#include "attriclean/fad.h"
#include "attriclean/scores_io.h"

namespace attriclean {

enum class Method { kNone, kUnlearnUnified, kUnlearnPerTarget, kFad, kCls };

Method method_from_name(const std::string& name);
const char* method_name(Method m);

// Generator spec for the clean reference / evaluation sets.
struct CleanSetSpec {
  int count = 0;
  double song_length_s = 6.0;
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  CorpusSpec corpus;
  CleanSetSpec refs{12, 6.0, 0};
  CleanSetSpec eval{27, 6.0, 0};
  Method method = Method::kUnlearnUnified;
  std::vector<double> ratios;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;
  UnlearnConfig unlearn;
  EmbedConfig embed;
  ClassifierConfig cls;
  std::filesystem::path out_dir;  // empty = no artifacts, in-memory only

  void validate() const;
  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig from_json_file(const std::filesystem::path& path);
};

struct SdrSummary {
  std::array<double, kNumTargets> median{};  // per-target median over songs
  double mean = 0.0;                         // mean of the four medians
};

SdrSummary evaluate_sdr(const SeparationModel& model,
                        const std::vector<StemSet>& eval_set);

struct ReportRow {
  std::string method;
  double ratio = 1.0;
  std::uint64_t seed = 0;
  // "unified", or one entry per target plus "union" in per-target mode.
  std::map<std::string, std::vector<std::string>> retained;
  std::map<std::string, double> retained_clean_fraction;
  SdrSummary sdr;
  std::string error;  // nonempty when this (seed, ratio) cell failed
};

struct CleaningReport {
  std::size_t n_corpus = 0;
  std::string method;
  std::vector<ReportRow> rows;

  nlohmann::json to_json() const;
  static CleaningReport from_json(const nlohmann::json& j);
};

// Wall-clock per stage. Kept out of the report json so reruns stay
// byte-identical; the CLI writes these to a separate timings file.
struct StageTimings {
  std::vector<std::pair<std::string, double>> seconds;
  void add(const std::string& stage, double s) { seconds.push_back({stage, s}); }
};

// Full protocol: generate sets, train the baseline per seed, score by the
// configured method, then filter / retrain / evaluate per ratio.
CleaningReport run_pipeline(const PipelineConfig& cfg,
                            StageTimings* timings = nullptr);

// (cleaned - dirty) / (clean_ub - dirty).
double gap_closed(double dirty, double cleaned, double clean_ub);

// Ratio with the best seed-averaged mean SDR; ties keep more data.
double best_ratio(const CleaningReport& report);

std::string render_report_text(const CleaningReport& report);

void save_report(const CleaningReport& report,
                 const std::filesystem::path& json_path);
CleaningReport load_report(const std::filesystem::path& json_path);

std::vector<StemSet> subset_by_ids(const std::vector<StemSet>& corpus,
                                   const std::vector<std::string>& ids);

}  // namespace attriclean

#endif  // ATTRICLEAN_PIPELINE_H
