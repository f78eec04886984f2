#ifndef ATTRICLEAN_SCORES_IO_H
#define ATTRICLEAN_SCORES_IO_H

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "attriclean/attribution.h"

namespace attriclean {

// Human-readable per-song score table shared by every cleaning method.
// Header lines carry the method, the ranking direction and the column
// layout; see docs/FORMATS.md.
struct ScoreTable {
  std::string method;
  RankOrder order = RankOrder::kHighIsGood;
  std::vector<std::string> columns;  // "score" or one column per target
  std::vector<std::string> ids;
  std::vector<std::vector<double>> values;  // ids x columns
};

ScoreTable scores_from_unified(const std::string& method, RankOrder order,
                               const std::vector<std::string>& ids,
                               const std::vector<double>& scores);

ScoreTable scores_from_per_target(
    const std::string& method, RankOrder order,
    const std::vector<std::string>& ids,
    const std::array<std::vector<double>, kNumTargets>& scores);

void save_scores(const ScoreTable& table, const std::filesystem::path& path);
ScoreTable load_scores(const std::filesystem::path& path);

// Retained-set file: mode "unified" holds one set; mode "per_target" holds a
// set per target plus their union.
struct RetainedSets {
  std::string mode;
  double ratio = 0.0;
  std::map<std::string, std::vector<std::string>> sets;
};

void save_retained(const RetainedSets& r, const std::filesystem::path& path);
RetainedSets load_retained(const std::filesystem::path& path);

}  // namespace attriclean

#endif  // ATTRICLEAN_SCORES_IO_H
