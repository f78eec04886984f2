#include "attriclean/scores_io.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace attriclean {

ScoreTable scores_from_unified(const std::string& method, RankOrder order,
                               const std::vector<std::string>& ids,
                               const std::vector<double>& scores) {
  if (ids.size() != scores.size())
    throw ConfigError("score table: ids/scores size mismatch");
  ScoreTable t;
  t.method = method;
  t.order = order;
  t.columns = {"score"};
  t.ids = ids;
  for (double s : scores) t.values.push_back({s});
  return t;
}

ScoreTable scores_from_per_target(
    const std::string& method, RankOrder order,
    const std::vector<std::string>& ids,
    const std::array<std::vector<double>, kNumTargets>& scores) {
  ScoreTable t;
  t.method = method;
  t.order = order;
  for (const char* name : kTargetNames) t.columns.push_back(name);
  t.ids = ids;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::vector<double> row;
    for (int k = 0; k < kNumTargets; ++k) {
      if (scores[k].size() != ids.size())
        throw ConfigError("score table: per-target column size mismatch");
      row.push_back(scores[k][i]);
    }
    t.values.push_back(std::move(row));
  }
  return t;
}

void save_scores(const ScoreTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw StageError("cannot write: " + path.string());
  out << "# attriclean-scores v1\n";
  out << "# method=" << table.method << " order="
      << (table.order == RankOrder::kHighIsGood ? "desc" : "asc") << "\n";
  out << "# columns=id";
  for (const std::string& c : table.columns) out << "\t" << c;
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    out << table.ids[i];
    for (double v : table.values[i]) {
      std::snprintf(buf, sizeof(buf), "\t%.17g", v);
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw StageError("write failed: " + path.string());
}

ScoreTable load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StageError("cannot open: " + path.string());
  ScoreTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (const auto pos = line.find("columns="); pos != std::string::npos) {
        std::istringstream cols(line.substr(pos + 8));
        std::string c;
        t.columns.clear();
        while (std::getline(cols, c, '\t')) {
          if (c != "id") t.columns.push_back(c);
        }
        continue;
      }
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        if (tok.rfind("method=", 0) == 0) t.method = tok.substr(7);
        if (tok.rfind("order=", 0) == 0) {
          t.order = tok.substr(6) == "asc" ? RankOrder::kLowIsGood
                                           : RankOrder::kHighIsGood;
        }
      }
      continue;
    }
    std::istringstream ss(line);
    std::string id;
    if (!std::getline(ss, id, '\t')) continue;
    std::vector<double> row;
    std::string field;
    while (std::getline(ss, field, '\t')) row.push_back(std::stod(field));
    t.ids.push_back(id);
    t.values.push_back(std::move(row));
  }
  if (t.ids.empty()) throw StageError("empty score table: " + path.string());
  return t;
}

void save_retained(const RetainedSets& r, const std::filesystem::path& path) {
  nlohmann::json j;
  j["mode"] = r.mode;
  j["ratio"] = r.ratio;
  nlohmann::json sets = nlohmann::json::object();
  for (const auto& [name, ids] : r.sets) sets[name] = ids;
  j["sets"] = sets;
  std::ofstream out(path);
  if (!out) throw StageError("cannot write: " + path.string());
  out << j.dump(2) << "\n";
}

RetainedSets load_retained(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StageError("cannot open: " + path.string());
  nlohmann::json j;
  in >> j;
  RetainedSets r;
  r.mode = j.at("mode").get<std::string>();
  r.ratio = j.at("ratio").get<double>();
  for (auto it = j.at("sets").begin(); it != j.at("sets").end(); ++it)
    r.sets[it.key()] = it.value().get<std::vector<std::string>>();
  return r;
}

}  // namespace attriclean
