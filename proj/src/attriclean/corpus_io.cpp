#include "attriclean/corpus_io.h"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace attriclean {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StageError("cannot open: " + path.string());
  json j;
  in >> j;
  return j;
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw StageError("cannot open for write: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace

void save_corpus(const std::vector<StemSet>& corpus, const fs::path& root,
                 bool write_ledger) {
  fs::create_directories(root);
  for (const StemSet& song : corpus) {
    const fs::path dir = root / song.id;
    fs::create_directories(dir);
    save_waveform_raw(song.mixture, dir / "mixture.f32");
    json meta;
    meta["format"] = "f32le";
    meta["id"] = song.id;
    meta["sample_rate"] = song.mixture.sample_rate;
    meta["n_samples"] = song.mixture.samples.size();
    meta["seed"] = song.seed;
    json stems = json::object();
    for (int t = 0; t < kNumTargets; ++t) {
      const std::string name = kTargetNames[t];
      save_waveform_raw(song.stems[t], dir / (name + ".f32"));
      stems[name] = name + ".f32";
    }
    meta["stems"] = stems;
    write_json(meta, dir / "meta.json");
  }
  if (write_ledger) save_ledger(ledger_from_corpus(corpus), root);
}

std::vector<StemSet> load_corpus(const fs::path& root) {
  if (!fs::is_directory(root))
    throw ConfigError("corpus directory not found: " + root.string());
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json"))
      ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw ConfigError("no songs found in " + root.string());

  std::vector<StemSet> corpus;
  corpus.reserve(ids.size());
  for (const std::string& id : ids) {
    const fs::path dir = root / id;
    const json meta = read_json(dir / "meta.json");
    StemSet song;
    song.id = meta.at("id").get<std::string>();
    song.seed = meta.value("seed", 0ULL);
    const int sr = meta.at("sample_rate").get<int>();
    song.mixture = load_waveform_raw(dir / "mixture.f32", sr);
    for (int t = 0; t < kNumTargets; ++t) {
      const std::string file =
          meta.at("stems").at(kTargetNames[t]).get<std::string>();
      song.stems[t] = load_waveform_raw(dir / file, sr);
      if (song.stems[t].samples.size() != song.mixture.samples.size())
        throw StageError("stem/mixture length mismatch in " + id);
    }
    corpus.push_back(std::move(song));
  }
  return corpus;
}

void save_ledger(const Ledger& ledger, const fs::path& root) {
  fs::create_directories(root);
  json j = json::object();
  for (const auto& [id, tag] : ledger) j[id] = tag;
  write_json(j, root / "ledger.json");
}

Ledger load_ledger(const fs::path& root) {
  const fs::path path = root / "ledger.json";
  if (!fs::exists(path))
    throw StageError("ledger not found: " + path.string());
  const json j = read_json(path);
  Ledger ledger;
  for (auto it = j.begin(); it != j.end(); ++it)
    ledger[it.key()] = it.value().get<std::string>();
  return ledger;
}

Ledger ledger_from_corpus(const std::vector<StemSet>& corpus) {
  Ledger ledger;
  for (const StemSet& song : corpus) ledger[song.id] = song.corruption.tag();
  return ledger;
}

std::uint64_t corpus_digest(const std::vector<StemSet>& corpus) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const StemSet& song : corpus) {
    mix(song.id.data(), song.id.size());
    mix(song.mixture.samples.data(),
        song.mixture.samples.size() * sizeof(double));
    for (const Waveform& s : song.stems)
      mix(s.samples.data(), s.samples.size() * sizeof(double));
  }
  return h;
}

}  // namespace attriclean
