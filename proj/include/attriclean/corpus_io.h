#ifndef ATTRICLEAN_CORPUS_IO_H
#define ATTRICLEAN_CORPUS_IO_H

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "attriclean/synth.h"

namespace attriclean {

// Corpus directory layout (byte-exact spec in docs/FORMATS.md):
//   <root>/<song id>/{mixture,vocals,bass,drums,other}.f32   raw LE float32
//   <root>/<song id>/meta.json                               sidecar record
//   <root>/ledger.json                                       id -> tag
// The ledger carries the ground-truth corruption tags out-of-band; song
// files and sidecars never contain them.
void save_corpus(const std::vector<StemSet>& corpus,
                 const std::filesystem::path& root, bool write_ledger = true);

// Loads songs only; corruption stays kUnknown. Cleaning methods receive the
// corpus through this path and therefore never see the ledger.
std::vector<StemSet> load_corpus(const std::filesystem::path& root);

using Ledger = std::map<std::string, std::string>;

void save_ledger(const Ledger& ledger, const std::filesystem::path& root);
Ledger load_ledger(const std::filesystem::path& root);

Ledger ledger_from_corpus(const std::vector<StemSet>& corpus);

// Content hash of all waveform bytes + ids; key for stage caching.
std::uint64_t corpus_digest(const std::vector<StemSet>& corpus);

}  // namespace attriclean

#endif  // ATTRICLEAN_CORPUS_IO_H
