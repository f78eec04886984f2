#include "attriclean/waveform.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace attriclean {

static_assert(std::endian::native == std::endian::little,
              "raw waveform io assumes a little-endian host");

void Waveform::validate(const std::string& context) const {
  if (samples.empty()) throw ConfigError(context + ": waveform is empty");
  if (sample_rate <= 0)
    throw ConfigError(context + ": sample_rate must be positive");
  for (double s : samples) {
    if (!std::isfinite(s))
      throw ConfigError(context + ": waveform has non-finite samples");
  }
}

double energy(const Waveform& w) {
  double e = 0.0;
  for (double s : w.samples) e += s * s;
  return e;
}

void save_waveform_raw(const Waveform& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError("cannot open for write: " + path.string());
  std::vector<float> buf(w.samples.begin(), w.samples.end());
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!out) throw StageError("write failed: " + path.string());
}

Waveform load_waveform_raw(const std::filesystem::path& path,
                           int sample_rate) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw StageError("cannot open: " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(float) != 0)
    throw StageError("raw waveform size not a multiple of 4: " + path.string());
  in.seekg(0);
  std::vector<float> buf(bytes / sizeof(float));
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(bytes));
  if (!in) throw StageError("read failed: " + path.string());
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(buf.begin(), buf.end());
  return w;
}

}  // namespace attriclean
