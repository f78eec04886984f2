#ifndef ATTRICLEAN_COMMON_H
#define ATTRICLEAN_COMMON_H

#include <array>
#include <stdexcept>
#include <string>

namespace attriclean {

// Invalid user input: bad config files, CLI arguments, precondition violations.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage failed at runtime (divergence, io failure, solver failure).
// The CLI maps this to exit code 3.
class StageError : public std::runtime_error {
 public:
  explicit StageError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Target : int { kVocals = 0, kBass = 1, kDrums = 2, kOther = 3 };

inline constexpr int kNumTargets = 4;

inline constexpr std::array<const char*, kNumTargets> kTargetNames = {
    "vocals", "bass", "drums", "other"};

inline const char* target_name(Target t) {
  return kTargetNames[static_cast<int>(t)];
}

inline Target target_from_name(const std::string& name) {
  for (int i = 0; i < kNumTargets; ++i) {
    if (name == kTargetNames[i]) return static_cast<Target>(i);
  }
  throw ConfigError("unknown target: " + name);
}

inline constexpr std::array<Target, kNumTargets> kAllTargets = {
    Target::kVocals, Target::kBass, Target::kDrums, Target::kOther};

}  // namespace attriclean

#endif  // ATTRICLEAN_COMMON_H
