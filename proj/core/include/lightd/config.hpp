#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "lightd/attack.hpp"
#include "lightd/recommender.hpp"
#include "lightd/relight.hpp"
#include "lightd/victim.hpp"

namespace lightd {

enum class BackendKind { kSurrogate, kRemote };

std::string_view to_string(BackendKind k);
std::optional<BackendKind> parse_backend_kind(std::string_view name);

struct BackendConfig {
  BackendKind kind = BackendKind::kSurrogate;
  std::string endpoint;  // remote only; serves both /relight* and /loss_grad
  std::chrono::milliseconds timeout{120000};
  int max_in_flight = 4;
  SurrogateRelightConfig relight;
  SurrogateVictimConfig victim;
};

struct RunConfig {
  AttackConfig attack;
  BackendConfig backend;
  RecommenderConfig recommender;
  std::uint64_t seed = 0;  // master seed; per-record seeds derive from it
  int workers = 1;
  std::optional<std::filesystem::path> niqe_model;

  /// Throws kInvalidArgument on inconsistent settings.
  void validate() const;
};

/// TOML. Relative paths resolve against `base_dir`. Unknown keys and any
/// literal API key are rejected with kParseError.
RunConfig parse_config(std::string_view toml_text,
                       const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

}  // namespace lightd
