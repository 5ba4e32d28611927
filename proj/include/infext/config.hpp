#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "infext/networks.hpp"
#include "infext/scene.hpp"
#include "infext/training.hpp"

namespace infext {

struct PathsConfig {
  std::string out_dir = "runs";
  std::string source_dir;  // empty: synthetic source bank
  std::string resume;      // checkpoint to continue from
};

// Sections [model], [train], [data], [paths]. The model sample rate always
// follows [data] sample_rate.
struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  SceneConfig data;
  PathsConfig paths;
  std::uint64_t init_seed = 1;

  static ExperimentConfig full();
  static ExperimentConfig desk();
};

ExperimentConfig preset_config(const std::string& name);

// Strict parse on top of `base`: unknown sections or keys are errors, keys
// not mentioned keep the base value.
ExperimentConfig parse_config_text(const std::string& text,
                                   const ExperimentConfig& base = ExperimentConfig::full());
ExperimentConfig parse_config(const std::filesystem::path& path,
                              const ExperimentConfig& base = ExperimentConfig::full());

// Canonical text form: every key, fixed order, shortest round-trip numbers.
std::string emit_config(const ExperimentConfig& cfg);

// FNV-1a 64 of the canonical form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);
std::string fnv1a_hex(const std::string& text);

}  // namespace infext
