#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "infext/rir.hpp"
#include "infext/signal.hpp"

namespace infext {

enum class SourceClass { kSpeech, kGuitar, kBass, kPiano, kRain, kEngine };
enum class SynthKind { kToneStack, kFilteredNoise, kChirp, kAmNoise };
// Target (far-end / echo) class first, interferer (near-end) second.
enum class Subset { kSS, kSN, kNS, kNN };

std::string to_string(SourceClass c);
SourceClass parse_source_class(const std::string& name);
bool is_speech(SourceClass c);
std::string to_string(Subset s);
Subset parse_subset(const std::string& name);
bool target_is_speech(Subset s);
bool interferer_is_speech(Subset s);

// ---------------------------------------------------------------------------
// Synthetic stand-ins for speech and the non-speech classes.

struct ToneStackParams {
  double f0 = 220.0;
  std::vector<int> harmonics;  // three distinct harmonic numbers
  std::vector<double> amplitudes;
  std::vector<double> phases;
};

// Deterministic draw of tone-stack parameters; f0 log-uniform in [f0_min, f0_max].
ToneStackParams tone_stack_params(std::uint64_t seed, double f0_min = 80.0,
                                  double f0_max = 800.0);
Waveform tone_stack(const ToneStackParams& p, double duration, int sample_rate);

// Unit-RMS deterministic pseudo-source. am_noise (noise amplitude-modulated
// at 2-8 Hz through a random resonance) is the speech proxy.
Waveform synth_source(SynthKind kind, std::uint64_t seed, double duration, int sample_rate);

// Class-specific synthesis (frequency ranges per instrument class).
Waveform synth_class_source(SourceClass cls, std::uint64_t seed, double duration,
                            int sample_rate);

struct SourceEntry {
  std::string name;
  SourceClass cls = SourceClass::kSpeech;
  Waveform wave;
  std::string origin;  // "synthetic" or the ingested file path
};

struct SourceBank {
  std::vector<SourceEntry> entries;
  int sample_rate = 16000;

  // per_class entries of each class, durations of `duration` seconds; the
  // seed space is disjoint per split.
  static SourceBank synthetic(Split split, int per_class, double duration, int sample_rate,
                              std::uint64_t seed);
  // <root>/<class name>/*.wav, mono at sample_rate, at least min_duration s.
  static SourceBank from_directory(const std::filesystem::path& root, int sample_rate,
                                   double min_duration);

  std::vector<const SourceEntry*> select(bool speech) const;
};

// ---------------------------------------------------------------------------
// Scenes.

struct AerScene {
  Waveform mixture;    // y = echo + near_end
  Waveform echo;       // x0, extraction target
  Waveform near_end;   // x1
  Waveform reference;  // a0, unfiltered far-end
  Subset subset = Subset::kSS;
  double sir_db = 0.0;
  nlohmann::json meta = nlohmann::json::object();

  Index size() const { return mixture.size(); }
  int sample_rate() const { return mixture.sample_rate; }
};

// x0 = far_end * echo_rir, x1 = near_src * near_rir (both truncated to the
// far-end length); x1 is rescaled so 10 log10(P(x0)/P(x1)) = sir_db.
AerScene mix_scene(const Waveform& far_end, const Waveform& near_src, const Rir& echo_rir,
                   const Rir& near_rir, double sir_db, Subset tag);

// Far-end made of two back-to-back segments (speaker A then B) of
// `segment` samples each, each filtered by its own echo path and truncated to
// its half.
AerScene build_switch_scenario(const Waveform& speaker_a, const Waveform& speaker_b,
                               const Rir& rir_a, const Rir& rir_b, const Waveform& near_src,
                               const Rir& near_rir, double sir_db, Index segment);

struct SceneConfig {
  int sample_rate = 16000;
  double duration = 4.0;  // seconds
  double sir_min = -5.0;
  double sir_max = 5.0;
  int sources_per_class = 8;
  // 0 simulates two RIRs per scene; otherwise scenes draw from this many
  // pre-simulated geometry pairs per split.
  int rir_bank_size = 0;
  std::uint64_t seed = 0;
  double sound_speed = 343.0;

  Index scene_samples() const {
    return static_cast<Index>(std::llround(duration * sample_rate));
  }
};

// RNG keyed by (seed, index); order-independent across workers.
std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t index);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// One random scene: subset uniform over the four, SIR uniform, random crops,
// geometry via sample_geometry with freshly simulated RIRs.
AerScene sample_scene(const SourceBank& bank, const GeometryPool& pool, std::mt19937_64& rng,
                      const SceneConfig& cfg, std::optional<Subset> force = std::nullopt);

class SceneGenerator {
 public:
  SceneGenerator(SceneConfig cfg, Split split);
  SceneGenerator(SceneConfig cfg, Split split, SourceBank bank);

  AerScene sample(std::mt19937_64& rng, std::optional<Subset> force = std::nullopt) const;

  const SceneConfig& config() const { return cfg_; }
  const SourceBank& bank() const { return bank_; }
  const GeometryPool& pool() const { return pool_; }
  Split split() const { return split_; }

 private:
  void build_rir_bank();

  SceneConfig cfg_;
  Split split_;
  SourceBank bank_;
  GeometryPool pool_;
  std::vector<std::pair<Rir, Rir>> rir_bank_;
};

// `count` scenes keyed by (epoch_seed, index).
class SceneStream {
 public:
  SceneStream(const SceneGenerator& gen, std::uint64_t epoch_seed, Index count,
              std::optional<Subset> force = std::nullopt)
      : gen_(&gen), seed_(epoch_seed), count_(count), force_(force) {}

  Index size() const { return count_; }
  AerScene at(Index i) const;
  bool next(AerScene& out);

 private:
  const SceneGenerator* gen_;
  std::uint64_t seed_;
  Index count_;
  Index cursor_ = 0;
  std::optional<Subset> force_;
};

SceneStream dataset_iter(const SceneGenerator& gen, std::uint64_t epoch_seed, Index count);

// Scene directory: mixture.wav, echo.wav, near.wav, ref.wav (float32) +
// meta.json.
void write_scene(const std::filesystem::path& dir, const AerScene& scene);
AerScene read_scene(const std::filesystem::path& dir);

struct ManifestEntry {
  std::string id;
  std::filesystem::path dir;  // relative to the manifest file
  Subset subset = Subset::kSS;
  double sir_db = 0.0;
  nlohmann::json extra = nlohmann::json::object();
};

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

}  // namespace infext
