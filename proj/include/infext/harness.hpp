#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "infext/config.hpp"
#include "infext/metrics.hpp"
#include "infext/rir.hpp"
#include "infext/scene.hpp"
#include "infext/training.hpp"

namespace infext {

// "3.0x5.0x3.0"
RoomSpec parse_room(const std::string& text);

struct GenRirArgs {
  RoomSpec room;
  double t60 = 0.0;
  double distance = 1.0;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  int sample_rate = 16000;
};

// Random microphone/loudspeaker placement at the requested distance; writes
// the WAV plus JSON sidecar.
Rir cmd_gen_rir(const GenRirArgs& args);

// Talker-switch stress case: far-end speaker A for `segment_s` seconds over an
// echo path at 0.85 m, then speaker B over 1.35 m, with a near-end talker.
AerScene make_switch_scene(int sample_rate, double segment_s, std::uint64_t seed,
                           double sir_db = 0.0);

struct GenScenesArgs {
  Split split = Split::kTest;
  Index count = 1;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  std::optional<Subset> subset;
  bool switch_scenario = false;
  ExperimentConfig config = ExperimentConfig::desk();
};

// Writes <out>/scene_NNNNN/ directories and <out>/manifest.jsonl.
std::vector<ManifestEntry> cmd_gen_scenes(const GenScenesArgs& args);

// Trains per config into out_dir: config.ini, last/best checkpoints,
// train_log.csv. Progress lines go to `log` when given.
TrainResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                      std::ostream* log = nullptr);

// Produces the echo estimate for a scene: a checkpoint path or one of the
// stubs "stub:oracle" (true echo) and "stub:zero".
class EchoEstimator {
 public:
  explicit EchoEstimator(const std::string& source);
  Waveform estimate(const AerScene& scene) const;
  bool is_stub() const { return stub_ != Stub::kNone; }
  const Checkpoint& checkpoint() const { return ckpt_; }

 private:
  enum class Stub { kNone, kOracle, kZero };
  Stub stub_ = Stub::kNone;
  Checkpoint ckpt_;
};

struct EvalArgs {
  std::string checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path out;
};

// examples.json, report.json and table.csv (SS,SN,NS,NN,mean) in out.
MetricReport cmd_eval(const EvalArgs& args);

void write_subset_table(const std::filesystem::path& path, const MetricReport& report);

struct DemoArgs {
  std::string checkpoint;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  double segment_s = 2.0;
};

struct DemoResult {
  Index erle_rows = 0;
  Index emb_rows = 0;
  Index emb_cols = 0;
};

DemoResult cmd_demo_switch(const DemoArgs& args);

void write_waveform_csv(const std::filesystem::path& path, const Waveform& w);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);

}  // namespace infext
