#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "infext/autodiff.hpp"
#include "infext/scene.hpp"
#include "infext/signal.hpp"

namespace infext {

inline constexpr double kMetricEps = 1e-8;
inline constexpr double kDbCap = 80.0;

// 10 log10((sum x0^2 + eps) / (sum (x0 - est)^2 + eps)), clamped to +-80 dB.
double sdr(const Waveform& reference, const Waveform& estimate);

// Negative uncapped SDR on the tape; gradient flows into estimate.
template <typename S>
Var<S> sdr_loss(const Tensor<S>& reference, Var<S> estimate);

// Scale-invariant SDR of estimate against a non-silent reference, +-80 dB cap.
double si_sdr(const Waveform& estimate, const Waveform& reference);

// y - x0_hat
Waveform near_end_estimate(const Waveform& mixture, const Waveform& echo_estimate);

// si_sdr(near_estimate, x1) - si_sdr(y, x1)
double si_sdri(const AerScene& scene, const Waveform& near_estimate);

struct ErlePoint {
  double time_s;
  double erle_db;
};

// Frame-wise echo reduction against the true echo; time stamps at frame centres.
std::vector<ErlePoint> erle_curve(const Waveform& echo, const Waveform& echo_estimate,
                                  Index frame_len = 2048, Index hop = 512);

// |E - temporal mean of each row|
Eigen::MatrixXd embedding_deviation_map(const Eigen::MatrixXd& emb);

struct ExampleMetrics {
  std::string id;
  Subset subset = Subset::kSS;
  double si_sdr_in = 0;
  double si_sdr_out = 0;
  double si_sdri = 0;
  double sdr_echo = 0;
  double erle_mean_db = 0;
  double erle_min_db = 0;
};

// ERLE frames of 128 ms with 75% overlap at the given rate (2048 / 512 at 16 kHz).
Index erle_frame_len(int sample_rate);

ExampleMetrics evaluate_example(const std::string& id, const AerScene& scene,
                                const Waveform& echo_estimate);

struct MetricReport {
  std::vector<ExampleMetrics> examples;
  std::vector<ErlePoint> erle_series;

  // Mean SI-SDRi per subset tag present in the report.
  std::map<std::string, double> subset_means() const;
  double overall_mean() const;
  nlohmann::json to_json() const;
};

void write_erle_csv(const std::filesystem::path& path, const std::vector<ErlePoint>& series);

}  // namespace infext
