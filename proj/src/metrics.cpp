#include "infext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace infext {

namespace {

void require_same_length(const Waveform& a, const Waveform& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

double capped_db(double ratio) {
  const double db = 10.0 * std::log10(ratio);
  if (std::isnan(db)) return -kDbCap;
  return std::clamp(db, -kDbCap, kDbCap);
}

}  // namespace

double sdr(const Waveform& reference, const Waveform& estimate) {
  require_same_length(reference, estimate, "sdr");
  const double signal = reference.samples.squaredNorm();
  const double error = (reference.samples - estimate.samples).squaredNorm();
  return capped_db((signal + kMetricEps) / (error + kMetricEps));
}

template <typename S>
Var<S> sdr_loss(const Tensor<S>& reference, Var<S> estimate) {
  if (reference.size() != estimate.size()) {
    throw std::invalid_argument("sdr_loss: length mismatch (" + std::to_string(reference.size()) +
                                " vs " + std::to_string(estimate.size()) + ")");
  }
  Tape<S>& tape = *estimate.tape;
  const S to_db = S(10.0 / std::numbers::ln10);
  const double signal = reference.vec().template cast<double>().squaredNorm() + kMetricEps;
  Var<S> ref = tape.constant(reference.reshaped(estimate.shape()));
  Var<S> error = ad::add_scalar(ad::sum(ad::square(ad::sub(estimate, ref))), S(kMetricEps));
  return ad::add_scalar(ad::scale(ad::log(error), to_db), S(-10.0 * std::log10(signal)));
}

template Var<float> sdr_loss(const Tensor<float>&, Var<float>);
template Var<double> sdr_loss(const Tensor<double>&, Var<double>);

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  require_same_length(estimate, reference, "si_sdr");
  const double ref_energy = reference.samples.squaredNorm();
  if (!(ref_energy > 0)) throw std::invalid_argument("si_sdr: silent reference");
  // Bring the estimate to the reference energy first so the eps guard cannot
  // reintroduce a dependence on the estimate's scale.
  Eigen::VectorXd est = estimate.samples;
  const double est_energy = est.squaredNorm();
  if (est_energy > 0) est *= std::sqrt(ref_energy / est_energy);
  const double alpha = est.dot(reference.samples) / ref_energy;
  const Eigen::VectorXd target = alpha * reference.samples;
  const double distortion = (est - target).squaredNorm();
  return capped_db(target.squaredNorm() / (distortion + kMetricEps));
}

Waveform near_end_estimate(const Waveform& mixture, const Waveform& echo_estimate) {
  require_same_length(mixture, echo_estimate, "near_end_estimate");
  return Waveform{mixture.samples - echo_estimate.samples, mixture.sample_rate};
}

double si_sdri(const AerScene& scene, const Waveform& near_estimate) {
  return si_sdr(near_estimate, scene.near_end) - si_sdr(scene.mixture, scene.near_end);
}

std::vector<ErlePoint> erle_curve(const Waveform& echo, const Waveform& echo_estimate,
                                  Index frame_len, Index hop) {
  require_same_length(echo, echo_estimate, "erle_curve");
  const Waveform residual{echo.samples - echo_estimate.samples, echo.sample_rate};
  const FrameMatrix e = frame(echo, frame_len, hop);
  const FrameMatrix r = frame(residual, frame_len, hop);
  std::vector<ErlePoint> out;
  out.reserve(e.num_frames());
  for (Index k = 0; k < e.num_frames(); ++k) {
    const double residual = r.data.col(k).squaredNorm();
    const double centre = static_cast<double>(k * hop) + 0.5 * static_cast<double>(frame_len);
    // Exact cancellation is the cap, whatever the frame's echo level.
    const double db = residual == 0.0
                          ? kDbCap
                          : capped_db((e.data.col(k).squaredNorm() + kMetricEps) / (residual + kMetricEps));
    out.push_back({centre / echo.sample_rate, db});
  }
  return out;
}

Eigen::MatrixXd embedding_deviation_map(const Eigen::MatrixXd& emb) {
  if (emb.cols() < 1) throw std::invalid_argument("embedding_deviation_map: no frames");
  // Mean taken about the first column so constant rows give exact zeros.
  const Eigen::VectorXd first = emb.col(0);
  const Eigen::VectorXd mean = first + (emb.colwise() - first).rowwise().mean();
  return (emb.colwise() - mean).cwiseAbs();
}

Index erle_frame_len(int sample_rate) {
  return static_cast<Index>(std::llround(0.128 * sample_rate));
}

ExampleMetrics evaluate_example(const std::string& id, const AerScene& scene,
                                const Waveform& echo_estimate) {
  ExampleMetrics m;
  m.id = id;
  m.subset = scene.subset;
  const Waveform near_hat = near_end_estimate(scene.mixture, echo_estimate);
  m.si_sdr_in = si_sdr(scene.mixture, scene.near_end);
  m.si_sdr_out = si_sdr(near_hat, scene.near_end);
  m.si_sdri = m.si_sdr_out - m.si_sdr_in;
  m.sdr_echo = sdr(scene.echo, echo_estimate);
  const Index len = erle_frame_len(scene.sample_rate());
  const auto erle = erle_curve(scene.echo, echo_estimate, len, len / 4);
  m.erle_min_db = kDbCap;
  double sum = 0;
  for (const auto& p : erle) {
    sum += p.erle_db;
    m.erle_min_db = std::min(m.erle_min_db, p.erle_db);
  }
  m.erle_mean_db = sum / static_cast<double>(erle.size());
  return m;
}

std::map<std::string, double> MetricReport::subset_means() const {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& e : examples) {
    auto& a = acc[to_string(e.subset)];
    a.first += e.si_sdri;
    a.second += 1;
  }
  std::map<std::string, double> out;
  for (const auto& [k, v] : acc) out[k] = v.first / v.second;
  return out;
}

double MetricReport::overall_mean() const {
  if (examples.empty()) return 0.0;
  double s = 0;
  for (const auto& e : examples) s += e.si_sdri;
  return s / static_cast<double>(examples.size());
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["examples"] = nlohmann::json::array();
  for (const auto& e : examples) {
    j["examples"].push_back({{"id", e.id},
                             {"subset", to_string(e.subset)},
                             {"si_sdr_in", e.si_sdr_in},
                             {"si_sdr_out", e.si_sdr_out},
                             {"si_sdri", e.si_sdri},
                             {"sdr_echo", e.sdr_echo},
                             {"erle_mean_db", e.erle_mean_db},
                             {"erle_min_db", e.erle_min_db}});
  }
  j["subset_means"] = subset_means();
  j["mean"] = overall_mean();
  j["erle_series"] = nlohmann::json::array();
  for (const auto& p : erle_series) j["erle_series"].push_back({p.time_s, p.erle_db});
  return j;
}

void write_erle_csv(const std::filesystem::path& path, const std::vector<ErlePoint>& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "time_s,erle_db\n";
  out.precision(10);
  for (const auto& p : series) out << p.time_s << ',' << p.erle_db << '\n';
}

}  // namespace infext
