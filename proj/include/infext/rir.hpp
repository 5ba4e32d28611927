#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "infext/signal.hpp"

namespace infext {

struct RoomSpec {
  double width = 0.0;
  double length = 0.0;
  double height = 0.0;

  Eigen::Vector3d dims() const { return {width, length, height}; }
  double volume() const { return width * length * height; }
  double surface() const {
    return 2.0 * (width * length + width * height + length * height);
  }
  bool operator==(const RoomSpec&) const = default;
};

struct RirRequest {
  RoomSpec room;
  double t60 = 0.0;
  Eigen::Vector3d source_pos = Eigen::Vector3d::Zero();
  Eigen::Vector3d mic_pos = Eigen::Vector3d::Zero();
  int sample_rate = 16000;
  double sound_speed = 343.0;

  double distance() const { return (source_pos - mic_pos).norm(); }
};

struct Rir {
  Eigen::VectorXd taps;
  RirRequest request;
  double beta = 0.0;  // wall reflection coefficient actually used
  int max_order = 0;

  Waveform waveform() const { return Waveform{taps, request.sample_rate}; }
};

enum class Split { kTraining, kValidation, kTest };

std::string to_string(Split split);
Split parse_split(const std::string& name);

// Room/T60/distance grid a split samples from.
struct GeometryPool {
  std::vector<RoomSpec> rooms;
  std::vector<double> t60s;
  std::vector<double> distances;
  Split split = Split::kTraining;

  static GeometryPool for_split(Split split);
};

// Sabine: alpha = 0.161 V / (S t60), beta = sqrt(1 - alpha), same for all
// six walls. Throws when alpha >= 1 ("unachievable T60").
double reflection_coefficient(const RoomSpec& room, double t60);

// Reflection coefficient whose image-method response decays with the
// requested Schroeder T60. Starts from the Sabine value and iterates on the
// design T60; results are memoized per (room, t60, rate, speed).
double calibrated_reflection_coefficient(const RoomSpec& room, double t60,
                                         int sample_rate, double sound_speed);

// Reflection order reaching every image that arrives within t60:
// sum over axes of ceil(c t60 / dim) + 2.
int default_max_order(const RoomSpec& room, double t60, double sound_speed);

// max(ceil(t60 fs), direct-path delay + 64)
Index rir_length(const RirRequest& req);

// Image-source sum for a fixed reflection coefficient over images with at
// most max_order wall reflections. Images whose arrival
// falls beyond `length` are skipped. fractional=false rounds arrivals to the
// nearest sample instead of using the windowed-sinc interpolator.
Eigen::VectorXd image_source_response(const RoomSpec& room,
                                      const Eigen::Vector3d& source,
                                      const Eigen::Vector3d& mic, double beta,
                                      Index length, int sample_rate,
                                      double sound_speed, int max_order,
                                      bool fractional = true);

// max_order < 0 selects default_max_order(). t60 == 0 gives the anechoic
// single pulse.
Rir simulate_rir(const RirRequest& req, int max_order = -1);

// Schroeder backward integration, linear fit over -5..-25 dB, extrapolated
// to 60 dB. Throws "insufficient decay" when the span is not reached.
double measured_t60(const Eigen::VectorXd& taps, int sample_rate);

struct GeometryDraw {
  RirRequest echo_path;
  RirRequest near_path;
};

GeometryDraw sample_geometry(const GeometryPool& pool, std::mt19937_64& rng,
                             int sample_rate, double sound_speed = 343.0);

nlohmann::json to_json(const RirRequest& req);
RirRequest rir_request_from_json(const nlohmann::json& j);

// Writes <path> as float32 WAV and <path with .json extension> sidecar.
void export_rir(const std::filesystem::path& wav_path, const Rir& rir);

}  // namespace infext
