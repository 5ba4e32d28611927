#include "infext/rir.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "infext/wav.hpp"

namespace infext {

std::string to_string(Split split) {
  switch (split) {
    case Split::kTraining: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train" || name == "training") return Split::kTraining;
  if (name == "val" || name == "validation") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw std::invalid_argument("unknown split '" + name + "'");
}

GeometryPool GeometryPool::for_split(Split split) {
  GeometryPool p;
  p.split = split;
  switch (split) {
    case Split::kTraining:
      p.rooms = {{2.0, 4.0, 2.7}, {6.0, 6.0, 2.7}, {10.0, 4.0, 2.7}, {7.0, 3.0, 2.7},
                 {8.0, 10.0, 2.7}};
      p.t60s = {0.20, 0.30, 0.40, 0.50};
      p.distances = {0.50, 0.70, 0.90, 1.10, 1.30, 1.50, 1.70, 1.90};
      break;
    case Split::kValidation:
      p.rooms = {{5.0, 6.0, 2.7}, {4.0, 3.0, 2.7}, {8.0, 9.0, 2.7}};
      p.t60s = {0.23, 0.33, 0.43, 0.53};
      p.distances = {0.55, 1.05, 1.55, 2.05};
      break;
    case Split::kTest:
      p.rooms = {{3.0, 5.0, 3.0}, {4.0, 6.0, 3.0}, {9.0, 9.0, 3.0}};
      p.t60s = {0.25, 0.35, 0.45};
      p.distances = {0.85, 1.35, 1.85};
      break;
  }
  return p;
}

namespace {

void check_room(const RoomSpec& room) {
  if (!(room.width > 0 && room.length > 0 && room.height > 0)) {
    throw std::invalid_argument("room dimensions must be positive");
  }
}

bool inside(const RoomSpec& room, const Eigen::Vector3d& p, double clearance = 0.0) {
  const Eigen::Vector3d d = room.dims();
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > clearance && p[i] < d[i] - clearance)) return false;
  }
  return true;
}

constexpr double kHalfWidth = 8.0;  // windowed-sinc support, samples

}  // namespace

double reflection_coefficient(const RoomSpec& room, double t60) {
  check_room(room);
  if (!(t60 > 0)) throw std::invalid_argument("reflection_coefficient needs t60 > 0");
  const double alpha = 0.161 * room.volume() / (room.surface() * t60);
  if (alpha >= 1.0) {
    throw std::invalid_argument("unachievable T60 " + std::to_string(t60) +
                                " s for this room (Sabine absorption " +
                                std::to_string(alpha) + " >= 1)");
  }
  return std::sqrt(1.0 - alpha);
}

int default_max_order(const RoomSpec& room, double t60, double sound_speed) {
  // An image within distance D has at most D / dim + 2 reflections per axis.
  const double reach = sound_speed * t60;
  int order = 0;
  for (double dim : {room.width, room.length, room.height}) {
    order += static_cast<int>(std::ceil(reach / dim)) + 2;
  }
  return order;
}

Index rir_length(const RirRequest& req) {
  const double delay = req.distance() / req.sound_speed * req.sample_rate;
  const auto decay = static_cast<Index>(std::ceil(req.t60 * req.sample_rate));
  return std::max(decay, static_cast<Index>(std::ceil(delay)) + 64);
}

Eigen::VectorXd image_source_response(const RoomSpec& room, const Eigen::Vector3d& src,
                                      const Eigen::Vector3d& mic, double beta,
                                      Index length, int fs, double c, int max_order,
                                      bool fractional) {
  check_room(room);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(length);
  const Eigen::Vector3d dims = room.dims();
  const double max_dist = (static_cast<double>(length) + kHalfWidth) * c / fs;
  if (max_order < 0) throw std::invalid_argument("max_order must be >= 0");
  // Lattice bound per axis: reflections along an axis are at least 2|m| - 1,
  // and images beyond max_dist cannot contribute.
  int bound[3];
  for (int a = 0; a < 3; ++a) {
    bound[a] = std::min(max_order / 2 + 1,
                        static_cast<int>(std::floor((max_dist + dims[a]) / (2.0 * dims[a]))) + 1);
  }
  std::vector<double> beta_pow(max_order + 1);
  beta_pow[0] = 1.0;
  for (std::size_t i = 1; i < beta_pow.size(); ++i) beta_pow[i] = beta_pow[i - 1] * beta;

  const double rot_c = std::cos(std::numbers::pi / kHalfWidth);
  const double rot_s = std::sin(std::numbers::pi / kHalfWidth);

  for (int q = 0; q < 2; ++q) {
    for (int mx = -bound[0]; mx <= bound[0]; ++mx) {
      const double dx = (1 - 2 * q) * src[0] + 2 * mx * dims[0] - mic[0];
      if (std::abs(dx) > max_dist) continue;
      const int rx = std::abs(mx - q) + std::abs(mx);
      for (int j = 0; j < 2; ++j) {
        for (int my = -bound[1]; my <= bound[1]; ++my) {
          const double dy = (1 - 2 * j) * src[1] + 2 * my * dims[1] - mic[1];
          const double dxy2 = dx * dx + dy * dy;
          if (dxy2 > max_dist * max_dist) continue;
          const int ry = std::abs(my - j) + std::abs(my);
          for (int k = 0; k < 2; ++k) {
            for (int mz = -bound[2]; mz <= bound[2]; ++mz) {
              const double dz = (1 - 2 * k) * src[2] + 2 * mz * dims[2] - mic[2];
              const double dist = std::sqrt(dxy2 + dz * dz);
              if (dist > max_dist) continue;
              const int refl = rx + ry + std::abs(mz - k) + std::abs(mz);
              if (refl > max_order) continue;
              const double amp = beta_pow[refl] / (4.0 * std::numbers::pi * dist);
              if (amp == 0.0) continue;
              const double tau = dist / c * fs;
              if (!fractional) {
                const auto idx = static_cast<Index>(std::lround(tau));
                if (idx < length) h[idx] += amp;
                continue;
              }
              const Index lo = std::max<Index>(0, static_cast<Index>(std::ceil(tau - kHalfWidth)));
              const Index hi = std::min<Index>(length - 1,
                                               static_cast<Index>(std::floor(tau + kHalfWidth)));
              if (lo > hi) continue;
              // sin(pi (m - tau)) = -(-1)^m sin(pi tau); the Hann phase
              // advances by pi/8 per tap.
              const double sin_pt = std::sin(std::numbers::pi * tau);
              double x = static_cast<double>(lo) - tau;
              double wc = std::cos(std::numbers::pi * x / kHalfWidth);
              double ws = std::sin(std::numbers::pi * x / kHalfWidth);
              double sign = (lo % 2 == 0) ? -1.0 : 1.0;
              for (Index m = lo; m <= hi; ++m) {
                const double sinc =
                    std::abs(x) < 1e-12 ? 1.0 : sign * sin_pt / (std::numbers::pi * x);
                h[m] += amp * 0.5 * (1.0 + wc) * sinc;
                const double nc = wc * rot_c - ws * rot_s;
                ws = ws * rot_c + wc * rot_s;
                wc = nc;
                x += 1.0;
                sign = -sign;
              }
            }
          }
        }
      }
    }
  }
  return h;
}

double measured_t60(const Eigen::VectorXd& taps, int sample_rate) {
  const Index n = taps.size();
  Eigen::VectorXd edc(n);
  double acc = 0.0;
  for (Index i = n - 1; i >= 0; --i) {
    acc += taps[i] * taps[i];
    edc[i] = acc;
  }
  if (n == 0 || !(acc > 0)) throw std::runtime_error("insufficient decay (no energy)");
  Index i5 = -1, i25 = -1;
  for (Index i = 0; i < n; ++i) {
    const double db = 10.0 * std::log10(edc[i] / acc);
    if (i5 < 0 && db <= -5.0) i5 = i;
    if (db <= -25.0) {
      i25 = i;
      break;
    }
  }
  // A 20 dB drop in under 5 ms is a pulse, not a reverberant decay.
  const auto min_span = static_cast<Index>(std::ceil(0.005 * sample_rate));
  if (i5 < 0 || i25 < 0 || i25 - i5 < min_span) {
    throw std::runtime_error("insufficient decay");
  }
  double st = 0, sd = 0, stt = 0, std_ = 0;
  const double m = static_cast<double>(i25 - i5 + 1);
  for (Index i = i5; i <= i25; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double d = 10.0 * std::log10(edc[i] / acc);
    st += t;
    sd += d;
    stt += t * t;
    std_ += t * d;
  }
  const double slope = (m * std_ - st * sd) / (m * stt - st * st);
  if (!(slope < 0)) throw std::runtime_error("insufficient decay");
  return -60.0 / slope;
}

double calibrated_reflection_coefficient(const RoomSpec& room, double t60, int sample_rate,
                                         double sound_speed) {
  check_room(room);
  const double sabine = reflection_coefficient(room, t60);
  using Key = std::tuple<double, double, double, double, int, double>;
  static std::mutex mutex;
  static std::map<Key, double> memo;
  const Key key{room.width, room.length, room.height, t60, sample_rate, sound_speed};
  {
    std::lock_guard lock(mutex);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
  }
  // Fixed, asymmetric reference placement; the decay rate depends only weakly
  // on the actual positions.
  const Eigen::Vector3d dims = room.dims();
  const Eigen::Vector3d mic = dims.cwiseProduct(Eigen::Vector3d(0.31, 0.43, 0.47));
  const Eigen::Vector3d src = dims.cwiseProduct(Eigen::Vector3d(0.62, 0.58, 0.53));
  const auto length = static_cast<Index>(std::ceil(t60 * sample_rate));
  const int order = default_max_order(room, t60, sound_speed);
  auto beta_for = [&](double design) {
    const double alpha = std::min(0.9999, 0.161 * room.volume() / (room.surface() * design));
    return std::sqrt(1.0 - alpha);
  };
  double design = t60;
  double beta = sabine;
  try {
    for (int it = 0; it < 12; ++it) {
      beta = beta_for(design);
      const Eigen::VectorXd h = image_source_response(room, src, mic, beta, length, sample_rate,
                                                      sound_speed, order, false);
      const double got = measured_t60(h, sample_rate);
      if (std::abs(got - t60) < 0.005 * t60) break;
      design *= t60 / got;
    }
  } catch (const std::runtime_error&) {
    beta = sabine;
  }
  std::lock_guard lock(mutex);
  memo.emplace(key, beta);
  return beta;
}

Rir simulate_rir(const RirRequest& req, int max_order) {
  check_room(req.room);
  if (req.t60 < 0) throw std::invalid_argument("t60 must be >= 0");
  if (req.sample_rate <= 0 || req.sound_speed <= 0) {
    throw std::invalid_argument("sample rate and sound speed must be positive");
  }
  if (!inside(req.room, req.source_pos) || !inside(req.room, req.mic_pos)) {
    throw std::invalid_argument("source and microphone must lie strictly inside the room");
  }
  Rir rir;
  rir.request = req;
  if (req.t60 == 0.0) {
    rir.beta = 0.0;
    rir.max_order = 0;
  } else {
    rir.beta = calibrated_reflection_coefficient(req.room, req.t60, req.sample_rate,
                                                 req.sound_speed);
    rir.max_order = max_order >= 0 ? max_order
                                   : default_max_order(req.room, req.t60, req.sound_speed);
  }
  rir.taps = image_source_response(req.room, req.source_pos, req.mic_pos, rir.beta,
                                   rir_length(req), req.sample_rate, req.sound_speed,
                                   rir.max_order);
  return rir;
}

GeometryDraw sample_geometry(const GeometryPool& pool, std::mt19937_64& rng, int sample_rate,
                             double sound_speed) {
  if (pool.rooms.empty() || pool.t60s.empty() || pool.distances.empty()) {
    throw std::invalid_argument("empty geometry pool");
  }
  auto pick = [&](std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  };
  const RoomSpec room = pool.rooms[pick(pool.rooms.size())];
  const double t60 = pool.t60s[pick(pool.t60s.size())];
  const double d_echo = pool.distances[pick(pool.distances.size())];
  const double d_near = pool.distances[pick(pool.distances.size())];

  const Eigen::Vector3d dims = room.dims();
  constexpr double kMicClearance = 0.5;
  constexpr double kSourceClearance = 0.3;
  Eigen::Vector3d mic;
  for (int i = 0; i < 3; ++i) {
    if (dims[i] <= 2 * kMicClearance) {
      throw std::invalid_argument("room too small for microphone clearance");
    }
    mic[i] = std::uniform_real_distribution<double>(kMicClearance, dims[i] - kMicClearance)(rng);
  }
  auto place = [&](double distance) {
    std::normal_distribution<double> normal;
    for (int attempt = 0; attempt < 100; ++attempt) {
      Eigen::Vector3d u(normal(rng), normal(rng), normal(rng));
      const double norm = u.norm();
      if (norm < 1e-12) continue;
      const Eigen::Vector3d p = mic + distance * u / norm;
      if (inside(room, p, kSourceClearance)) return p;
    }
    throw std::runtime_error("cannot place a source at " + std::to_string(distance) +
                             " m inside the room after 100 attempts");
  };
  GeometryDraw draw;
  for (RirRequest* r : {&draw.echo_path, &draw.near_path}) {
    r->room = room;
    r->t60 = t60;
    r->mic_pos = mic;
    r->sample_rate = sample_rate;
    r->sound_speed = sound_speed;
  }
  draw.echo_path.source_pos = place(d_echo);
  draw.near_path.source_pos = place(d_near);
  return draw;
}

nlohmann::json to_json(const RirRequest& req) {
  return {
      {"room", {req.room.width, req.room.length, req.room.height}},
      {"t60", req.t60},
      {"source_pos", {req.source_pos[0], req.source_pos[1], req.source_pos[2]}},
      {"mic_pos", {req.mic_pos[0], req.mic_pos[1], req.mic_pos[2]}},
      {"distance", req.distance()},
      {"sample_rate", req.sample_rate},
      {"sound_speed", req.sound_speed},
  };
}

RirRequest rir_request_from_json(const nlohmann::json& j) {
  RirRequest r;
  const auto& room = j.at("room");
  r.room = {room.at(0).get<double>(), room.at(1).get<double>(), room.at(2).get<double>()};
  r.t60 = j.at("t60").get<double>();
  for (int i = 0; i < 3; ++i) {
    r.source_pos[i] = j.at("source_pos").at(i).get<double>();
    r.mic_pos[i] = j.at("mic_pos").at(i).get<double>();
  }
  r.sample_rate = j.at("sample_rate").get<int>();
  r.sound_speed = j.value("sound_speed", 343.0);
  return r;
}

void export_rir(const std::filesystem::path& wav_path, const Rir& rir) {
  write_wav(wav_path, rir.waveform(), WavFormat::kFloat32);
  nlohmann::json meta = to_json(rir.request);
  meta["beta"] = rir.beta;
  meta["max_order"] = rir.max_order;
  meta["length"] = rir.taps.size();
  std::filesystem::path sidecar = wav_path;
  sidecar.replace_extension(".json");
  std::ofstream out(sidecar);
  out << meta.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + sidecar.string());
}

}  // namespace infext
