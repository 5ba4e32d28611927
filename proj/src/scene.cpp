#include "infext/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "infext/wav.hpp"

namespace infext {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDegenerateFloor = 1e-12;

struct ClassName {
  SourceClass cls;
  const char* name;
};
constexpr ClassName kClassNames[] = {
    {SourceClass::kSpeech, "speech"}, {SourceClass::kGuitar, "guitar"},
    {SourceClass::kBass, "bass"},     {SourceClass::kPiano, "piano"},
    {SourceClass::kRain, "rain"},     {SourceClass::kEngine, "engine"},
};

Eigen::VectorXd unit_rms(Eigen::VectorXd x) {
  const double rms = std::sqrt(mean_power(x));
  if (!(rms > 0)) throw std::runtime_error("synthesized silent source");
  return x / rms;
}

// Two-pole resonator, in place.
void resonate(Eigen::VectorXd& x, double fc, double radius, int fs) {
  const double w = kTwoPi * fc / fs;
  const double a1 = 2.0 * radius * std::cos(w);
  const double a2 = -radius * radius;
  double y1 = 0, y2 = 0;
  for (Index t = 0; t < x.size(); ++t) {
    const double y = x[t] + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    x[t] = y;
  }
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

std::string to_string(SourceClass c) {
  for (const auto& cn : kClassNames) {
    if (cn.cls == c) return cn.name;
  }
  return "speech";
}

SourceClass parse_source_class(const std::string& name) {
  for (const auto& cn : kClassNames) {
    if (name == cn.name) return cn.cls;
  }
  throw std::invalid_argument("unknown source class '" + name + "'");
}

bool is_speech(SourceClass c) { return c == SourceClass::kSpeech; }

std::string to_string(Subset s) {
  switch (s) {
    case Subset::kSS: return "SS";
    case Subset::kSN: return "SN";
    case Subset::kNS: return "NS";
    case Subset::kNN: return "NN";
  }
  return "SS";
}

Subset parse_subset(const std::string& name) {
  if (name == "SS") return Subset::kSS;
  if (name == "SN") return Subset::kSN;
  if (name == "NS") return Subset::kNS;
  if (name == "NN") return Subset::kNN;
  throw std::invalid_argument("unknown subset '" + name + "' (expected SS, SN, NS or NN)");
}

bool target_is_speech(Subset s) { return s == Subset::kSS || s == Subset::kSN; }
bool interferer_is_speech(Subset s) { return s == Subset::kSS || s == Subset::kNS; }

ToneStackParams tone_stack_params(std::uint64_t seed, double f0_min, double f0_max) {
  std::mt19937_64 rng(seed);
  ToneStackParams p;
  p.f0 = std::exp(uniform(rng, std::log(f0_min), std::log(f0_max)));
  std::vector<int> pool = {1, 2, 3, 4, 5, 6};
  std::shuffle(pool.begin(), pool.end(), rng);
  p.harmonics.assign(pool.begin(), pool.begin() + 3);
  std::sort(p.harmonics.begin(), p.harmonics.end());
  for (int i = 0; i < 3; ++i) {
    p.amplitudes.push_back(uniform(rng, 0.3, 1.0));
    p.phases.push_back(uniform(rng, 0.0, kTwoPi));
  }
  return p;
}

Waveform tone_stack(const ToneStackParams& p, double duration, int fs) {
  const auto n = static_cast<Index>(std::llround(duration * fs));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < p.harmonics.size(); ++k) {
    const double w = kTwoPi * p.f0 * p.harmonics[k] / fs;
    for (Index t = 0; t < n; ++t) x[t] += p.amplitudes[k] * std::sin(w * t + p.phases[k]);
  }
  return Waveform{unit_rms(std::move(x)), fs};
}

namespace {

Waveform am_noise(std::uint64_t seed, double duration, int fs) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Index>(std::llround(duration * fs));
  std::normal_distribution<double> normal;
  const double nyq = 0.5 * fs;
  // Voiced excitation (harmonic series with slow vibrato) plus breath noise,
  // shaped by two formant-like resonances.
  const double f0 = uniform(rng, 90.0, 240.0);
  const double vib_rate = uniform(rng, 3.0, 6.0);
  const double vib_depth = uniform(rng, 0.01, 0.04);
  const double f1 = uniform(rng, 300.0, std::min(900.0, 0.3 * nyq * 2));
  const double f2 = uniform(rng, 900.0, std::min(2500.0, 0.42 * fs));
  const double noise_mix = uniform(rng, 0.2, 0.5);
  Eigen::VectorXd x(n);
  double phase = 0.0;
  const int n_harm = std::max(1, static_cast<int>(0.45 * fs / f0));
  for (Index t = 0; t < n; ++t) {
    const double ts = static_cast<double>(t) / fs;
    phase += kTwoPi * f0 * (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * ts)) / fs;
    double v = 0;
    for (int k = 1; k <= std::min(n_harm, 12); ++k) v += std::sin(k * phase) / k;
    x[t] = v + noise_mix * normal(rng);
  }
  Eigen::VectorXd a = x, b = x;
  resonate(a, f1, 0.97, fs);
  resonate(b, f2, 0.95, fs);
  x = a / a.cwiseAbs().maxCoeff() + 0.6 * b / b.cwiseAbs().maxCoeff();
  // Syllabic modulation at 2-8 Hz with pauses.
  const double fm = uniform(rng, 2.0, 8.0);
  const double phi = uniform(rng, 0.0, kTwoPi);
  double gate_until = 0.0;
  bool on = true;
  for (Index t = 0; t < n; ++t) {
    const double ts = static_cast<double>(t) / fs;
    if (ts >= gate_until) {
      on = !on || uniform(rng, 0.0, 1.0) < 0.8;
      gate_until = ts + (on ? uniform(rng, 0.4, 1.2) : uniform(rng, 0.1, 0.4));
    }
    const double m = 0.5 * (1.0 + std::sin(kTwoPi * fm * ts + phi));
    x[t] *= on ? m * m : 0.02 * m * m;
  }
  return Waveform{unit_rms(std::move(x)), fs};
}

Waveform filtered_noise(std::uint64_t seed, double duration, int fs) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Index>(std::llround(duration * fs));
  std::normal_distribution<double> normal;
  const double fc = uniform(rng, 600.0, std::min(3500.0, 0.4 * fs));
  const double drop_rate = uniform(rng, 20.0, 80.0);  // droplets per second
  Eigen::VectorXd x(n);
  for (Index t = 0; t < n; ++t) x[t] = normal(rng);
  resonate(x, fc, 0.9, fs);
  x /= x.cwiseAbs().maxCoeff();
  std::exponential_distribution<double> gap(drop_rate);
  double next = gap(rng);
  while (next < duration) {
    const auto start = static_cast<Index>(next * fs);
    const double amp = uniform(rng, 0.5, 2.0);
    const double decay = uniform(rng, 0.001, 0.004) * fs;
    for (Index k = 0; k < static_cast<Index>(6 * decay) && start + k < n; ++k) {
      x[start + k] += amp * std::exp(-k / decay) * normal(rng);
    }
    next += gap(rng);
  }
  return Waveform{unit_rms(std::move(x)), fs};
}

Waveform chirp(std::uint64_t seed, double duration, int fs) {
  std::mt19937_64 rng(seed);
  const auto n = static_cast<Index>(std::llround(duration * fs));
  const double fa = uniform(rng, 30.0, 120.0);
  const double fb = uniform(rng, 30.0, 120.0);
  const double firing = uniform(rng, 10.0, 30.0);
  Eigen::VectorXd x(n);
  double phase = 0.0;
  for (Index t = 0; t < n; ++t) {
    const double ts = static_cast<double>(t) / fs;
    const double f0 = fa + (fb - fa) * ts / duration;
    phase += kTwoPi * f0 / fs;
    double v = 0;
    for (int k = 1; k <= 6; ++k) {
      if (k * f0 < 0.45 * fs) v += std::sin(k * phase) / k;
    }
    x[t] = v * (0.7 + 0.3 * std::sin(kTwoPi * firing * ts));
  }
  return Waveform{unit_rms(std::move(x)), fs};
}

}  // namespace

Waveform synth_source(SynthKind kind, std::uint64_t seed, double duration, int fs) {
  if (!(duration > 0)) throw std::invalid_argument("synth_source: duration must be positive");
  if (fs <= 0) throw std::invalid_argument("synth_source: sample rate must be positive");
  switch (kind) {
    case SynthKind::kToneStack: {
      const double f0_max = std::min(800.0, 0.45 * fs / 6.0);
      return tone_stack(tone_stack_params(seed, std::min(80.0, f0_max), f0_max), duration, fs);
    }
    case SynthKind::kFilteredNoise: return filtered_noise(seed, duration, fs);
    case SynthKind::kChirp: return chirp(seed, duration, fs);
    case SynthKind::kAmNoise: return am_noise(seed, duration, fs);
  }
  throw std::invalid_argument("unknown synth kind");
}

Waveform synth_class_source(SourceClass cls, std::uint64_t seed, double duration, int fs) {
  const double top = 0.45 * fs / 6.0;  // keep every harmonic below Nyquist
  auto stack = [&](double lo, double hi) {
    hi = std::min(hi, top);
    lo = std::min(lo, hi);
    return tone_stack(tone_stack_params(seed, lo, hi), duration, fs);
  };
  switch (cls) {
    case SourceClass::kSpeech: return synth_source(SynthKind::kAmNoise, seed, duration, fs);
    case SourceClass::kGuitar: return stack(82.0, 330.0);
    case SourceClass::kBass: return stack(41.0, 110.0);
    case SourceClass::kPiano: return stack(130.0, 1000.0);
    case SourceClass::kRain: return synth_source(SynthKind::kFilteredNoise, seed, duration, fs);
    case SourceClass::kEngine: return synth_source(SynthKind::kChirp, seed, duration, fs);
  }
  throw std::invalid_argument("unknown source class");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

SourceBank SourceBank::synthetic(Split split, int per_class, double duration, int fs,
                                 std::uint64_t seed) {
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  SourceBank bank;
  bank.sample_rate = fs;
  const std::uint64_t split_seed = mix_seed(seed, 1000 + static_cast<std::uint64_t>(split));
  for (const auto& cn : kClassNames) {
    for (int i = 0; i < per_class; ++i) {
      const std::uint64_t s =
          mix_seed(mix_seed(split_seed, static_cast<std::uint64_t>(cn.cls)), i);
      bank.entries.push_back({std::string(cn.name) + "_" + std::to_string(i), cn.cls,
                              synth_class_source(cn.cls, s, duration, fs), "synthetic"});
    }
  }
  return bank;
}

SourceBank SourceBank::from_directory(const std::filesystem::path& root, int fs,
                                      double min_duration) {
  namespace fs_ = std::filesystem;
  SourceBank bank;
  bank.sample_rate = fs;
  for (const auto& cn : kClassNames) {
    const fs_::path dir = root / cn.name;
    if (!fs_::is_directory(dir)) continue;
    std::vector<fs_::path> files;
    for (const auto& e : fs_::directory_iterator(dir)) {
      if (e.path().extension() == ".wav") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Waveform w = read_wav(f, fs);
      if (w.duration() < min_duration) continue;
      bank.entries.push_back({f.stem().string(), cn.cls, std::move(w), f.string()});
    }
  }
  if (bank.entries.empty()) {
    throw std::runtime_error("no usable WAV sources under " + root.string());
  }
  return bank;
}

std::vector<const SourceEntry*> SourceBank::select(bool speech) const {
  std::vector<const SourceEntry*> out;
  for (const auto& e : entries) {
    if (is_speech(e.cls) == speech) out.push_back(&e);
  }
  return out;
}

AerScene mix_scene(const Waveform& far_end, const Waveform& near_src, const Rir& echo_rir,
                   const Rir& near_rir, double sir_db, Subset tag) {
  const Index n = far_end.size();
  if (n == 0) throw std::invalid_argument("mix_scene: empty far-end signal");
  if (near_src.size() < n) throw std::invalid_argument("mix_scene: near-end source too short");
  if (!std::isfinite(sir_db)) throw std::invalid_argument("mix_scene: SIR must be finite");
  const int fs = far_end.sample_rate;
  if (near_src.sample_rate != fs || echo_rir.request.sample_rate != fs ||
      near_rir.request.sample_rate != fs) {
    throw std::invalid_argument("mix_scene: sample rate mismatch");
  }
  Eigen::VectorXd echo = fft_convolve(far_end.samples, echo_rir.taps).head(n);
  Eigen::VectorXd near = fft_convolve(near_src.samples.head(n), near_rir.taps).head(n);
  const double p_echo = mean_power(echo);
  const double p_near = mean_power(near);
  if (p_echo < kDegenerateFloor || p_near < kDegenerateFloor) {
    throw std::runtime_error("degenerate source");
  }
  near *= std::sqrt(p_echo / (p_near * std::pow(10.0, sir_db / 10.0)));
  AerScene s;
  s.mixture = Waveform{echo + near, fs};
  s.echo = Waveform{std::move(echo), fs};
  s.near_end = Waveform{std::move(near), fs};
  s.reference = Waveform{far_end.samples, fs};
  s.subset = tag;
  s.sir_db = sir_db;
  s.meta["echo_path"] = to_json(echo_rir.request);
  s.meta["near_path"] = to_json(near_rir.request);
  return s;
}

AerScene build_switch_scenario(const Waveform& speaker_a, const Waveform& speaker_b,
                               const Rir& rir_a, const Rir& rir_b, const Waveform& near_src,
                               const Rir& near_rir, double sir_db, Index segment) {
  if (segment < 1 || speaker_a.size() < segment || speaker_b.size() < segment) {
    throw std::invalid_argument("build_switch_scenario: speaker segments too short");
  }
  const int fs = speaker_a.sample_rate;
  if (speaker_b.sample_rate != fs || rir_a.request.sample_rate != fs ||
      rir_b.request.sample_rate != fs) {
    throw std::invalid_argument("build_switch_scenario: sample rate mismatch");
  }
  const Index n = 2 * segment;
  Eigen::VectorXd far(n);
  far << speaker_a.samples.head(segment), speaker_b.samples.head(segment);
  Eigen::VectorXd echo(n);
  echo << fft_convolve(speaker_a.samples.head(segment), rir_a.taps).head(segment),
      fft_convolve(speaker_b.samples.head(segment), rir_b.taps).head(segment);
  // Reuse mix_scene for the near-end path and SIR scaling with an identity
  // echo path, then substitute the two-path echo.
  Rir identity = rir_a;
  identity.taps = Eigen::VectorXd::Unit(1, 0);
  AerScene s = mix_scene(Waveform{echo, fs}, near_src, identity, near_rir, sir_db, Subset::kSS);
  s.reference = Waveform{std::move(far), fs};
  s.meta["echo_path"] = to_json(rir_a.request);
  s.meta["echo_path_b"] = to_json(rir_b.request);
  s.meta["switch_sample"] = segment;
  return s;
}

namespace {

struct Draw {
  Subset subset;
  double sir;
  const SourceEntry* far;
  const SourceEntry* near;
  Index far_start;
  Index near_start;
};

Draw draw_sources(const SourceBank& bank, std::mt19937_64& rng, const SceneConfig& cfg,
                  std::optional<Subset> force) {
  const auto speech = bank.select(true);
  const auto other = bank.select(false);
  if (speech.empty() || other.empty()) {
    throw std::invalid_argument("source bank needs at least one speech and one non-speech entry");
  }
  Draw d{};
  const auto tag_index = std::uniform_int_distribution<int>(0, 3)(rng);
  d.subset = force.value_or(static_cast<Subset>(tag_index));
  d.sir = uniform(rng, cfg.sir_min, cfg.sir_max);
  const auto& far_pool = target_is_speech(d.subset) ? speech : other;
  const auto& near_pool = interferer_is_speech(d.subset) ? speech : other;
  auto pick = [&](const std::vector<const SourceEntry*>& pool) {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  };
  d.far = pick(far_pool);
  d.near = pick(near_pool);
  // Far-end and near-end talkers are different sources whenever possible.
  for (int retry = 0; retry < 8 && d.near == d.far && near_pool.size() > 1; ++retry) {
    d.near = pick(near_pool);
  }
  const Index n = cfg.scene_samples();
  auto crop = [&](const SourceEntry* e) {
    if (e->wave.size() < n) {
      throw std::invalid_argument("source '" + e->name + "' shorter than the scene duration");
    }
    return std::uniform_int_distribution<Index>(0, e->wave.size() - n)(rng);
  };
  d.far_start = crop(d.far);
  d.near_start = crop(d.near);
  return d;
}

AerScene finish(const Draw& d, const Rir& echo_rir, const Rir& near_rir, const SceneConfig& cfg) {
  const Index n = cfg.scene_samples();
  const int fs = cfg.sample_rate;
  AerScene s = mix_scene(Waveform{d.far->wave.samples.segment(d.far_start, n), fs},
                         Waveform{d.near->wave.samples.segment(d.near_start, n), fs}, echo_rir,
                         near_rir, d.sir, d.subset);
  s.meta["far_source"] = d.far->name;
  s.meta["near_source"] = d.near->name;
  s.meta["far_class"] = to_string(d.far->cls);
  s.meta["near_class"] = to_string(d.near->cls);
  return s;
}

}  // namespace

AerScene sample_scene(const SourceBank& bank, const GeometryPool& pool, std::mt19937_64& rng,
                      const SceneConfig& cfg, std::optional<Subset> force) {
  const Draw d = draw_sources(bank, rng, cfg, force);
  const GeometryDraw g = sample_geometry(pool, rng, cfg.sample_rate, cfg.sound_speed);
  return finish(d, simulate_rir(g.echo_path), simulate_rir(g.near_path), cfg);
}

SceneGenerator::SceneGenerator(SceneConfig cfg, Split split)
    : SceneGenerator(cfg, split,
                     SourceBank::synthetic(split, cfg.sources_per_class, cfg.duration + 1.0,
                                           cfg.sample_rate, cfg.seed)) {}

SceneGenerator::SceneGenerator(SceneConfig cfg, Split split, SourceBank bank)
    : cfg_(cfg), split_(split), bank_(std::move(bank)), pool_(GeometryPool::for_split(split)) {
  if (bank_.sample_rate != cfg_.sample_rate) {
    throw std::invalid_argument("source bank sample rate does not match scene config");
  }
  build_rir_bank();
}

void SceneGenerator::build_rir_bank() {
  const std::uint64_t base = mix_seed(cfg_.seed, 5000 + static_cast<std::uint64_t>(split_));
  for (int i = 0; i < cfg_.rir_bank_size; ++i) {
    auto rng = keyed_rng(base, static_cast<std::uint64_t>(i));
    const GeometryDraw g = sample_geometry(pool_, rng, cfg_.sample_rate, cfg_.sound_speed);
    rir_bank_.emplace_back(simulate_rir(g.echo_path), simulate_rir(g.near_path));
  }
}

AerScene SceneGenerator::sample(std::mt19937_64& rng, std::optional<Subset> force) const {
  if (rir_bank_.empty()) return sample_scene(bank_, pool_, rng, cfg_, force);
  const Draw d = draw_sources(bank_, rng, cfg_, force);
  const auto k = std::uniform_int_distribution<std::size_t>(0, rir_bank_.size() - 1)(rng);
  AerScene s = finish(d, rir_bank_[k].first, rir_bank_[k].second, cfg_);
  s.meta["rir_bank_index"] = k;
  return s;
}

AerScene SceneStream::at(Index i) const {
  if (i < 0 || i >= count_) throw std::out_of_range("scene index out of range");
  auto rng = keyed_rng(seed_, static_cast<std::uint64_t>(i));
  AerScene s = gen_->sample(rng, force_);
  s.meta["stream_seed"] = seed_;
  s.meta["index"] = i;
  return s;
}

bool SceneStream::next(AerScene& out) {
  if (cursor_ >= count_) return false;
  out = at(cursor_++);
  return true;
}

SceneStream dataset_iter(const SceneGenerator& gen, std::uint64_t epoch_seed, Index count) {
  if (count <= 0) throw std::invalid_argument("dataset_iter: count must be positive");
  return SceneStream(gen, epoch_seed, count);
}

void write_scene(const std::filesystem::path& dir, const AerScene& scene) {
  std::filesystem::create_directories(dir);
  write_wav(dir / "mixture.wav", scene.mixture);
  write_wav(dir / "echo.wav", scene.echo);
  write_wav(dir / "near.wav", scene.near_end);
  write_wav(dir / "ref.wav", scene.reference);
  nlohmann::json meta = scene.meta;
  meta["subset"] = to_string(scene.subset);
  meta["sir_db"] = scene.sir_db;
  meta["sample_rate"] = scene.sample_rate();
  meta["samples"] = scene.size();
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / "meta.json").string());
}

AerScene read_scene(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw std::runtime_error("missing " + (dir / "meta.json").string());
  AerScene s;
  s.meta = nlohmann::json::parse(in);
  const int fs = s.meta.at("sample_rate").get<int>();
  s.mixture = read_wav(dir / "mixture.wav", fs);
  s.echo = read_wav(dir / "echo.wav", fs);
  s.near_end = read_wav(dir / "near.wav", fs);
  s.reference = read_wav(dir / "ref.wav", fs);
  s.subset = parse_subset(s.meta.at("subset").get<std::string>());
  s.sir_db = s.meta.at("sir_db").get<double>();
  if (s.echo.size() != s.mixture.size() || s.near_end.size() != s.mixture.size()) {
    throw std::runtime_error(dir.string() + ": scene signals differ in length");
  }
  return s;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : entries) {
    nlohmann::json j = e.extra;
    j["id"] = e.id;
    j["dir"] = e.dir.generic_string();
    j["subset"] = to_string(e.subset);
    j["sir_db"] = e.sir_db;
    out << j.dump() << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.dir = j.at("dir").get<std::string>();
    e.subset = parse_subset(j.at("subset").get<std::string>());
    e.sir_db = j.value("sir_db", 0.0);
    for (const char* k : {"id", "dir", "subset", "sir_db"}) j.erase(k);
    e.extra = std::move(j);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace infext
