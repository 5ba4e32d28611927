#include "infext/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "infext/plot.hpp"

namespace infext {

RoomSpec parse_room(const std::string& text) {
  RoomSpec r;
  char x1 = 0, x2 = 0;
  std::istringstream in(text);
  if (!(in >> r.width >> x1 >> r.length >> x2 >> r.height) || x1 != 'x' || x2 != 'x' ||
      !(in >> std::ws).eof()) {
    throw std::invalid_argument("room must look like WxLxH, got '" + text + "'");
  }
  if (!(r.width > 0 && r.length > 0 && r.height > 0)) {
    throw std::invalid_argument("room dimensions must be positive");
  }
  return r;
}

Rir cmd_gen_rir(const GenRirArgs& args) {
  if (args.t60 < 0) throw std::invalid_argument("t60 must be >= 0");
  if (!(args.distance > 0)) throw std::invalid_argument("distance must be positive");
  GeometryPool pool;
  pool.rooms = {args.room};
  pool.t60s = {args.t60};
  pool.distances = {args.distance};
  auto rng = keyed_rng(args.seed, 0);
  const GeometryDraw g = sample_geometry(pool, rng, args.sample_rate);
  Rir rir = simulate_rir(g.echo_path);
  if (args.out.has_parent_path()) std::filesystem::create_directories(args.out.parent_path());
  export_rir(args.out, rir);
  return rir;
}

namespace {

bool inside_with_clearance(const RoomSpec& room, const Eigen::Vector3d& p, double clearance) {
  const Eigen::Vector3d d = room.dims();
  for (int i = 0; i < 3; ++i) {
    if (p[i] < clearance || p[i] > d[i] - clearance) return false;
  }
  return true;
}

// Same microphone, loudspeaker moved to a new distance.
RirRequest relocate_source(const RirRequest& base, double distance, std::mt19937_64& rng) {
  RirRequest r = base;
  const Eigen::Vector3d dir = (base.source_pos - base.mic_pos).normalized();
  r.source_pos = base.mic_pos + distance * dir;
  std::normal_distribution<double> normal;
  for (int attempt = 0; attempt < 100 && !inside_with_clearance(r.room, r.source_pos, 0.3);
       ++attempt) {
    Eigen::Vector3d u(normal(rng), normal(rng), normal(rng));
    r.source_pos = base.mic_pos + distance * u.normalized();
  }
  if (!inside_with_clearance(r.room, r.source_pos, 0.3)) {
    throw std::runtime_error("cannot place the second loudspeaker inside the room");
  }
  return r;
}

}  // namespace

AerScene make_switch_scene(int sample_rate, double segment_s, std::uint64_t seed, double sir_db) {
  const Index segment = static_cast<Index>(std::llround(segment_s * sample_rate));
  const SourceBank bank =
      SourceBank::synthetic(Split::kTest, 3, 2 * segment_s + 1.0, sample_rate, seed);
  const auto speech = bank.select(true);
  auto rng = keyed_rng(seed, 0x5717c4);
  GeometryPool pool = GeometryPool::for_split(Split::kTest);
  pool.distances = {0.85};
  const GeometryDraw g = sample_geometry(pool, rng, sample_rate);
  const Rir rir_a = simulate_rir(g.echo_path);
  const Rir rir_b = simulate_rir(relocate_source(g.echo_path, 1.35, rng));
  const Rir near = simulate_rir(g.near_path);
  AerScene s = build_switch_scenario(speech[0]->wave, speech[1]->wave, rir_a, rir_b,
                                     speech[2]->wave, near, sir_db, segment);
  s.meta["far_source_a"] = speech[0]->name;
  s.meta["far_source_b"] = speech[1]->name;
  s.meta["near_source"] = speech[2]->name;
  return s;
}

std::vector<ManifestEntry> cmd_gen_scenes(const GenScenesArgs& args) {
  if (args.count < 1) throw std::invalid_argument("count must be >= 1");
  if (args.switch_scenario && args.subset) {
    throw std::invalid_argument("--subset cannot be combined with --switch-scenario");
  }
  std::filesystem::create_directories(args.out);
  const std::string hash = config_hash(args.config);
  std::vector<ManifestEntry> entries;
  std::optional<SceneGenerator> gen;
  if (!args.switch_scenario) {
    SceneConfig sc = args.config.data;
    if (!args.config.paths.source_dir.empty()) {
      gen.emplace(sc, args.split,
                  SourceBank::from_directory(
                      std::filesystem::path(args.config.paths.source_dir) / to_string(args.split),
                      sc.sample_rate, sc.duration));
    } else {
      gen.emplace(sc, args.split);
    }
  }
  for (Index i = 0; i < args.count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05lld", static_cast<long long>(i));
    AerScene s;
    if (args.switch_scenario) {
      s = make_switch_scene(args.config.data.sample_rate, 2.0,
                            mix_seed(args.seed, static_cast<std::uint64_t>(i)));
    } else {
      s = SceneStream(*gen, args.seed, args.count, args.subset).at(i);
    }
    s.meta["config_hash"] = hash;
    s.meta["split"] = to_string(args.split);
    write_scene(args.out / name, s);
    ManifestEntry e;
    e.id = name;
    e.dir = name;
    e.subset = s.subset;
    e.sir_db = s.sir_db;
    e.extra["config_hash"] = hash;
    if (args.switch_scenario) e.extra["switch_scenario"] = true;
    entries.push_back(std::move(e));
  }
  write_manifest(args.out / "manifest.jsonl", entries);
  return entries;
}

TrainResult cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                      std::ostream* log) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "config.ini");
    out << emit_config(cfg);
  }
  auto make_gen = [&](Split split) {
    if (cfg.paths.source_dir.empty()) return SceneGenerator(cfg.data, split);
    return SceneGenerator(cfg.data, split,
                          SourceBank::from_directory(
                              std::filesystem::path(cfg.paths.source_dir) / to_string(split),
                              cfg.data.sample_rate, cfg.data.duration));
  };
  const SceneGenerator train_gen = make_gen(Split::kTraining);
  const SceneGenerator val_gen = make_gen(Split::kValidation);
  TrainOptions opts;
  opts.out_dir = out_dir;
  opts.init_seed = cfg.init_seed;
  if (!cfg.paths.resume.empty()) opts.resume = cfg.paths.resume;
  opts.extra = {{"config_hash", config_hash(cfg)}};
  if (log) {
    *log << "params " << param_count(cfg.model) << ", config " << config_hash(cfg) << '\n';
    opts.on_epoch = [log](const EpochRecord& r) {
      *log << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << " lr "
           << r.lr << " (" << std::fixed << std::setprecision(1) << r.seconds << " s)"
           << std::defaultfloat << std::setprecision(6) << std::endl;
    };
  }
  return train(cfg.model, cfg.train, train_gen, val_gen, opts);
}

EchoEstimator::EchoEstimator(const std::string& source) {
  if (source == "stub:oracle") {
    stub_ = Stub::kOracle;
  } else if (source == "stub:zero") {
    stub_ = Stub::kZero;
  } else if (source.rfind("stub:", 0) == 0) {
    throw std::invalid_argument("unknown stub '" + source + "' (expected stub:oracle or stub:zero)");
  } else {
    ckpt_ = load_checkpoint(source);
  }
}

Waveform EchoEstimator::estimate(const AerScene& scene) const {
  switch (stub_) {
    case Stub::kOracle: return scene.echo;
    case Stub::kZero:
      return Waveform{Eigen::VectorXd::Zero(scene.size()), scene.sample_rate()};
    case Stub::kNone: break;
  }
  return infer(ckpt_.params, ckpt_.model, scene.mixture, scene.reference);
}

void write_subset_table(const std::filesystem::path& path, const MetricReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto means = report.subset_means();
  out << "SS,SN,NS,NN,mean\n" << std::fixed << std::setprecision(4);
  for (const char* s : {"SS", "SN", "NS", "NN"}) {
    auto it = means.find(s);
    if (it == means.end()) {
      out << "nan,";
    } else {
      out << it->second << ',';
    }
  }
  out << report.overall_mean() << '\n';
}

MetricReport cmd_eval(const EvalArgs& args) {
  const EchoEstimator estimator(args.checkpoint);
  const auto entries = read_manifest(args.manifest);
  const auto root = args.manifest.parent_path();
  MetricReport report;
  for (const auto& e : entries) {
    const AerScene scene = read_scene(root / e.dir);
    if (!estimator.is_stub() && scene.sample_rate() != estimator.checkpoint().model.sample_rate) {
      throw std::invalid_argument("scene " + e.id + " sample rate does not match the checkpoint");
    }
    report.examples.push_back(evaluate_example(e.id, scene, estimator.estimate(scene)));
  }
  std::filesystem::create_directories(args.out);
  nlohmann::json j = report.to_json();
  j["checkpoint"] = args.checkpoint;
  if (!estimator.is_stub()) j["config_hash"] = estimator.checkpoint().extra.value("config_hash", "");
  {
    std::ofstream out(args.out / "report.json");
    out << j.dump(2) << '\n';
  }
  {
    std::ofstream out(args.out / "examples.json");
    out << j["examples"].dump(2) << '\n';
  }
  write_subset_table(args.out / "table.csv", report);
  return report;
}

void write_waveform_csv(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "time_s,value\n";
  out.precision(9);
  for (Index i = 0; i < w.size(); ++i) {
    out << static_cast<double>(i) / w.sample_rate << ',' << w.samples[i] << '\n';
  }
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(7);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

DemoResult cmd_demo_switch(const DemoArgs& args) {
  if (args.checkpoint.rfind("stub:", 0) == 0) {
    throw std::invalid_argument("demo-switch needs a model checkpoint for embeddings");
  }
  const Checkpoint ck = load_checkpoint(args.checkpoint);
  const int fs = ck.model.sample_rate;
  const AerScene scene = make_switch_scene(fs, args.segment_s, args.seed);

  Tape<float> tape;
  BoundParams<float> p(tape, ck.params, false);
  const ModelOutput<float> out = model_forward(p, ck.model, scene.mixture, scene.reference);
  const Waveform echo_hat{out.estimate.value().vec().cast<double>(), fs};
  const Waveform near_hat = near_end_estimate(scene.mixture, echo_hat);
  const Eigen::MatrixXd emb = out.embeddings.value().matrix().cast<double>();
  const Eigen::MatrixXd deviation = embedding_deviation_map(emb);
  const Index frame_len = erle_frame_len(fs);
  const auto erle = erle_curve(scene.echo, echo_hat, frame_len, frame_len / 4);

  std::filesystem::create_directories(args.out);
  write_waveform_csv(args.out / "mixture.csv", scene.mixture);
  write_waveform_csv(args.out / "near_end.csv", scene.near_end);
  write_waveform_csv(args.out / "estimate.csv", near_hat);
  write_waveform_csv(args.out / "echo_estimate.csv", echo_hat);
  write_erle_csv(args.out / "erle.csv", erle);
  write_matrix_csv(args.out / "embedding_deviation.csv", deviation);

  auto series = [](const std::string& label, const Waveform& w) {
    PlotSeries s{label, {}, {}};
    for (Index i = 0; i < w.size(); ++i) {
      s.x.push_back(static_cast<double>(i) / w.sample_rate);
      s.y.push_back(w.samples[i]);
    }
    return s;
  };
  write_line_svg(args.out / "waveforms.svg", "switch scenario", "time (s)", "amplitude",
                 {series("mixture", scene.mixture), series("near-end", scene.near_end),
                  series("near-end estimate", near_hat)});
  PlotSeries erle_series{"ERLE", {}, {}};
  for (const auto& pt : erle) {
    erle_series.x.push_back(pt.time_s);
    erle_series.y.push_back(pt.erle_db);
  }
  write_line_svg(args.out / "erle.svg", "ERLE", "time (s)", "dB", {erle_series});
  write_heatmap_svg(args.out / "embedding_deviation.svg", "|E - mean(E)|", deviation);

  nlohmann::json meta = scene.meta;
  meta["checkpoint"] = args.checkpoint;
  meta["config_hash"] = ck.extra.value("config_hash", "");
  meta["erle_frame_len"] = frame_len;
  meta["embedding_shape"] = {deviation.rows(), deviation.cols()};
  std::ofstream(args.out / "meta.json") << meta.dump(2) << '\n';
  return {static_cast<Index>(erle.size()), deviation.rows(), deviation.cols()};
}

}  // namespace infext
