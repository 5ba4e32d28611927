#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "infext/harness.hpp"
#include "infext/wav.hpp"
#include "support.hpp"

using namespace infext;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("infext_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig small_data() {
  ExperimentConfig c = ExperimentConfig::desk();
  c.data.duration = 1.0;
  c.data.sources_per_class = 2;
  c.data.rir_bank_size = 4;
  return c;
}

// Frames of length `len` every `hop`, the last one zero-padded.
Index frames_covering(Index n, Index len, Index hop) {
  if (n <= len) return 1;
  return (n - len + hop - 1) / hop + 1;
}

}  // namespace

TEST_CASE("room parsing") {
  const RoomSpec r = parse_room("3.0x5.0x3.0");
  CHECK(r.width == 3.0);
  CHECK(r.length == 5.0);
  CHECK(r.height == 3.0);
  CHECK_THROWS(parse_room("3.0x5.0"));
  CHECK_THROWS(parse_room("3x5x3m"));
  CHECK_THROWS(parse_room("3x-5x3"));
}

TEST_CASE("gen-rir writes a reproducible WAV and sidecar") {
  const fs::path dir = scratch("rir");
  GenRirArgs a;
  a.room = parse_room("3.0x5.0x3.0");
  a.t60 = 0.25;
  a.distance = 0.85;
  a.seed = 4;
  a.out = dir / "a.wav";
  const Rir rir = cmd_gen_rir(a);
  CHECK(fs::exists(dir / "a.json"));
  CHECK(std::abs(rir.request.distance() - 0.85) < 1e-9);
  GenRirArgs b = a;
  b.out = dir / "b.wav";
  cmd_gen_rir(b);
  CHECK(testing::read_file(a.out) == testing::read_file(b.out));
  const Waveform back = read_wav(a.out);
  CHECK(back.sample_rate == 16000);
  CHECK(back.size() == rir.taps.size());

  GenRirArgs anechoic = a;
  anechoic.t60 = 0.0;
  anechoic.out = dir / "free.wav";
  const Rir free = cmd_gen_rir(anechoic);
  // A single band-limited pulse: nearly all energy within a few taps of the peak.
  Index k = 0;
  free.taps.cwiseAbs().maxCoeff(&k);
  const Index lo = std::max<Index>(0, k - 8);
  const double local = free.taps.segment(lo, std::min<Index>(17, free.taps.size() - lo)).squaredNorm();
  CHECK(local / free.taps.squaredNorm() > 0.99);

  GenRirArgs bad = a;
  bad.room = {2.0, 4.0, 2.7};
  bad.t60 = 0.05;
  bad.out = dir / "bad.wav";
  CHECK(testing::throws_containing([&] { cmd_gen_rir(bad); }, "unachievable T60"));
}

TEST_CASE("gen-scenes writes scenes and a manifest") {
  const fs::path dir = scratch("scenes");
  GenScenesArgs a;
  a.split = Split::kTest;
  a.count = 6;
  a.out = dir / "all";
  a.seed = 2;
  a.config = small_data();
  const auto entries = cmd_gen_scenes(a);
  CHECK(entries.size() == 6);
  const auto lines = testing::read_csv(a.out / "manifest.jsonl");
  CHECK(lines.size() == 6);
  const auto back = read_manifest(a.out / "manifest.jsonl");
  REQUIRE(back.size() == 6);
  for (const auto& e : back) {
    CHECK(fs::exists(a.out / e.dir / "mixture.wav"));
    CHECK(e.extra.value("config_hash", "") == config_hash(a.config));
  }
  const AerScene s0 = read_scene(a.out / back[0].dir);
  CHECK(s0.sample_rate() == a.config.data.sample_rate);
  CHECK(s0.size() == a.config.data.scene_samples());

  GenScenesArgs ns = a;
  ns.out = dir / "ns";
  ns.count = 5;
  ns.subset = Subset::kNS;
  for (const auto& e : cmd_gen_scenes(ns)) CHECK(e.subset == Subset::kNS);
  for (const auto& e : read_manifest(ns.out / "manifest.jsonl")) CHECK(e.subset == Subset::kNS);

  GenScenesArgs again = a;
  again.out = dir / "again";
  cmd_gen_scenes(again);
  CHECK(testing::read_file(a.out / "scene_00003" / "mixture.wav") ==
        testing::read_file(again.out / "scene_00003" / "mixture.wav"));

  GenScenesArgs conflict = ns;
  conflict.switch_scenario = true;
  CHECK(testing::throws_containing([&] { cmd_gen_scenes(conflict); }, "--subset"));
}

TEST_CASE("eval with stubs") {
  const fs::path dir = scratch("eval");
  GenScenesArgs g;
  g.count = 8;
  g.out = dir / "scenes";
  g.seed = 6;
  g.config = small_data();
  cmd_gen_scenes(g);

  EvalArgs oracle{"stub:oracle", g.out / "manifest.jsonl", dir / "oracle"};
  const MetricReport r = cmd_eval(oracle);
  REQUIRE(r.examples.size() == 8);
  for (const auto& e : r.examples) {
    const AerScene s = read_scene(g.out / e.id);
    CHECK(e.si_sdri == doctest::Approx(kDbCap - si_sdr(s.mixture, s.near_end)).epsilon(1e-9));
    CHECK(e.erle_mean_db == kDbCap);
  }
  const auto table = testing::read_csv(dir / "oracle" / "table.csv");
  REQUIRE(table.size() == 2);
  CHECK(table[0] == std::vector<std::string>{"SS", "SN", "NS", "NN", "mean"});
  CHECK(table[1].size() == 5);
  CHECK(fs::exists(dir / "oracle" / "examples.json"));

  EvalArgs zero{"stub:zero", g.out / "manifest.jsonl", dir / "zero"};
  for (const auto& e : cmd_eval(zero).examples) CHECK(e.si_sdri == 0.0);

  EvalArgs twice{"stub:oracle", g.out / "manifest.jsonl", dir / "oracle2"};
  cmd_eval(twice);
  CHECK(testing::read_file(dir / "oracle" / "table.csv") ==
        testing::read_file(dir / "oracle2" / "table.csv"));
  CHECK_THROWS(cmd_eval({"stub:perfect", g.out / "manifest.jsonl", dir / "x"}));
}

TEST_CASE("eval with a checkpoint") {
  const fs::path dir = scratch("eval_ckpt");
  GenScenesArgs g;
  g.count = 2;
  g.out = dir / "scenes";
  g.config = small_data();
  cmd_gen_scenes(g);
  Checkpoint ck;
  ck.model = g.config.model;
  ck.train = g.config.train;
  ck.params = ModelParams<float>::init(ck.model, 3);
  ck.optim = OptimState<float>::zeros(ck.params, 1e-3);
  save_checkpoint(dir / "m.ckpt", ck);
  const MetricReport r = cmd_eval({(dir / "m.ckpt").string(), g.out / "manifest.jsonl", dir / "out"});
  CHECK(r.examples.size() == 2);
  for (const auto& e : r.examples) CHECK(std::isfinite(e.si_sdri));

  ck.model.sample_rate = 16000;
  save_checkpoint(dir / "wrong.ckpt", ck);
  CHECK_THROWS(cmd_eval({(dir / "wrong.ckpt").string(), g.out / "manifest.jsonl", dir / "o2"}));
}

TEST_CASE("demo-switch artifacts") {
  const fs::path dir = scratch("demo");
  Checkpoint ck;
  ck.model = ModelConfig::desk();
  ck.params = ModelParams<float>::init(ck.model, 8);
  ck.optim = OptimState<float>::zeros(ck.params, 1e-3);
  save_checkpoint(dir / "m.ckpt", ck);
  DemoArgs a;
  a.checkpoint = (dir / "m.ckpt").string();
  a.out = dir / "out";
  const DemoResult r = cmd_demo_switch(a);

  const int fs_hz = ck.model.sample_rate;
  const Index n = 4 * fs_hz;
  const Index frame = std::llround(0.128 * fs_hz);
  const auto erle = testing::read_csv(a.out / "erle.csv");
  CHECK(Index(erle.size()) - 1 == frames_covering(n, frame, frame / 4));
  CHECK(r.erle_rows == frames_covering(n, frame, frame / 4));

  const auto emb = testing::read_csv(a.out / "embedding_deviation.csv");
  const Index latent = (n - ck.model.encoder.window) / ck.model.encoder.stride + 1;
  CHECK(Index(emb.size()) == ck.model.encoder.channels);
  for (const auto& row : emb) CHECK(Index(row.size()) == latent);

  for (const char* f : {"mixture.csv", "near_end.csv", "estimate.csv"}) {
    CHECK(Index(testing::read_csv(a.out / f).size()) == n + 1);
  }
  for (const char* f : {"waveforms.svg", "erle.svg", "embedding_deviation.svg"}) {
    INFO(f);
    CHECK(testing::xml_well_formed(testing::read_file(a.out / f)));
  }
  CHECK_FALSE(testing::xml_well_formed("<svg><g></svg></g>"));

  DemoArgs stub = a;
  stub.checkpoint = "stub:oracle";
  CHECK_THROWS(cmd_demo_switch(stub));
}

TEST_CASE("switch scene layout") {
  const AerScene s = make_switch_scene(8000, 2.0, 1);
  CHECK(s.size() == 32000);
  CHECK(s.reference.size() == 32000);
  CHECK(s.echo.samples.head(16000).squaredNorm() > 0);
  CHECK(s.echo.samples.tail(16000).squaredNorm() > 0);
}
