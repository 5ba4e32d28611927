#include <doctest.h>

#include <numeric>
#include <random>

#include "infext/networks.hpp"
#include "support.hpp"

using namespace infext;
using testing::random_tensor;
using testing::random_vector;

namespace {

// Params with every tensor jittered, so no bias or gain sits at a special value.
ModelParams<double> jittered(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams<double> p = ModelParams<double>::init(cfg, seed).cast<double>();
  for (std::size_t i = 0; i < p.size(); ++i) {
    p.tensor(i).vec() += random_vector(p.tensor(i).size(), 1000 + i, 0.1);
  }
  return p;
}

Waveform wave(Index n, unsigned seed, int fs = 8000) { return Waveform{random_vector(n, seed), fs}; }

TensorD run_model(const ModelParams<double>& p, const ModelConfig& cfg, const Waveform& mix,
                  const Waveform& ref) {
  Tape<double> t;
  BoundParams<double> b(t, p, false);
  return model_forward(b, cfg, mix, ref).estimate.value();
}

// Stack output columns <= k must not move when columns > k are perturbed.
double stack_causality_violation(const ModelConfig& cfg, unsigned seed) {
  const ModelParams<double> p = jittered(cfg, seed);
  const Index n = cfg.encoder.channels, frames = 23;
  const TensorD x = random_tensor({n, frames}, seed);
  std::mt19937 rng(seed);
  const Index k = std::uniform_int_distribution<Index>(0, frames - 2)(rng);
  TensorD y = x;
  for (Index c = 0; c < n; ++c) {
    for (Index f = k + 1; f < frames; ++f) y.matrix()(c, f) += 3.0 * random_vector(1, seed + c + f)[0];
  }
  Tape<double> t;
  BoundParams<double> b(t, p, false);
  const TensorD a = aux_forward(t.constant(x), b, cfg).value();
  const TensorD z = aux_forward(t.constant(y), b, cfg).value();
  return (a.matrix().leftCols(k + 1) - z.matrix().leftCols(k + 1)).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("encoder latent shape for 4 s at 16 kHz") {
  const ModelConfig cfg = ModelConfig::full(Arch::kDprnn);
  const auto p = ModelParams<float>::init(cfg, 1);
  Tape<float> t;
  BoundParams<float> b(t, p, false);
  const Waveform w = wave(64000, 1, 16000);
  Var<float> lat = encoder_forward(frames_var(t, frame(w, 32, 16)), b, Branch::kExt);
  CHECK(lat.shape() == Shape{256, 3999});
  CHECK((lat.value().vec().array() >= 0).all());

  Var<float> dec = decoder_forward(lat, b, cfg, 64000);
  CHECK(dec.shape() == Shape{1, 64000});
  CHECK(dec.value().vec().allFinite());
}

TEST_CASE("zero input gives zero latent and zero output") {
  const ModelConfig cfg = ModelConfig::desk();
  const auto p = ModelParams<double>::init(cfg, 2);
  Tape<double> t;
  BoundParams<double> b(t, p, false);
  const Waveform zero{Eigen::VectorXd::Zero(800), 8000};
  Var<double> lat = encoder_forward(frames_var(t, frame(zero, 32, 16)), b, Branch::kAux);
  CHECK(lat.value().vec().isZero(0.0));
  CHECK(decoder_forward(t.constant(TensorD({64, 49})), b, cfg, 800).value().vec().isZero(0.0));
  CHECK(run_model(p, cfg, zero, wave(800, 3)).vec().isZero(0.0));
}

TEST_CASE("aux and ext encoders do not share weights") {
  const ModelConfig cfg = ModelConfig::desk();
  const auto p = ModelParams<double>::init(cfg, 3);
  Tape<double> t;
  BoundParams<double> b(t, p, false);
  Var<double> f = frames_var(t, frame(wave(800, 4), 32, 16));
  const TensorD aux = encoder_forward(f, b, Branch::kAux).value();
  const TensorD ext = encoder_forward(f, b, Branch::kExt).value();
  CHECK((aux.vec() - ext.vec()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("stacks keep the frame count and stay finite") {
  for (Arch arch : {Arch::kTcn, Arch::kDprnn}) {
    for (bool causal : {false, true}) {
      ModelConfig cfg = ModelConfig::desk();
      cfg.arch = arch;
      cfg.causal = causal;
      const auto p = ModelParams<double>::init(cfg, 4);
      Tape<double> t;
      BoundParams<double> b(t, p, false);
      bool finite = true;
      for (unsigned draw = 0; draw < 100; ++draw) {
        Var<double> e = aux_forward(t.constant(random_tensor({64, 17}, draw, 5.0)), b, cfg);
        finite = finite && e.value().vec().allFinite() && e.shape() == Shape{64, 17};
      }
      CHECK(finite);
    }
  }
}

TEST_CASE("causal stacks ignore future frames") {
  for (Arch arch : {Arch::kTcn, Arch::kDprnn}) {
    ModelConfig cfg = testing::tiny_model(arch, true, Fusion::kTV);
    cfg.encoder.channels = 6;
    for (unsigned seed = 1; seed <= 5; ++seed) {
      CHECK(stack_causality_violation(cfg, seed) <= 1e-6);
    }
    // The probe is sensitive: a non-causal stack fails it.
    cfg.causal = false;
    CHECK(stack_causality_violation(cfg, 1) > 1e-6);
  }
}

TEST_CASE("TCN receptive field") {
  TcnConfig one;
  one.repeats = 1;
  CHECK(tcn_receptive_field(one) == 127);
  CHECK(tcn_receptive_field(TcnConfig{}) == 253);

  // Oracle: an impulse through six dilated all-ones kernels spreads over 127 frames.
  Tape<double> t;
  TensorD x({1, 301});
  x[150] = 1.0;
  Var<double> y = t.constant(x);
  for (Index b = 0; b < 6; ++b) {
    const Index d = Index(1) << b;
    y = ad::conv1d(y, t.constant(TensorD({1, 1, 3}, 1.0)), Var<double>{},
                   Conv1dOptions{1, d, 1, d, d});
  }
  Index support = 0;
  for (Index i = 0; i < y.size(); ++i) support += y.value()[i] != 0.0;
  CHECK(support == 127);
}

TEST_CASE("average embeddings") {
  Tape<double> t;
  Var<double> e = t.constant(TensorD({2, 2}, std::vector<double>{1, 3, 2, 4}));
  const TensorD m = average_embeddings(e).value();
  CHECK(m.shape() == Shape{2, 1});
  CHECK(m.to_vector() == std::vector<double>{2.0, 3.0});

  TensorD same({3, 7});
  for (Index c = 0; c < 3; ++c) same.matrix().row(c).setConstant(0.1 * double(c + 1) + 1e-3);
  const TensorD ms = average_embeddings(t.constant(same)).value();
  for (Index c = 0; c < 3; ++c) CHECK(ms[c] == same.matrix()(c, 0));

  const TensorD r = random_tensor({4, 9}, 5);
  const TensorD mr = average_embeddings(t.constant(r)).value();
  for (Index c = 0; c < 4; ++c) {
    CHECK(std::abs((r.matrix().row(c).array() - mr[c]).sum()) < 1e-9);
  }
}

TEST_CASE("fusion contracts") {
  Tape<double> t;
  const TensorD h = random_tensor({4, 6}, 6);
  Var<double> hv = t.constant(h);
  TensorD cols({4, 6});
  const Eigen::Vector4d c(0.3, -1.2, 2.5, 0.7);
  for (Index f = 0; f < 6; ++f) cols.matrix().col(f) = c;
  Var<double> e = t.constant(cols);
  const TensorD tv = fuse(hv, e, Fusion::kTV).value();
  const TensorD ti = fuse(hv, average_embeddings(e), Fusion::kTI).value();
  CHECK(tv.vec() == ti.vec());
  CHECK(fuse(hv, t.constant(TensorD({4, 6}, 1.0)), Fusion::kTV).value().vec() == h.vec());
  CHECK(fuse(hv, t.constant(TensorD({4}, 1.0)), Fusion::kTI).value().vec() == h.vec());
  CHECK_THROWS_AS(fuse(hv, e, Fusion::kTI), std::invalid_argument);
  CHECK_THROWS_AS(fuse(hv, t.constant(TensorD({4, 5})), Fusion::kTV), std::invalid_argument);
}

TEST_CASE("extraction with constant-column embeddings is fusion independent") {
  for (Arch arch : {Arch::kTcn, Arch::kDprnn}) {
    for (bool causal : {false, true}) {
      ModelConfig cfg = ModelConfig::desk();
      cfg.arch = arch;
      cfg.causal = causal;
      const auto p = ModelParams<float>::init(cfg, 7);
      Tape<float> t;
      BoundParams<float> b(t, p, false);
      Var<float> mix = t.constant(random_tensor({64, 40}, 8).cast<float>().reshaped({64, 40}));
      TensorF cols({64, 40});
      const Eigen::VectorXf c = random_vector(64, 9).cast<float>();
      for (Index f = 0; f < 40; ++f) cols.matrix().col(f) = c;
      const auto tv = extract_forward(mix, t.constant(cols), Fusion::kTV, b, cfg);
      const auto ti = extract_forward(mix, t.constant(cols), Fusion::kTI, b, cfg);
      CHECK(tv.latent.value().vec() == ti.latent.value().vec());
      CHECK(tv.mask.value().vec() == ti.mask.value().vec());
    }
  }
}

TEST_CASE("masks are non-negative and multiplicative") {
  const ModelConfig cfg = ModelConfig::desk();
  const auto p = ModelParams<double>::init(cfg, 10);
  Tape<double> t;
  BoundParams<double> b(t, p, false);
  Var<double> emb = t.constant(random_tensor({64, 30}, 11));
  const auto out = extract_forward(t.constant(random_tensor({64, 30}, 12)), emb, Fusion::kTV, b, cfg);
  CHECK((out.mask.value().vec().array() >= 0).all());
  const auto zero = extract_forward(t.constant(TensorD({64, 30})), emb, Fusion::kTV, b, cfg);
  CHECK(zero.latent.value().vec().isZero(0.0));
}

TEST_CASE("TV and TI differ on varying embeddings") {
  ModelConfig tv = ModelConfig::desk();
  ModelConfig ti = tv;
  ti.fusion = Fusion::kTI;
  const auto p = ModelParams<double>::init(tv, 12);
  const Waveform mix = wave(1600, 13), ref = wave(1600, 14);
  const TensorD a = run_model(p, tv, mix, ref);
  const TensorD c = run_model(p, ti, mix, ref);
  CHECK(a.shape() == Shape{1, 1600});
  CHECK((a.vec() - c.vec()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("layer norms") {
  Tape<double> t;
  const TensorD x = random_tensor({5, 12}, 15, 3.0);
  Var<double> one = t.constant(TensorD({5, 1}, 1.0));
  Var<double> zero = t.constant(TensorD({5, 1}));
  const TensorD g = glnorm(t.constant(x), one, zero).value();
  CHECK(std::abs(g.vec().mean()) < 1e-6);
  const double var = (g.vec().array() - g.vec().mean()).square().mean();
  CHECK(var == doctest::Approx(1.0).epsilon(1e-6));

  const TensorD c = clnorm(t.constant(x), one, zero).value();
  CHECK((c.matrix().col(11) - g.matrix().col(11)).cwiseAbs().maxCoeff() < 1e-6);

  TensorD y = x;
  y.matrix().rightCols(4) += TensorD::RowMatrix::Constant(5, 4, 10.0);
  const TensorD cy = clnorm(t.constant(y), one, zero).value();
  CHECK((cy.matrix().leftCols(8) - c.matrix().leftCols(8)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("parameter counts near the published sizes") {
  CHECK(double(param_count(ModelConfig::full(Arch::kTcn))) == doctest::Approx(0.59e6).epsilon(0.2));
  CHECK(double(param_count(ModelConfig::full(Arch::kDprnn))) == doctest::Approx(2.74e6).epsilon(0.2));
  CHECK(double(param_count(ModelConfig::full(Arch::kDprnn, true))) ==
        doctest::Approx(2.10e6).epsilon(0.2));
  for (const ModelConfig& cfg : {ModelConfig::desk(), ModelConfig::full(Arch::kTcn, true)}) {
    Index total = 0;
    for (const auto& s : param_registry(cfg)) total += numel(s.shape);
    CHECK(total == param_count(cfg));
    CHECK(ModelParams<float>::init(cfg, 1).total() == total);
  }
}

TEST_CASE("end-to-end gradients match central differences") {
  for (Arch arch : {Arch::kTcn, Arch::kDprnn}) {
    for (bool causal : {false, true}) {
      for (Fusion fusion : {Fusion::kTI, Fusion::kTV}) {
        const ModelConfig cfg = testing::tiny_model(arch, causal, fusion);
        INFO(to_string(arch), " causal=", causal, " ", to_string(fusion));
        const double err =
            testing::model_grad_check(jittered(cfg, 20), cfg, wave(40, 21), wave(40, 22), 23);
        CHECK(err < 1e-3);
      }
    }
  }
}

TEST_CASE("causal model output ignores later input") {
  ModelConfig cfg = ModelConfig::desk();
  cfg.causal = true;
  const auto p = ModelParams<double>::init(cfg, 30);
  const Waveform mix = wave(2400, 31), ref = wave(2400, 32);
  const TensorD base = run_model(p, cfg, mix, ref);
  const Index window = cfg.encoder.window;
  for (Index t : {Index(500), Index(1333)}) {
    Waveform m2 = mix, r2 = ref;
    m2.samples.tail(2400 - t - window) += random_vector(2400 - t - window, 33);
    r2.samples.tail(2400 - t - window) += random_vector(2400 - t - window, 34);
    const TensorD out = run_model(p, cfg, m2, r2);
    CHECK((out.vec().head(t) - base.vec().head(t)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((out.vec() - base.vec()).cwiseAbs().maxCoeff() > 1e-6);
  }
}

TEST_CASE("reference length mismatch and rate checks") {
  const ModelConfig cfg = ModelConfig::desk();
  const auto p = ModelParams<double>::init(cfg, 40);
  const Waveform out = infer(p, cfg, wave(1600, 41), wave(1000, 42));
  CHECK(out.size() == 1600);
  CHECK(out.samples.allFinite());
  CHECK_THROWS(infer(p, cfg, wave(1600, 41, 16000), wave(1600, 42, 16000)));
}

TEST_CASE("model config validation and JSON") {
  ModelConfig c = ModelConfig::desk();
  c.encoder.stride = 64;
  CHECK(testing::throws_containing([&] { c.validate(); }, "encoder.stride"));
  const ModelConfig d = ModelConfig::full(Arch::kTcn, true);
  const ModelConfig back = model_config_from_json(to_json(d));
  CHECK(to_json(back) == to_json(d));
  CHECK(parse_fusion("TI") == Fusion::kTI);
  CHECK(parse_arch(to_string(Arch::kDprnn)) == Arch::kDprnn);
}
