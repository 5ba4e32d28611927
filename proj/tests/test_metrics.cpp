#include <doctest.h>

#include "infext/metrics.hpp"
#include "infext/scene.hpp"
#include "support.hpp"

using namespace infext;
using testing::random_vector;

namespace {

Waveform w16(const Eigen::VectorXd& x) { return Waveform{x, 16000}; }

AerScene toy_scene(unsigned seed, Index n = 16000) {
  AerScene s;
  s.echo = w16(random_vector(n, seed));
  s.near_end = w16(0.7 * random_vector(n, seed + 1));
  s.mixture = w16(s.echo.samples + s.near_end.samples);
  s.reference = w16(random_vector(n, seed + 2));
  s.subset = Subset::kSN;
  return s;
}

}  // namespace

TEST_CASE("SDR closed forms and scale sensitivity") {
  const Eigen::VectorXd x = random_vector(1000, 1);
  CHECK(sdr(w16(x), w16(x)) == kDbCap);
  CHECK(sdr(w16(x), w16(0.5 * x)) == doctest::Approx(6.0206).epsilon(1e-3 / 6.0206));
  CHECK(std::abs(sdr(w16(x), w16(2.0 * x))) < 1e-3);
  CHECK(sdr(w16(3.0 * x), w16(1.5 * x)) == doctest::Approx(sdr(w16(x), w16(0.5 * x))).epsilon(1e-9));
  CHECK_THROWS(sdr(w16(x), w16(x.head(10))));
  CHECK(sdr(w16(x), w16(Eigen::VectorXd::Constant(1000, std::nan("")))) == -kDbCap);
}

TEST_CASE("SI-SDR scale invariance and orthogonal closed form") {
  const Eigen::VectorXd ref = random_vector(2000, 2);
  Eigen::VectorXd e = random_vector(2000, 3);
  e -= ref * (e.dot(ref) / ref.squaredNorm());
  e *= std::sqrt(ref.squaredNorm() / 10.0) / e.norm();
  const Eigen::VectorXd est = ref + e;
  CHECK(si_sdr(w16(est), w16(ref)) == doctest::Approx(10.0).epsilon(1e-9));
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    CHECK(std::abs(si_sdr(w16(c * est), w16(ref)) - si_sdr(w16(est), w16(ref))) <= 1e-9);
  }
  CHECK(si_sdr(w16(ref), w16(ref)) == kDbCap);
  CHECK_THROWS(si_sdr(w16(est), w16(Eigen::VectorXd::Zero(2000))));
}

TEST_CASE("near-end estimate identities") {
  const AerScene s = toy_scene(4);
  CHECK(near_end_estimate(s.mixture, s.echo).samples ==
        s.mixture.samples - s.echo.samples);
  CHECK(near_end_estimate(s.mixture, w16(Eigen::VectorXd::Zero(s.size()))).samples ==
        s.mixture.samples);
  CHECK(near_end_estimate(s.mixture, s.mixture).samples.isZero(0.0));
  CHECK_THROWS(near_end_estimate(s.mixture, w16(random_vector(5, 1))));
}

TEST_CASE("SI-SDRi of the unprocessed mixture is exactly zero") {
  for (unsigned seed = 10; seed < 15; ++seed) {
    const AerScene s = toy_scene(seed);
    CHECK(si_sdri(s, s.mixture) == 0.0);
  }
  const AerScene s = toy_scene(20);
  const double in = si_sdr(s.mixture, s.near_end);
  const double perfect = si_sdri(s, near_end_estimate(s.mixture, s.echo));
  CHECK(perfect > 60.0);
  CHECK(perfect == doctest::Approx(kDbCap - in).epsilon(1e-6));
}

TEST_CASE("ERLE curves") {
  const Eigen::VectorXd echo = random_vector(64000, 5);
  const auto perfect = erle_curve(w16(echo), w16(echo));
  REQUIRE(!perfect.empty());
  for (const auto& p : perfect) CHECK(p.erle_db == kDbCap);
  for (const auto& p : erle_curve(w16(echo), w16(Eigen::VectorXd::Zero(64000)))) {
    CHECK(std::abs(p.erle_db) <= 1e-6);
  }

  Eigen::VectorXd half = echo;
  half.tail(32000).setZero();
  const auto step = erle_curve(w16(echo), w16(half), 2048, 512);
  CHECK(step.front().time_s == doctest::Approx(1024.0 / 16000));
  for (const auto& p : step) {
    if (p.time_s < 2.0 - 2048.0 / 16000) CHECK(p.erle_db == kDbCap);
    if (p.time_s > 2.0 + 2048.0 / 16000) CHECK(std::abs(p.erle_db) < 1e-6);
  }
  // The crossing from cap to zero happens within one frame of 2 s.
  double crossing = -1;
  for (std::size_t i = 1; i < step.size(); ++i) {
    if (step[i - 1].erle_db > 40 && step[i].erle_db <= 40) crossing = step[i].time_s;
  }
  CHECK(std::abs(crossing - 2.0) <= 2048.0 / 16000);
  // Quiet echo: exact cancellation still reads as the cap, a residual follows the ratio.
  const Eigen::VectorXd quiet = 1e-4 * echo.head(4096);
  for (const auto& p : erle_curve(w16(quiet), w16(quiet))) CHECK(p.erle_db == kDbCap);
  const auto partial = erle_curve(w16(quiet), w16(0.9 * quiet));
  const double e0 = quiet.head(2048).squaredNorm();
  CHECK(partial.front().erle_db ==
        doctest::Approx(10 * std::log10((e0 + 1e-8) / (0.01 * e0 + 1e-8))).epsilon(1e-9));
  CHECK(erle_frame_len(16000) == 2048);
  CHECK(erle_frame_len(8000) == 1024);
}

TEST_CASE("embedding deviation map") {
  Eigen::MatrixXd c(2, 3);
  c << 1, 1, 1, -2, -2, -2;
  CHECK(embedding_deviation_map(c).isZero(0.0));
  Eigen::MatrixXd wide(3, 1999);
  wide.colwise() = Eigen::Vector3d(0.1, -0.7, 1.3);
  CHECK(embedding_deviation_map(wide).isZero(0.0));
  Eigen::MatrixXd r(1, 2);
  r << 1, 3;
  const Eigen::MatrixXd d = embedding_deviation_map(r);
  CHECK(d(0, 0) == 1.0);
  CHECK(d(0, 1) == 1.0);
  const Eigen::MatrixXd e = Eigen::MatrixXd::Random(4, 9);
  const Eigen::VectorXd signed_mean = (e.colwise() - e.rowwise().mean()).rowwise().mean();
  CHECK(signed_mean.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(embedding_deviation_map(e).minCoeff() >= 0.0);
}

TEST_CASE("SDR loss gradient, sign and descent") {
  const TensorD ref({200}, random_vector(200, 6));
  CHECK(grad_check([&](Tape<double>&, Var<double> x) { return sdr_loss(ref, x); },
                   TensorD({200}, random_vector(200, 7))) < 1e-4);

  Tape<double> t;
  const double near = sdr_loss(ref, t.constant(TensorD({200}, ref.vec() + random_vector(200, 8, 1e-4))))
                          .value()
                          .item();
  CHECK(near < -60.0);

  // Plain gradient descent on the estimate itself.
  TensorD est({200}, random_vector(200, 9));
  double last = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (int step = 0; step < 50; ++step) {
    Tape<double> tape;
    Var<double> v = tape.variable(est);
    Var<double> loss = sdr_loss(ref, v);
    tape.backward(loss);
    monotone = monotone && loss.value().item() < last;
    last = loss.value().item();
    est.vec() -= 1e-2 * tape.grad(v).vec();
  }
  CHECK(monotone);
}

TEST_CASE("per-example metrics and report") {
  const AerScene s = toy_scene(30);
  const ExampleMetrics perfect = evaluate_example("a", s, s.echo);
  CHECK(perfect.sdr_echo == kDbCap);
  CHECK(perfect.erle_mean_db == kDbCap);
  const ExampleMetrics zero = evaluate_example("b", s, w16(Eigen::VectorXd::Zero(s.size())));
  CHECK(zero.si_sdri == 0.0);

  MetricReport r;
  r.examples = {perfect, zero};
  r.examples[1].subset = Subset::kNN;
  const auto means = r.subset_means();
  CHECK(means.at("SN") == perfect.si_sdri);
  CHECK(means.at("NN") == 0.0);
  CHECK(r.overall_mean() == doctest::Approx(perfect.si_sdri / 2));
  CHECK(r.to_json().contains("examples"));
}
