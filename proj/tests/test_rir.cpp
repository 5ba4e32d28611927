#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "infext/rir.hpp"
#include "support.hpp"

using namespace infext;

namespace {

RirRequest request_at(const RoomSpec& room, double t60, double distance, int fs = 16000) {
  RirRequest r;
  r.room = room;
  r.t60 = t60;
  r.mic_pos = Eigen::Vector3d(room.width / 2, room.length / 2, 1.4);
  r.source_pos = r.mic_pos + Eigen::Vector3d(0.0, distance, 0.0);
  r.sample_rate = fs;
  return r;
}

double free_field(double d) { return 1.0 / (4.0 * std::numbers::pi * d); }

}  // namespace

TEST_CASE("Sabine reflection coefficient") {
  const double beta = reflection_coefficient({6.0, 6.0, 2.7}, 0.30);
  const double alpha = 0.161 * 97.2 / (136.8 * 0.30);
  CHECK(alpha == doctest::Approx(0.38131).epsilon(1e-4));
  CHECK(beta == doctest::Approx(std::sqrt(1.0 - alpha)).epsilon(1e-12));
  CHECK(beta == doctest::Approx(0.78657).epsilon(1e-4));
  CHECK(reflection_coefficient({6.0, 6.0, 2.7}, 1e6) > 0.99999);
  CHECK(testing::throws_containing([] { reflection_coefficient({2.0, 4.0, 2.7}, 0.05); },
                                   "unachievable T60"));
}

TEST_CASE("anechoic pulse amplitude and delay") {
  const Rir rir = simulate_rir(request_at({3.0, 5.0, 3.0}, 0.0, 0.85));
  CHECK(testing::pulse_area(rir.taps) == doctest::Approx(free_field(0.85)).epsilon(0.02));
  CHECK(free_field(0.85) == doctest::Approx(0.09362).epsilon(1e-4));
  CHECK(std::abs(testing::bandlimited_peak(rir.taps) - 16000 * 0.85 / 343.0) <= 0.1);

  const Rir far = simulate_rir(request_at({3.0, 5.0, 3.0}, 0.0, 1.70));
  CHECK(testing::pulse_area(far.taps) / testing::pulse_area(rir.taps) ==
        doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("order-zero image sum is the free-field pulse") {
  const RirRequest req = request_at({4.0, 6.0, 3.0}, 0.35, 1.35);
  const Rir direct = simulate_rir(req, 0);
  CHECK(testing::pulse_area(direct.taps) == doctest::Approx(free_field(1.35)).epsilon(0.02));
  CHECK(std::abs(testing::bandlimited_peak(direct.taps) - 16000 * 1.35 / 343.0) <= 0.1);
}

TEST_CASE("reverberant T60 is reproduced") {
  const Rir rir = simulate_rir(request_at({4.0, 6.0, 3.0}, 0.35, 1.35));
  CHECK(rir.taps.allFinite());
  CHECK(measured_t60(rir.taps, 16000) == doctest::Approx(0.35).epsilon(0.2));
}

TEST_CASE("direct path does not move with T60") {
  const RoomSpec room{9.0, 9.0, 3.0};
  const Index expected = std::lround(16000 * 1.85 / 343.0);
  for (double t60 : {0.0, 0.25, 0.45}) {
    const Rir rir = simulate_rir(request_at(room, t60, 1.85));
    Index k = 0;
    rir.taps.head(expected + 3).cwiseAbs().maxCoeff(&k);
    CHECK(k == expected);
  }
}

TEST_CASE("energy grows with the reflection coefficient") {
  const RirRequest r = request_at({4.0, 6.0, 3.0}, 0.35, 1.0);
  double last = 0;
  for (double beta : {0.0, 0.3, 0.6, 0.9}) {
    const Eigen::VectorXd h = image_source_response(r.room, r.source_pos, r.mic_pos, beta, 6000,
                                                    16000, 343.0, 8);
    const double e = h.squaredNorm();
    CHECK(e > last);
    last = e;
  }
}

TEST_CASE("positions outside the room are rejected") {
  RirRequest r = request_at({3.0, 5.0, 3.0}, 0.25, 0.85);
  r.source_pos.x() = 10.0;
  CHECK_THROWS(simulate_rir(r));
}

TEST_CASE("Schroeder T60 of synthetic decays") {
  const int fs = 16000;
  // Energy follows exp(-6 ln10 t / T), so the amplitude envelope is its square root.
  Eigen::VectorXd clean(fs);
  for (Index n = 0; n < clean.size(); ++n) {
    clean[n] = std::exp(-3.0 * std::log(10.0) * (double(n) / fs) / 0.4);
  }
  CHECK(measured_t60(clean, fs) == doctest::Approx(0.4).epsilon(0.05));

  Eigen::VectorXd noisy = testing::random_vector(fs / 2, 11);
  for (Index n = 0; n < noisy.size(); ++n) {
    noisy[n] *= std::exp(-3.0 * std::log(10.0) * (double(n) / fs) / 0.25);
  }
  CHECK(measured_t60(noisy, fs) == doctest::Approx(0.25).epsilon(0.1));

  const Rir anechoic = simulate_rir(request_at({3.0, 5.0, 3.0}, 0.0, 0.85));
  CHECK(testing::throws_containing([&] { measured_t60(anechoic.taps, fs); }, "insufficient decay"));
}

TEST_CASE("geometry draws stay inside the split pool") {
  for (Split split : {Split::kTraining, Split::kValidation, Split::kTest}) {
    const GeometryPool pool = GeometryPool::for_split(split);
    std::mt19937_64 rng(42);
    for (int i = 0; i < 40; ++i) {
      const GeometryDraw g = sample_geometry(pool, rng, 16000);
      for (const RirRequest* r : {&g.echo_path, &g.near_path}) {
        CHECK(std::find(pool.rooms.begin(), pool.rooms.end(), r->room) != pool.rooms.end());
        CHECK(std::find(pool.t60s.begin(), pool.t60s.end(), r->t60) != pool.t60s.end());
        CHECK((r->mic_pos.array() > 0).all());
        CHECK((r->mic_pos.array() < r->room.dims().array()).all());
        CHECK((r->source_pos.array() > 0).all());
        CHECK((r->source_pos.array() < r->room.dims().array()).all());
      }
      const double d = g.echo_path.distance();
      CHECK(std::any_of(pool.distances.begin(), pool.distances.end(),
                        [&](double x) { return std::abs(x - d) < 1e-9; }));
      CHECK(g.echo_path.room == g.near_path.room);
      CHECK(g.echo_path.mic_pos == g.near_path.mic_pos);
    }
  }
}

TEST_CASE("test split uses the held-out geometry grid") {
  const GeometryPool p = GeometryPool::for_split(Split::kTest);
  CHECK(p.rooms.size() == 3);
  CHECK(p.t60s == std::vector<double>{0.25, 0.35, 0.45});
  CHECK(p.distances == std::vector<double>{0.85, 1.35, 1.85});
}

TEST_CASE("geometry draws are deterministic") {
  const GeometryPool pool = GeometryPool::for_split(Split::kValidation);
  std::mt19937_64 a(7), b(7);
  const GeometryDraw x = sample_geometry(pool, a, 16000);
  const GeometryDraw y = sample_geometry(pool, b, 16000);
  CHECK(x.echo_path.source_pos == y.echo_path.source_pos);
  CHECK(x.near_path.source_pos == y.near_path.source_pos);
  CHECK(x.echo_path.mic_pos == y.echo_path.mic_pos);
}

TEST_CASE("impossible placement raises") {
  GeometryPool pool;
  pool.rooms = {{1.0, 1.0, 1.0}};
  pool.t60s = {0.2};
  pool.distances = {5.0};
  std::mt19937_64 rng(1);
  CHECK_THROWS(sample_geometry(pool, rng, 16000));
}

TEST_CASE("request JSON round trip") {
  const RirRequest r = request_at({4.0, 6.0, 3.0}, 0.35, 1.35, 8000);
  const RirRequest back = rir_request_from_json(to_json(r));
  CHECK(back.room == r.room);
  CHECK(back.t60 == r.t60);
  CHECK(back.source_pos == r.source_pos);
  CHECK(back.mic_pos == r.mic_pos);
  CHECK(back.sample_rate == 8000);
}
