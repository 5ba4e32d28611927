#include <doctest.h>

#include <array>
#include <cmath>

#include "infext/tensor_json.hpp"
#include "primitive_checks.hpp"

using namespace infext;
using testing::random_tensor;

namespace {

double sigm(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("every primitive passes the central-difference check") {
  for (const auto& c : testing::primitive_grad_errors()) {
    INFO(c.name);
    CHECK(c.error < 1e-4);
  }
}

TEST_CASE("relu forward and gradient") {
  Tape<double> t;
  Var<double> x = t.variable(TensorD({2}, std::vector<double>{-1.0, 2.0}));
  Var<double> y = ad::relu(x);
  CHECK(y.value()[0] == 0.0);
  CHECK(y.value()[1] == 2.0);
  t.backward(ad::sum(y));
  CHECK(t.grad(x)[0] == 0.0);
  CHECK(t.grad(x)[1] == 1.0);
}

TEST_CASE("identity kernels leave the input unchanged") {
  Tape<double> t;
  const TensorD input = random_tensor({2, 9}, 1);
  Var<double> x = t.constant(input);
  TensorD eye({2, 2, 1});
  eye[0] = 1.0;
  eye[3] = 1.0;
  CHECK(ad::conv1d(x, t.constant(eye), Var<double>{}, {}).value().vec() == input.vec());
  TensorD centre({2, 1, 3});
  centre[1] = 1.0;
  centre[4] = 1.0;
  const Conv1dOptions same{1, 1, 2, 1, 1};
  CHECK(ad::conv1d(x, t.constant(centre), Var<double>{}, same).value().vec() == input.vec());
}

TEST_CASE("matmul against a hand product") {
  Tape<double> t;
  Var<double> a = t.constant(TensorD({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}));
  Var<double> b = t.constant(TensorD({3, 2}, std::vector<double>{7, 8, 9, 10, 11, 12}));
  const TensorD c = ad::matmul(a, b).value();
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.to_vector() == std::vector<double>{58, 64, 139, 154});
}

TEST_CASE("gradients of sums") {
  Tape<double> t;
  Var<double> x = t.variable(random_tensor({3, 4}, 2));
  t.backward(ad::sum(x));
  CHECK(t.grad(x).vec().isOnes(0.0));

  Tape<double> u;
  Var<double> y = u.variable(TensorD({2}, std::vector<double>{1.0, 2.0}));
  Var<double> unused = u.variable(TensorD({3}, 5.0));
  u.backward(ad::sum(ad::square(y)));
  CHECK(u.grad(y).to_vector() == std::vector<double>{2.0, 4.0});
  CHECK(u.grad(unused).vec().isZero(0.0));
}

TEST_CASE("backward misuse raises") {
  Tape<double> t;
  Var<double> x = t.variable(random_tensor({3}, 3));
  CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
  Var<double> loss = ad::sum(x);
  t.backward(loss);
  CHECK_THROWS_AS(t.backward(loss), std::logic_error);
}

TEST_CASE("shape errors name the op") {
  Tape<double> t;
  Var<double> a = t.constant(random_tensor({3, 4}, 1));
  CHECK(testing::throws_containing([&] { ad::matmul(a, a); }, "matmul"));
  CHECK(testing::throws_containing(
      [&] { ad::lstm_seq(a, a, a, a, false); }, "lstm_seq"));
  CHECK(testing::throws_containing([&] { ad::chunk(a, 2, 3); }, "chunk"));
  CHECK_THROWS(ad::add(a, t.constant(random_tensor({5}, 2))));
}

TEST_CASE("LSTM cell against hand arithmetic") {
  // Two units, scalar input, zero recurrent weights and zero state.
  const std::vector<double> w{0.5, -0.3, 0.8, 0.1, -0.6, 0.4, 0.2, 0.9};
  const std::vector<double> b{0.1, 0.0, -0.2, 0.3, 0.05, -0.1, 0.0, 0.2};
  const double x = 1.5;
  Tape<double> t;
  const auto s = ad::lstm_cell(t.constant(TensorD({1, 1}, x)),
                               {t.constant(TensorD({2, 1})), t.constant(TensorD({2, 1}))},
                               t.constant(TensorD({8, 1}, w)), t.constant(TensorD({8, 2})),
                               t.constant(TensorD({8}, b)));
  for (int u = 0; u < 2; ++u) {
    const double i = sigm(w[u] * x + b[u]);
    const double g = std::tanh(w[4 + u] * x + b[4 + u]);
    const double o = sigm(w[6 + u] * x + b[6 + u]);
    const double c = i * g;
    CHECK(s.c.value()[u] == doctest::Approx(c).epsilon(1e-14));
    CHECK(s.h.value()[u] == doctest::Approx(o * std::tanh(c)).epsilon(1e-14));
  }
}

TEST_CASE("LSTM with zero weights outputs zeros") {
  Tape<double> t;
  Var<double> h = ad::lstm_seq(t.constant(random_tensor({3, 6, 2}, 4)), t.constant(TensorD({8, 3})),
                               t.constant(TensorD({8, 2})), t.constant(TensorD({8})), false);
  CHECK(h.shape() == Shape{2, 6, 2});
  CHECK(h.value().vec().isZero(0.0));
}

TEST_CASE("sequence LSTM equals stepped cells in both directions") {
  const TensorD x = random_tensor({3, 5, 2}, 5);
  const TensorD wih = random_tensor({16, 3}, 6, 0.5);
  const TensorD whh = random_tensor({16, 4}, 7, 0.5);
  const TensorD b = random_tensor({16}, 8, 0.5);
  for (bool reverse : {false, true}) {
    Tape<double> t;
    Var<double> xs = t.constant(x);
    const TensorD seq = ad::lstm_seq(xs, t.constant(wih), t.constant(whh), t.constant(b), reverse).value();
    ad::LstmState<double> s{t.constant(TensorD({4, 2})), t.constant(TensorD({4, 2}))};
    for (Index k = 0; k < 5; ++k) {
      const Index step = reverse ? 4 - k : k;
      Var<double> xk = ad::reshape(ad::slice(xs, 1, step, step + 1), Shape{3, 2});
      s = ad::lstm_cell(xk, s, t.constant(wih), t.constant(whh), t.constant(b));
      for (Index f = 0; f < 4; ++f) {
        for (Index n = 0; n < 2; ++n) {
          CHECK(seq[(f * 5 + step) * 2 + n] == doctest::Approx(s.h.value()[f * 2 + n]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("bidirectional LSTM doubles the channel count") {
  Tape<double> t;
  Var<double> x = t.constant(random_tensor({3, 5, 1}, 9));
  Var<double> w = t.constant(random_tensor({16, 3}, 10));
  Var<double> r = t.constant(random_tensor({16, 4}, 11));
  Var<double> b = t.constant(random_tensor({16}, 12));
  const std::array<Var<double>, 2> dirs{ad::lstm_seq(x, w, r, b, false),
                                        ad::lstm_seq(x, w, r, b, true)};
  CHECK(ad::concat<double>(dirs, 0).dim(0) == 8);
}

TEST_CASE("chunking a 4 s latent gives 266 chunks") {
  Tape<double> t;
  Var<double> x = t.constant(random_tensor({2, 3999}, 13));
  Var<double> c = ad::chunk(x, 30, 15);
  CHECK(c.shape() == Shape{2, 30, 266});
  // Unchunking sums the overlaps; interior frames are covered twice.
  Var<double> back = ad::unchunk(c, 15, 3999);
  CHECK(back.value()[20] == doctest::Approx(2.0 * x.value()[20]).epsilon(1e-12));
  CHECK(back.value()[5] == doctest::Approx(x.value()[5]).epsilon(1e-12));
}

TEST_CASE("cumulative normalization statistics") {
  Tape<double> t;
  const TensorD xv = random_tensor({3, 6}, 14, 2.0);
  Var<double> x = t.constant(xv);
  const std::vector<Index> same(6, 0);
  const TensorD g = ad::cumulative_normalize<double>(x, same, 1e-8).value();
  CHECK(std::abs(g.vec().mean()) < 1e-12);
  CHECK((g.vec().array().square().mean()) == doctest::Approx(1.0).epsilon(1e-6));

  std::vector<Index> causal(6);
  std::iota(causal.begin(), causal.end(), 0);
  const TensorD c = ad::cumulative_normalize<double>(x, causal, 1e-8).value();
  // The first column only sees itself.
  const auto col = xv.matrix().col(0);
  const double m = col.mean();
  const double sd = std::sqrt((col.array() - m).square().mean() + 1e-8);
  for (Index r = 0; r < 3; ++r) {
    CHECK(c.matrix()(r, 0) == doctest::Approx((xv.matrix()(r, 0) - m) / sd).epsilon(1e-12));
    CHECK(c.matrix()(r, 5) == doctest::Approx(g.matrix()(r, 5)).epsilon(1e-12));
  }
}

TEST_CASE("float tapes agree with double tapes") {
  const TensorD x = random_tensor({4, 6}, 15);
  Tape<double> td;
  Var<double> vd = td.variable(x);
  td.backward(ad::sum(ad::square(ad::tanh(vd))));
  Tape<float> tf;
  Var<float> vf = tf.variable(x.cast<float>());
  tf.backward(ad::sum(ad::square(ad::tanh(vf))));
  CHECK((tf.grad(vf).cast<double>().vec() - td.grad(vd).vec()).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("tensor JSON round trip") {
  const TensorD x = random_tensor({2, 3, 2}, 16);
  const TensorD back = tensor_from_json<double>(tensor_to_json(x));
  CHECK(back.shape() == x.shape());
  CHECK(back.vec() == x.vec());
  CHECK_THROWS(tensor_from_json<double>(nlohmann::json{{"shape", {2, 2}}, {"data", {1.0}}}));
}
