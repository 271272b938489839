#include <doctest.h>

#include "asal/head.hpp"
#include "asal/losses.hpp"
#include "oracles.hpp"

using namespace asal;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Vector random_vector(Rng& rng, Index n) { return gaussian_sample(rng, n); }

}  // namespace

TEST_CASE("correlation_loss: reference values") {
  CHECK(correlation_loss(vec({1, 2, 3}), vec({1, 2, 3})).value == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(correlation_loss(vec({3, 2, 1}), vec({1, 2, 3})).value == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(correlation_loss(vec({1, 3, 2, 4}), vec({1, 2, 3, 4})).value == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("correlation_loss: degenerate batches") {
  CHECK_THROWS_AS(correlation_loss(vec({1}), vec({2})), DegenerateBatch);
  CHECK_THROWS_AS(correlation_loss(vec({2, 2}), vec({1, 3})), DegenerateBatch);
  CHECK_THROWS_AS(correlation_loss(vec({1, 3}), vec({2, 2})), DegenerateBatch);
  CHECK_THROWS_AS(correlation_loss(vec({1, 2}), vec({1, 2, 3})), DimensionError);
}

TEST_CASE("correlation_loss: positive affine invariance") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector p = random_vector(rng, 6), t = random_vector(rng, 6);
    const double base = correlation_loss(p, t).value;
    for (double a : {0.5, 2.0, 10.0}) {
      for (double b : {-3.0, 0.0, 7.0}) {
        const Vector q = (a * p.array() + b).matrix();
        CHECK(std::abs(correlation_loss(q, t).value - base) < 1e-10);
      }
    }
  }
}

TEST_CASE("mse_loss: reference values") {
  CHECK(mse_loss(vec({1, 2}), vec({1, 2})).value == 0.0);
  CHECK(mse_loss(vec({2, 2}), vec({1, 3})).value == doctest::Approx(0.5));
  const Vector g = mse_loss(vec({2, 2}), vec({1, 3})).grad;
  CHECK(g(0) == doctest::Approx(0.5));
  CHECK(g(1) == doctest::Approx(-0.5));
  const Vector p = vec({1, 4, 2}), t = vec({0, 1, 5});
  const Vector scaled = t + 3.0 * (p - t);
  CHECK(mse_loss(scaled, t).value == doctest::Approx(9.0 * mse_loss(p, t).value));
}

TEST_CASE("combined_loss: composition and degenerate case") {
  const Vector p = vec({1, 3, 2, 4}), t = vec({1, 2, 3, 4});
  CHECK(combined_loss(p, t, 0.0).value == correlation_loss(p, t).value);
  CHECK(combined_loss(t, t, 0.3).value == doctest::Approx(0.0).epsilon(1e-15));
  const double expected = correlation_loss(p, t).value + 0.05 * mse_loss(p, t).value;
  CHECK(combined_loss(p, t, 0.05).value == doctest::Approx(expected).epsilon(1e-15));
  CHECK_THROWS_AS(combined_loss(vec({2, 2}), vec({1, 3}), 0.05), DegenerateBatch);
}

TEST_CASE("combined_loss: monotone in lambda") {
  Rng rng(2);
  const Vector p = random_vector(rng, 5), t = random_vector(rng, 5);
  double prev = -1.0;
  for (double lambda : {0.0, 0.01, 0.05, 0.5, 2.0}) {
    const double v = combined_loss(p, t, lambda).value;
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("reg_loss: reference values and unit gradient") {
  Matrix a = Matrix::Zero(3, 2);
  Matrix b = a;
  b(0, 1) = 3;
  b(2, 0) = 4;
  CHECK(reg_loss(a, a).value == 0.0);
  CHECK(reg_loss(a, a).grad.isZero());
  CHECK(reg_loss(a, b).value == doctest::Approx(5.0));
  Rng rng(3);
  Matrix r(4, 3);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
  CHECK(reg_loss(a.Zero(4, 3), r).grad.norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(reg_loss(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("loss bounds on random inputs") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector p = random_vector(rng, 5), t = random_vector(rng, 5);
    const double cor = correlation_loss(p, t).value;
    CHECK(cor >= 0.0);
    CHECK(cor <= 2.0);
    CHECK(mse_loss(p, t).value >= 0.0);
  }
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 3 + trial % 5;
    const Vector p = random_vector(rng, n), t = random_vector(rng, n);
    auto check = [&](auto&& loss) {
      const Vector numeric = oracle::numeric_gradient([&](const Vector& x) { return loss(x).value; }, p);
      CHECK(oracle::max_relative_error(loss(p).grad, numeric) < 1e-5);
    };
    check([&](const Vector& x) { return correlation_loss(x, t); });
    check([&](const Vector& x) { return mse_loss(x, t); });
    check([&](const Vector& x) { return combined_loss(x, t, 0.05); });

    Matrix h(4, 3), r(4, 3);
    for (Index i = 0; i < h.size(); ++i) {
      h.data()[i] = rng.normal();
      r.data()[i] = rng.normal();
    }
    const Vector r_flat = Eigen::Map<const Vector>(r.data(), r.size());
    const Vector numeric = oracle::numeric_gradient(
        [&](const Vector& x) { return reg_loss(h, Eigen::Map<const Matrix>(x.data(), 4, 3)).value; }, r_flat);
    const Matrix g = reg_loss(h, r).grad;
    CHECK(oracle::max_relative_error(Eigen::Map<const Vector>(g.data(), g.size()), numeric) < 1e-5);
  }
}

TEST_CASE("combined loss through the sampled head matches central differences") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    HeadConfig cfg;
    cfg.hidden = {7, 5};
    const Head head = make_head(cfg, 4, rng);
    Matrix pooled(5, 4);
    for (Index i = 0; i < pooled.size(); ++i) pooled.data()[i] = rng.normal();
    const Vector eps = gaussian_sample(rng, 5);
    const Vector truth = gaussian_sample(rng, 5);

    auto loss_at = [&](const Vector& theta) {
      Head h = head;
      h.net.unpack(theta);
      return combined_loss(head_forward(h, pooled, eps).scores, truth, 0.05).value;
    };
    const auto pass = head_forward(head, pooled, eps);
    const auto grads = head_backward(head, pass, combined_loss(pass.scores, truth, 0.05).grad);
    Vector analytic(head.net.parameter_count()), theta(head.net.parameter_count());
    grads.net.pack(analytic);
    head.net.pack(theta);
    CHECK(oracle::max_relative_error(analytic, oracle::numeric_gradient(loss_at, theta)) < 1e-5);
  }
}
