#include <doctest.h>

#include "asal/metrics.hpp"
#include "oracles.hpp"

using namespace asal;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// Random vector with deliberate ties from a small value pool.
Vector tied_vector(Rng& rng, Index n, int pool) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = static_cast<double>(rng.below(static_cast<std::uint64_t>(pool))) * 0.5;
  return v;
}

}  // namespace

TEST_CASE("plcc: reference values") {
  const Vector t = vec({1, 2, 3, 4});
  CHECK(*plcc((2.0 * t.array() + 1.0).matrix(), t) == doctest::Approx(1.0));
  CHECK(*plcc(-t, t) == doctest::Approx(-1.0));
  CHECK(*plcc(vec({1, 3, 2, 4}), t) == doctest::Approx(0.8).epsilon(1e-14));
}

TEST_CASE("srcc: reference values") {
  const Vector t = vec({1, 2, 3, 4});
  CHECK(*srcc(t.array().exp().matrix(), t) == doctest::Approx(1.0));
  CHECK(*srcc(vec({10, 30, 20, 40}), t) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(*srcc(vec({1, 1, 2}), vec({1, 2, 3})) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("fractional_ranks: average ties") {
  const Vector r = fractional_ranks(vec({5, 1, 5, 3, 5}));
  CHECK(r == vec({4, 1, 4, 2, 4}));
}

TEST_CASE("undefined metrics are empty, not zero") {
  CHECK_FALSE(plcc(vec({1, 1, 1}), vec({1, 2, 3})).has_value());
  CHECK_FALSE(srcc(vec({1, 2, 3}), vec({4, 4, 4})).has_value());
  CHECK_FALSE(srcc(vec({1}), vec({2})).has_value());
  CHECK_THROWS_AS(plcc(vec({1, 2}), vec({1, 2, 3})), DimensionError);
}

TEST_CASE("rl2e: reference values and range contract") {
  CHECK(rl2e(vec({1, 2}), vec({1, 2}), 5, 1) == 0.0);
  CHECK(rl2e(vec({5}), vec({1}), 5, 1) == 1.0);
  CHECK(rl2e(vec({2, 4}), vec({1, 5}), 5, 1) == doctest::Approx(0.0625));
  const Vector p = vec({1.3, 2.9, 4.4}), t = vec({1.0, 3.5, 4.0});
  CHECK(rl2e(p, t, 9, 1) == doctest::Approx(rl2e(p, t, 5, 1) / 4.0).epsilon(1e-14));
  CHECK_THROWS_AS(rl2e(p, t, 1, 1), std::invalid_argument);
}

TEST_CASE("metrics agree with brute-force oracles") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(63));
    const bool ties = trial % 3 == 0;
    const Vector p = ties ? tied_vector(rng, n, 6) : gaussian_sample(rng, n);
    const Vector t = ties ? tied_vector(rng, n, 8) : gaussian_sample(rng, n);
    const double ref_p = oracle::pearson(p, t);
    const double ref_s = oracle::spearman(p, t);
    CHECK(plcc(p, t).has_value() == !std::isnan(ref_p));
    CHECK(srcc(p, t).has_value() == !std::isnan(ref_s));
    if (!std::isnan(ref_p)) CHECK(std::abs(*plcc(p, t) - ref_p) < 1e-10);
    if (!std::isnan(ref_s)) CHECK(std::abs(*srcc(p, t) - ref_s) < 1e-10);
    CHECK(std::abs(rl2e(p, t, 5, 1) - oracle::relative_l2_error(p, t, 5, 1)) < 1e-10);
  }
}

TEST_CASE("srcc equals plcc of ranks and is invariant to increasing maps") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector p = gaussian_sample(rng, 20), t = gaussian_sample(rng, 20);
    const double s = *srcc(p, t);
    CHECK(s == doctest::Approx(*plcc(fractional_ranks(p), fractional_ranks(t))).epsilon(1e-15));
    CHECK(std::abs(*srcc(p.array().exp().matrix(), t) - s) < 1e-12);
    CHECK(std::abs(*srcc(p.array().cube().matrix(), t) - s) < 1e-12);
    CHECK(std::abs(*srcc((3.0 * p.array() - 2.0).matrix(), t) - s) < 1e-12);
  }
}

TEST_CASE("pooled metrics concatenate rather than average") {
  const std::vector<Predictions> sessions{{vec({1, 2}), vec({1, 2})}, {vec({4, 3}), vec({3, 4})}};
  const auto pooled = pooled_metrics(sessions, 5, 1);
  CHECK(*pooled.srcc == doctest::Approx(0.8).epsilon(1e-14));
  const double averaged = 0.5 * (*srcc(sessions[0].pred, sessions[0].truth) + *srcc(sessions[1].pred, sessions[1].truth));
  CHECK(averaged == doctest::Approx(0.0));
  CHECK(pooled.count == 4);

  const std::vector<Predictions> one{{vec({1, 3, 2}), vec({1, 2, 3})}};
  CHECK(*pooled_metrics(one, 5, 1).srcc == *srcc(one[0].pred, one[0].truth));
  const std::vector<Predictions> ordered{{vec({1, 2}), vec({1, 2})}, {vec({3, 4}), vec({3, 4})}};
  CHECK(*pooled_metrics(ordered, 5, 1).srcc == doctest::Approx(1.0));
  CHECK_THROWS(pooled_metrics(std::vector<Predictions>{}, 5, 1));
}
