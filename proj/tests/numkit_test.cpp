#include <doctest.h>

#include "asal/numkit.hpp"
#include "oracles.hpp"

using namespace asal;

namespace {

Matrix random_matrix(Rng& rng, Index r, Index c) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("mlp_forward: zero network gives zero output") {
  Mlp<double> net({4, 3, 2});
  Rng rng(1);
  CHECK(mlp_forward(net, random_matrix(rng, 5, 4)).output.isZero());
}

TEST_CASE("mlp_forward: identity layer passes input through") {
  Mlp<double> net({3, 3});
  net.layer(0).weight = Matrix::Identity(3, 3);
  Rng rng(2);
  const Matrix x = random_matrix(rng, 4, 3);
  CHECK(mlp_forward(net, x).output == x);
}

TEST_CASE("mlp_forward: all-ones net on [1, -1]") {
  Mlp<double> net({2, 2, 1});
  net.layer(0).weight.setOnes();
  net.layer(1).weight.setOnes();
  Matrix x(1, 2);
  x << 1, -1;
  const auto fwd = mlp_forward(net, x);
  CHECK(fwd.tape.pre_activations[0].isZero());
  CHECK(fwd.output(0, 0) == 0.0);
}

TEST_CASE("mlp_forward: rejects wrong input width with both shapes") {
  Mlp<double> net({4, 2});
  try {
    mlp_forward(net, Matrix::Zero(2, 3));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find('4') != std::string::npos);
  }
}

TEST_CASE("mlp: parameter count and pack round trip") {
  Rng rng(3);
  auto net = Mlp<double>::glorot({5, 4, 3, 2}, rng);
  CHECK(net.parameter_count() == 6 * 4 + 5 * 3 + 4 * 2);
  Vector flat(net.parameter_count());
  net.pack(flat);
  auto copy = net.zeros_like();
  copy.unpack(flat);
  CHECK(copy == net);
  const auto blocks = net.blocks("net");
  CHECK(blocks.size() == 6);
  CHECK(blocks.back().offset + blocks.back().size == net.parameter_count());
}

TEST_CASE("mlp: glorot bound and zero biases") {
  Rng rng(4);
  auto net = Mlp<double>::glorot({10, 6}, rng);
  CHECK(net.layer(0).weight.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 16.0));
  CHECK(net.layer(0).bias.isZero());
}

TEST_CASE("mlp_backward: zero upstream gradient") {
  Rng rng(5);
  auto net = Mlp<double>::glorot({3, 4, 2}, rng);
  const auto fwd = mlp_forward(net, random_matrix(rng, 2, 3));
  const auto g = mlp_backward(net, fwd.tape, Matrix::Zero(2, 2));
  Vector flat(net.parameter_count());
  g.params.pack(flat);
  CHECK(flat.isZero());
  CHECK(g.input.isZero());
}

TEST_CASE("mlp_backward: half squared norm through identity") {
  Mlp<double> net({3, 3});
  net.layer(0).weight = Matrix::Identity(3, 3);
  Rng rng(6);
  const Matrix x = random_matrix(rng, 2, 3);
  const auto fwd = mlp_forward(net, x);
  CHECK(mlp_backward(net, fwd.tape, fwd.output).input.isApprox(x));
}

TEST_CASE("mlp_backward: matches central differences") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto net = Mlp<double>::glorot({6, 8, 5, 3}, rng);
    for (std::size_t l = 0; l < net.layer_count(); ++l) net.layer(l).bias = random_matrix(rng, 1, net.layer(l).bias.size()) * 0.1;
    const Matrix x = random_matrix(rng, 4, 6);
    const Matrix probe = random_matrix(rng, 4, 3);
    auto loss = [&](const Mlp<double>& n, const Matrix& in) { return (mlp_forward(n, in).output.array() * probe.array()).sum(); };

    const auto fwd = mlp_forward(net, x);
    const auto g = mlp_backward(net, fwd.tape, probe);
    Vector analytic(net.parameter_count());
    g.params.pack(analytic);
    Vector theta(net.parameter_count());
    net.pack(theta);
    const Vector numeric = oracle::numeric_gradient(
        [&](const Vector& p) {
          auto n = net;
          n.unpack(p);
          return loss(n, x);
        },
        theta);
    CHECK(oracle::max_relative_error(analytic, numeric) < 1e-4);

    const Vector x_flat = Eigen::Map<const Vector>(x.data(), x.size());
    const Vector numeric_in = oracle::numeric_gradient(
        [&](const Vector& v) { return loss(net, Eigen::Map<const Matrix>(v.data(), 4, 6)); }, x_flat);
    const Vector analytic_in = Eigen::Map<const Vector>(g.input.data(), g.input.size());
    CHECK(oracle::max_relative_error(analytic_in, numeric_in) < 1e-4);
  }
}

TEST_CASE("mlp_backward: tape mismatch rejected") {
  Rng rng(8);
  auto net = Mlp<double>::glorot({3, 4, 2}, rng);
  auto other = Mlp<double>::glorot({3, 5, 2}, rng);
  const auto fwd = mlp_forward(other, random_matrix(rng, 2, 3));
  CHECK_THROWS_AS(mlp_backward(net, fwd.tape, Matrix::Zero(2, 2)), DimensionError);
  const auto ok = mlp_forward(net, random_matrix(rng, 2, 3));
  CHECK_THROWS_AS(mlp_backward(net, ok.tape, Matrix::Zero(3, 2)), DimensionError);
}

TEST_CASE("adam_step: zero gradient without decay leaves params") {
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  auto state = AdamState<double>::init(3, cfg);
  Vector p(3);
  p << 1, -2, 3;
  const Vector keep = p;
  adam_step(state, p, Vector::Zero(3));
  CHECK(p == keep);
  CHECK(state.step == 1);
}

TEST_CASE("adam_step: first step moves by lr against the sign") {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.0;
  auto state = AdamState<double>::init(2, cfg);
  Vector p = Vector::Zero(2);
  Vector g(2);
  g << 0.3, -7.0;
  adam_step(state, p, g);
  // m_hat = g, v_hat = g^2, so delta = -lr * g / (|g| + eps)
  CHECK(p(0) == doctest::Approx(-0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
  CHECK(p(1) == doctest::Approx(0.01 * 7.0 / (7.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("adam_step: decoupled decay on a zero gradient") {
  AdamConfig cfg;  // lr 1e-4, wd 5e-4
  auto state = AdamState<double>::init(1, cfg);
  Vector p = Vector::Constant(1, 2.0);
  adam_step(state, p, Vector::Zero(1));
  CHECK(p(0) == doctest::Approx(2.0 * (1.0 - 5e-8)).epsilon(1e-15));
}

TEST_CASE("adam_step: non-finite gradient names the block") {
  auto state = AdamState<double>::init(5, AdamConfig{});
  Vector p = Vector::Zero(5);
  Vector g = Vector::Zero(5);
  g(3) = std::numeric_limits<double>::quiet_NaN();
  const std::vector<ParamBlockInfo> layout{{"head.layer0.weight", 0, 2}, {"head.layer0.bias", 2, 3}};
  try {
    adam_step(state, p, g, layout);
    FAIL("expected NonFiniteGradient");
  } catch (const NonFiniteGradient& e) {
    CHECK(e.block() == "head.layer0.bias");
  }
  CHECK(state.step == 0);
  CHECK(p.isZero());
}

TEST_CASE("adam_step: shape mismatch rejected") {
  auto state = AdamState<double>::init(2, AdamConfig{});
  Vector p = Vector::Zero(3);
  CHECK_THROWS_AS(adam_step(state, p, Vector::Zero(3)), DimensionError);
}

TEST_CASE("gaussian_sample: determinism and moments") {
  Rng a(42), b(42);
  CHECK(gaussian_sample(a, 0).size() == 0);
  CHECK(gaussian_sample(a, 50) == gaussian_sample(b, 50));
  Rng rng(9);
  const Vector draws = gaussian_sample(rng, 100000);
  const double mean = draws.mean();
  const double var = (draws.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng: state round trip and bounded draws") {
  Rng rng(11);
  rng.normal();
  Rng copy;
  copy.set_state(rng.state());
  CHECK(copy == rng);
  CHECK(copy.next_u64() == rng.next_u64());
  for (int i = 0; i < 1000; ++i) CHECK(rng.below(7) < 7);
  const double u = rng.uniform();
  CHECK((u >= 0.0 && u < 1.0));
  CHECK_THROWS(rng.below(0));
}
