#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "natadv/error.hpp"
#include "natadv/nn.hpp"
#include "support/oracles.hpp"

using namespace natadv;

TEST(Mlp, ZeroParametersGiveZero) {
  std::mt19937_64 rng(1);
  Mlp net(MlpSpec{4, {8, 8}, 3}, rng);
  net.set_params(Eigen::VectorXd::Zero(net.params().size()));
  EXPECT_TRUE(net.forward(Eigen::MatrixXd::Random(4, 5)).isZero(0.0));
}

TEST(Mlp, OneByOneIsAffine) {
  std::mt19937_64 rng(1);
  Mlp net(MlpSpec{1, {}, 1}, rng);
  Eigen::VectorXd p(2);
  p << 1.7, -0.3;
  net.set_params(p);
  EXPECT_NEAR(net.forward_one(Eigen::VectorXd::Constant(1, 2.0))[0], 1.7 * 2.0 - 0.3, 1e-15);
}

TEST(Mlp, MatchesDenseOracle) {
  std::mt19937_64 rng(11);
  Mlp net(MlpSpec{5, {7, 4}, 3}, rng);
  Eigen::VectorXd p = net.params();
  std::normal_distribution<double> n01(0.0, 0.5);
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = n01(rng);
  net.set_params(p);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(5);
    for (auto& v : x) v = n01(rng);
    const auto ref = oracle::dense_forward(net.spec(), p, x);
    const auto y = net.forward_one(Eigen::Map<const Eigen::VectorXd>(x.data(), 5));
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(y[k], ref[k], 1e-12);
  }
}

TEST(Mlp, ShapeErrors) {
  std::mt19937_64 rng(1);
  Mlp net(MlpSpec{3, {4}, 2}, rng);
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(2, 1)), ShapeError);
  EXPECT_THROW(net.set_params(Eigen::VectorXd::Zero(3)), ShapeError);
  EXPECT_THROW(Mlp(MlpSpec{0, {}, 1}, rng), ShapeError);
}

TEST(Mlp, StaleCacheRejected) {
  std::mt19937_64 rng(1);
  Mlp net(MlpSpec{3, {4}, 2}, rng);
  Mlp::Cache cache;
  net.forward(Eigen::MatrixXd::Ones(3, 1), &cache);
  net.mutable_params()[0] += 1.0;
  EXPECT_THROW(net.backward(cache, Eigen::MatrixXd::Ones(2, 1)), InvalidStateError);
  Mlp other = net;
  other.forward(Eigen::MatrixXd::Ones(3, 1), &cache);
  EXPECT_THROW(net.backward(cache, Eigen::MatrixXd::Ones(2, 1)), InvalidStateError);
}

TEST(Mlp, BackwardSimpleCases) {
  std::mt19937_64 rng(1);
  Mlp lin(MlpSpec{3, {}, 1}, rng);
  Eigen::VectorXd x(3);
  x << 0.5, -2.0, 4.0;
  Mlp::Cache cache;
  lin.forward(x, &cache);
  const auto g = lin.backward(cache, Eigen::MatrixXd::Ones(1, 1));
  EXPECT_NEAR(g[0], 0.5, 1e-15);
  EXPECT_NEAR(g[1], -2.0, 1e-15);
  EXPECT_NEAR(g[2], 4.0, 1e-15);
  EXPECT_NEAR(g[3], 1.0, 1e-15);
  EXPECT_TRUE(lin.backward(cache, Eigen::MatrixXd::Zero(1, 1)).isZero(0.0));
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int width : {1, 3, 128}) {
    Mlp net(MlpSpec{6, {width, width}, 4}, rng);
    EXPECT_LT(oracle::gradient_check(net, rng), 1e-4) << "width " << width;
  }
}

TEST(Mlp, InputGradient) {
  std::mt19937_64 rng(4);
  Mlp net(MlpSpec{4, {6}, 2}, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 1), g = Eigen::MatrixXd::Random(2, 1);
  Mlp::Cache cache;
  net.forward(x, &cache);
  Eigen::MatrixXd gx;
  net.backward(cache, g, &gx);
  for (int i = 0; i < 4; ++i) {
    Eigen::MatrixXd a = x, b = x;
    a(i, 0) += 1e-6;
    b(i, 0) -= 1e-6;
    const double fd = ((net.forward(a) - net.forward(b)).array() * g.array()).sum() / 2e-6;
    EXPECT_NEAR(gx(i, 0), fd, 1e-6);
  }
}

TEST(Gaussian, LogProb) {
  const Eigen::VectorXd mu = Eigen::VectorXd::Constant(1, 0.3), var = Eigen::VectorXd::Ones(1);
  const double base = -0.5 * std::log(2 * std::numbers::pi);
  EXPECT_NEAR(gaussian_logprob(mu, var, mu), base, 1e-15);
  EXPECT_NEAR(gaussian_logprob(mu, var, mu + Eigen::VectorXd::Ones(1)), base - 0.5, 1e-15);
  Eigen::VectorXd m2(2), v2(2), a2(2);
  m2 << 0.1, -1;
  v2 << 0.5, 2;
  a2 << 0.4, 0.2;
  EXPECT_NEAR(gaussian_logprob(m2, v2, a2),
              gaussian_logprob(m2.head(1), v2.head(1), a2.head(1)) + gaussian_logprob(m2.tail(1), v2.tail(1), a2.tail(1)),
              1e-14);
  EXPECT_THROW(gaussian_logprob(mu, Eigen::VectorXd::Zero(1), mu), DomainError);
}

TEST(Gaussian, DensityIntegratesToOne) {
  Eigen::VectorXd mu(2), var(2);
  mu << 0.5, -1.0;
  var << 0.3, 2.0;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 200000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd a(2);
    for (int j = 0; j < 2; ++j) a[j] = mu[j] + 6.0 * std::sqrt(var[j]) * u(rng);
    sum += std::exp(gaussian_logprob(mu, var, a));
  }
  const double volume = 12.0 * std::sqrt(var[0]) * 12.0 * std::sqrt(var[1]);
  EXPECT_NEAR(sum / n * volume, 1.0, 0.02);
}

TEST(Gaussian, Sampling) {
  Eigen::VectorXd mu(2), var(2);
  mu << 1.0, -2.0;
  var << 0.25, 4.0;
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(gaussian_sample(mu, var, a), gaussian_sample(mu, var, b));
  std::mt19937_64 rng(6);
  EXPECT_EQ(gaussian_sample(mu, Eigen::VectorXd::Zero(2), rng), mu);
  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) sum += gaussian_sample(mu, var, rng);
  for (int j = 0; j < 2; ++j) EXPECT_LT(std::abs(sum[j] / n - mu[j]), 4.0 * std::sqrt(var[j] / n));
}

TEST(Gaussian, KlClosedForm) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(1), v = Eigen::VectorXd::Ones(1);
  EXPECT_EQ(diag_gaussian_kl(m, v, m, v), 0.0);
  EXPECT_NEAR(diag_gaussian_kl(m, v, m + Eigen::VectorXd::Ones(1), v), 0.5, 1e-15);
  EXPECT_THROW(diag_gaussian_kl(m, Eigen::VectorXd::Zero(1), m, v), DomainError);
  EXPECT_THROW(diag_gaussian_kl(m, v, m, -v), DomainError);
}

TEST(Gaussian, KlNonNegativeAndMonteCarlo) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    const int d = 1 + trial;
    Eigen::VectorXd mp(d), vp(d), mq(d), vq(d);
    for (int j = 0; j < d; ++j) {
      mp[j] = n01(rng);
      mq[j] = n01(rng);
      vp[j] = std::exp(0.5 * n01(rng));
      vq[j] = std::exp(0.5 * n01(rng));
    }
    const double kl = diag_gaussian_kl(mp, vp, mq, vq);
    EXPECT_GE(kl, 0.0);
    EXPECT_NEAR(diag_gaussian_kl(mp, vp, mp, vp), 0.0, 1e-12);
    const auto [mc, se] = oracle::kl_monte_carlo(mp, vp, mq, vq, 200000, rng);
    EXPECT_LT(std::abs(mc - kl), 3.0 * se + 1e-12) << "trial " << trial;
  }
}

TEST(Adam, Steps) {
  Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 1.0);
  AdamState s(3, 0.01);
  adam_step(p, Eigen::VectorXd::Zero(3), s);
  EXPECT_EQ(p, Eigen::VectorXd::Constant(3, 1.0));

  Eigen::VectorXd q = Eigen::VectorXd::Constant(2, 1.0), g(2);
  g << 0.5, -3.0;
  AdamState t(2, 0.01);
  adam_step(q, g, t);
  EXPECT_NEAR(q[0], 1.0 - 0.01, 1e-8);
  EXPECT_NEAR(q[1], 1.0 + 0.01, 1e-8);

  // second step with the opposite gradient, evaluated by hand
  adam_step(q, -g, t);
  for (int j = 0; j < 2; ++j) {
    const double m = 0.9 * 0.1 * g[j] + 0.1 * -g[j];
    const double v = 0.999 * 0.001 * g[j] * g[j] + 0.001 * g[j] * g[j];
    const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
    const double first = 1.0 - 0.01 * (g[j] / (std::abs(g[j]) + 1e-8));
    EXPECT_NEAR(q[j], first - 0.01 * mhat / (std::sqrt(vhat) + 1e-8), 1e-12);
  }
  EXPECT_THROW(adam_step(q, Eigen::VectorXd::Zero(3), t), ShapeError);
}

TEST(GaussianPolicy, LogVarClampAndHeads) {
  std::mt19937_64 rng(2);
  GaussianPolicy pol(4, {8}, 2, rng, 9.0);
  const auto out = pol.forward(Eigen::MatrixXd::Random(4, 3));
  EXPECT_EQ(out.mean.rows(), 2);
  EXPECT_TRUE((out.logvar.array() <= kLogVarMax).all());
  EXPECT_TRUE((out.logvar.array() >= kLogVarMin).all());
  Mlp odd(MlpSpec{3, {4}, 3}, rng);
  EXPECT_THROW(GaussianPolicy{odd}, ShapeError);
}

TEST(GaussianPolicy, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  GaussianPolicy pol(3, {5}, 2, rng, -1.0);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4), gm = Eigen::MatrixXd::Random(2, 4),
                  gl = Eigen::MatrixXd::Random(2, 4);
  Mlp::Cache cache;
  pol.forward(x, &cache);
  const Eigen::VectorXd g = pol.backward(cache, gm, gl);
  const Eigen::VectorXd p0 = pol.net().params();
  for (Eigen::Index k = 0; k < p0.size(); k += 3) {
    Eigen::VectorXd a = p0, b = p0;
    a[k] += 1e-6;
    b[k] -= 1e-6;
    auto loss = [&](const Eigen::VectorXd& p) {
      pol.net().set_params(p);
      const auto o = pol.forward(x);
      return (o.mean.array() * gm.array()).sum() + (o.logvar.array() * gl.array()).sum();
    };
    EXPECT_NEAR(g[k], (loss(a) - loss(b)) / 2e-6, 1e-6);
  }
}

TEST(Checkpoint, RoundTripIsBitStable) {
  std::mt19937_64 rng(3);
  Mlp net(MlpSpec{5, {6, 7}, 2}, rng);
  const auto j = checkpoint_json(net);
  const Mlp back = mlp_from_checkpoint(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.spec(), net.spec());
  EXPECT_EQ(back.params(), net.params());
  EXPECT_EQ(checkpoint_json(back).dump(), j.dump());
}
