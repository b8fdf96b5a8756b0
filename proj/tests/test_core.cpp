#include "oracles.hpp"
#include "test_util.hpp"

#include "specsched/core.hpp"
#include "specsched/losses.hpp"
#include "specsched/schedules.hpp"
#include "specsched/simulate.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace specsched;
using testutil::vec;

TEST_CASE("wiener_denoise is the identity at alpha_bar = 1") {
  const auto m = testutil::model(vec({2.0, 0.5, 3.0}), vec({1.0, -1.0, 0.2}));
  const VectorXd v = vec({0.3, -0.7, 1.1});
  CHECK((wiener_denoise(m, 1.0, v) - v).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("wiener_denoise tends to the prior mean as alpha_bar -> 0") {
  const auto m = testutil::model(vec({2.0, 0.5}), vec({1.0, -1.0}));
  const VectorXd out = wiener_denoise(m, 1e-14, vec({5.0, 5.0}));
  CHECK((out - m.mean_spectral).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("wiener_denoise matches Gaussian conditioning") {
  const auto m = testutil::model(vec({2.0, 0.5}), vec({1.0, 0.0}));
  const VectorXd v = vec({1.0, 1.0});
  const VectorXd ref =
      oracle::gaussian_conditional_mean(m.mean_spectral, m.eigenvalues.asDiagonal().toDenseMatrix(), 0.5, v);
  CHECK((wiener_denoise(m, 0.5, v) - ref).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mm = testutil::model(vec({u(gen) * 4, u(gen), u(gen) * 0.1}), vec({u(gen), -u(gen), u(gen)}));
    const VectorXd x = vec({u(gen), u(gen), -u(gen)});
    const double ab = u(gen);
    const VectorXd r = oracle::gaussian_conditional_mean(
        mm.mean_spectral, mm.eigenvalues.asDiagonal().toDenseMatrix(), ab, x);
    CHECK((wiener_denoise(mm, ab, x) - r).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("wiener_denoise rejects bad inputs") {
  const auto m = testutil::model(vec({1.0}), vec({0.0}));
  CHECK_THROWS_AS(wiener_denoise(m, 0.0, vec({1.0})), ValidationError);
  CHECK_THROWS_AS(wiener_denoise(m, 1.5, vec({1.0})), ValidationError);
  CHECK_THROWS_AS(wiener_denoise(m, 0.5, vec({1.0, 2.0})), ValidationError);
}

TEST_CASE("ddim_gains hand values") {
  const auto same = ddim_gains(0.4, 0.4);
  CHECK(same.a == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(same.b) < 1e-15);

  const auto g = ddim_gains(0.75, 0.25);
  CHECK(g.a == doctest::Approx(0.57735).epsilon(1e-5));
  CHECK(g.b == doctest::Approx(0.57735).epsilon(1e-5));

  const auto lim = ddim_gains(0.5, 1e-14);
  CHECK(lim.a == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
  CHECK(lim.b == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));

  CHECK_THROWS_AS(ddim_gains(0.25, 0.75), ValidationError);
  CHECK_THROWS_AS(ddim_gains(1.0, 0.5), ValidationError);
  CHECK_THROWS_AS(ddim_gains(0.5, 0.0), ValidationError);
}

TEST_CASE("ddim_gains reproduce one literal time-domain step") {
  // d = 1, lambda = 2, mu = 0.3: one DDIM step via the epsilon form.
  const double lam = 2.0, mu = 0.3, p = 0.75, c = 0.25, x = 0.9;
  const auto m = testutil::model(vec({lam}), vec({mu}));
  const double x0 = oracle::gaussian_conditional_mean(vec({mu}), vec({lam}).asDiagonal().toDenseMatrix(), c,
                                                      vec({x}))[0];
  const double eps = (x - std::sqrt(c) * x0) / std::sqrt(1 - c);
  const double literal = std::sqrt(p) * x0 + std::sqrt(1 - p) * eps;
  const auto g = ddim_gains(p, c);
  const double via_gains = g.a * x + g.b * wiener_denoise(m, c, vec({x}))[0];
  CHECK(via_gains == doctest::Approx(literal).epsilon(1e-14));
}

TEST_CASE("ddim_transfer with one step equals the per-step gains") {
  const auto m = testutil::model(vec({0.5, 2.0, 0.0}), vec({1.0, 2.0, 3.0}));
  const auto s = testutil::schedule_from(vec({1 - 1e-4, 4e-5}));
  const Transfer t = ddim_transfer(m, s);
  const auto g = ddim_gains(1 - 1e-4, 4e-5);
  for (Index i = 0; i < 3; ++i) {
    const double lam = m.eigenvalues[i];
    const double c = 4e-5;
    const double den = c * lam + 1 - c;
    CHECK(t.d1[i] == doctest::Approx(g.a + g.b * std::sqrt(c) * lam / den).epsilon(1e-14));
    CHECK(t.d2[i] == doctest::Approx(g.b * (1 - c) / den).epsilon(1e-14));
    CHECK(t.var_extra[i] == 0.0);
  }
}

TEST_CASE("ddim_transfer converges for fine isotropic discretization") {
  const auto m = testutil::model(VectorXd::Ones(4), VectorXd::Ones(4));
  const Transfer t = ddim_transfer(m, cosine_schedule(1000, 0, 1, 1));
  for (Index i = 0; i < 4; ++i) {
    CHECK(std::abs(t.d1[i] - 1.0) < 0.01);
    CHECK(std::abs(t.d2[i] - 1.0) < 0.01);
  }
}

TEST_CASE("spectral transfer equals dense time-domain composition on random covariances") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 2 + trial % 7;  // 2..8
    const MatrixXd sigma = oracle::random_spd(d, gen);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sigma);
    const MatrixXd U = eig.eigenvectors();
    const auto s = testutil::random_schedule(3 + trial, gen);
    const auto m = testutil::model(eig.eigenvalues(), VectorXd::Zero(d));

    for (bool ddpm : {false, true}) {
      const Transfer t = ddpm ? ddpm_transfer(m, s) : ddim_transfer(m, s);
      const auto dense = oracle::dense_composition(VectorXd::Zero(d), sigma, s.alpha_bar, ddpm);
      const MatrixXd lin = U.transpose() * dense.lin * U;
      CHECK((lin - MatrixXd(t.d1.asDiagonal())).cwiseAbs().maxCoeff() < 1e-10);
      // The offset is linear in the mean: recover its matrix column by column.
      MatrixXd off(d, d);
      for (Index j = 0; j < d; ++j) {
        off.col(j) = oracle::dense_composition(VectorXd::Unit(d, j), sigma, s.alpha_bar, ddpm).off;
      }
      const MatrixXd offset_spec = U.transpose() * off * U;
      CHECK((offset_spec - MatrixXd(t.d2.asDiagonal())).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("ddpm_transfer: two-step scalar composition by hand") {
  // d = 1, lambda = 1, mu = 0: the Wiener denoiser is x0 = sqrt(c) x, and
  // each literal DDPM step reduces to x' = sqrt(c / p) x + sigma z.
  const VectorXd ab = vec({0.9999, 0.5, 4e-5});
  const auto m = testutil::model(vec({1.0}), vec({0.0}));
  const Transfer t = ddpm_transfer(m, testutil::schedule_from(ab));

  auto step = [](double p, double c) {
    const double x0_gain = std::sqrt(c);  // lambda = 1
    const double eps_gain = (1 - std::sqrt(c) * x0_gain) / std::sqrt(1 - c);
    const double alpha = c / p;
    const double gain = (1 - (1 - alpha) / std::sqrt(1 - c) * eps_gain) / std::sqrt(alpha);
    const double var = (1 - p) / (1 - c) * (1 - alpha);
    return std::pair{gain, var};
  };
  const auto [g2, v2] = step(ab[1], ab[2]);  // s = 2 runs first
  const auto [g1, v1] = step(ab[0], ab[1]);
  CHECK(t.d1[0] == doctest::Approx(g1 * g2).epsilon(1e-13));
  CHECK(t.var_extra[0] == doctest::Approx(g1 * g1 * v2 + v1).epsilon(1e-13));
  CHECK(t.d1[0] == doctest::Approx(std::sqrt(4e-5 / 0.9999)).epsilon(1e-13));

  const GaussianDiag out = output_distribution(t, m);
  CHECK(out.variance[0] == doctest::Approx(g1 * g1 * g2 * g2 + g1 * g1 * v2 + v1).epsilon(1e-13));
  CHECK(out.mean[0] == 0.0);
}

TEST_CASE("ddpm_transfer: a flat step injects no noise") {
  const auto m = testutil::model(vec({0.7}), vec({0.0}));
  const auto flat = ddpm_transfer(m, testutil::schedule_from(vec({0.9999, 0.5, 0.5, 4e-5})));
  const auto plain = ddpm_transfer(m, testutil::schedule_from(vec({0.9999, 0.5, 4e-5})));
  CHECK(flat.var_extra[0] == doctest::Approx(plain.var_extra[0]).epsilon(1e-14));
  CHECK(flat.d1[0] == doctest::Approx(plain.d1[0]).epsilon(1e-14));
}

TEST_CASE("transfer rejects invalid schedules") {
  const auto m = testutil::model(vec({1.0}), vec({0.0}));
  CHECK_THROWS_AS(ddim_transfer(m, testutil::schedule_from(vec({0.9, 0.95, 0.1}))), ValidationError);
  Schedule bad = testutil::schedule_from(vec({0.9999, 0.5, 4e-5}));
  bad.eps0 = 0.01;
  CHECK_THROWS_AS(ddim_transfer(m, bad), ValidationError);
}

TEST_CASE("intermediate_distribution endpoints") {
  const auto& m = testutil::benchmark().spectral;
  const Schedule s = cosine_schedule(20, 0, 1, 1);
  const GaussianDiag top = intermediate_distribution(m, s, 20);
  CHECK(top.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK((top.variance.array() == 1.0).all());

  const GaussianDiag bottom = intermediate_distribution(m, s, 0);
  const GaussianDiag out = output_distribution(ddim_transfer(m, s), m);
  CHECK((bottom.mean - out.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((bottom.variance - out.variance).cwiseAbs().maxCoeff() == 0.0);

  const GaussianDiag one = intermediate_distribution(m, s, 19);
  const auto g = ddim_gains(s.alpha_bar[19], s.alpha_bar[20]);
  const double c = s.alpha_bar[20];
  for (Index i = 0; i < m.dim(); ++i) {
    const double lam = m.eigenvalues[i];
    const double den = c * lam + 1 - c;
    const double G = g.a + g.b * std::sqrt(c) * lam / den;
    CHECK(one.variance[i] == doctest::Approx(G * G).epsilon(1e-14));
    CHECK(one.mean[i] == doctest::Approx(g.b * (1 - c) / den * m.mean_spectral[i]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(intermediate_distribution(m, s, 21), ValidationError);
  CHECK_THROWS_AS(intermediate_distribution(m, s, -1), ValidationError);
}

TEST_CASE("per-step gains are positive and b >= 0 for valid schedules") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = testutil::random_schedule(2 + trial % 30, gen);
    for (int k = 1; k <= s.steps(); ++k) {
      CHECK(ddim_gains(s.alpha_bar[k - 1], s.alpha_bar[k]).b >= 0.0);
      CHECK(vp_step_gain(s.alpha_bar[k - 1], s.alpha_bar[k], u(gen)).g > 0.0);
    }
  }
}

TEST_CASE("mean_bias") {
  const auto& syn = testutil::benchmark().spectral;
  const auto zero_mean = testutil::model(syn.eigenvalues, VectorXd::Zero(syn.dim()));
  const Schedule s = cosine_schedule(30, 0, 0.5, 1);
  CHECK(mean_bias(ddim_transfer(zero_mean, s), zero_mean).bias.cwiseAbs().maxCoeff() == 0.0);

  Transfer ones = ddim_transfer(syn, s);
  ones.d2.setOnes();
  CHECK(mean_bias(ones, syn).bias.cwiseAbs().maxCoeff() == 0.0);

  double prev = -1.0;
  for (int S : {10, 100, 1000}) {
    const double gap = mean_bias(ddim_transfer(syn, cosine_schedule(S, 0, 0.5, 1)), syn).d2_gap.maxCoeff();
    CHECK(gap >= prev);
    prev = gap;
  }
}

TEST_CASE("VP/VE conversion") {
  CHECK(alpha_bar_to_sigma(0.5) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(alpha_bar_to_sigma(1.0) == 0.0);
  CHECK_THROWS_AS(alpha_bar_to_sigma(0.0), ValidationError);
  CHECK(sigma_to_alpha_bar(1.0) == doctest::Approx(0.5).epsilon(1e-15));

  const Schedule s = cosine_schedule(28, 0, 1, 1);
  const Schedule back = ve_to_vp(vp_to_ve(s));
  CHECK((back.alpha_bar - s.alpha_bar).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("VE gains: hand values and VP relation") {
  const double p = 0.99, c = 0.25;
  const double sp = alpha_bar_to_sigma(p), sc = alpha_bar_to_sigma(c);
  const auto ve = ve_step_gain(sp, sc, 1.0);
  const auto vp = vp_step_gain(p, c, 1.0);
  CHECK(ve.g == doctest::Approx(0.29352).epsilon(1e-4));
  CHECK(vp.g == doctest::Approx(0.58410).epsilon(1e-4));
  CHECK(ve.m == doctest::Approx(0.70648).epsilon(1e-4));
  CHECK(vp.m == doctest::Approx(0.70294).epsilon(1e-4));
  CHECK(vp.g == doctest::Approx(std::sqrt(p / c) * ve.g).epsilon(1e-12));
  CHECK(vp.m == doctest::Approx(std::sqrt(p) * ve.m).epsilon(1e-12));

  const auto flat = ve_step_gain(0.7, 0.7, 3.0);
  CHECK(flat.g == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(flat.m) < 1e-15);
}

TEST_CASE("VE transfer equals VP transfer after rescaling the input") {
  const auto& m = testutil::benchmark().spectral;
  const Schedule s = cosine_schedule(40, 0, 1, 1);
  const Transfer vp = ddim_transfer(m, s);
  const Transfer ve = ve_ddim_transfer(m, vp_to_ve(s));
  CHECK(ve.formulation == Formulation::ve);
  // x_bar = x sqrt(1 + sigma^2): D1_vp = D1_ve * sqrt(ab_0 / ab_S), D2_vp = sqrt(ab_0) D2_ve.
  const double k1 = std::sqrt(s.alpha_bar[0] / s.alpha_bar[40]);
  for (Index i = 0; i < m.dim(); ++i) {
    CHECK(vp.d1[i] == doctest::Approx(k1 * ve.d1[i]).epsilon(1e-10));
    CHECK(vp.d2[i] == doctest::Approx(std::sqrt(s.alpha_bar[0]) * ve.d2[i]).epsilon(1e-10));
  }
  VeSchedule zero;
  zero.sigma = vec({0.0, 0.0, 1.0});
  CHECK_THROWS_AS(ve_ddim_transfer(m, zero), ValidationError);
}

TEST_CASE("W2 shrinks with refinement on the benchmark model") {
  const auto& m = testutil::benchmark().spectral;
  const double coarse = w2_loss(m, ddim_transfer(m, cosine_schedule(10, 0, 1, 1)));
  const double fine = w2_loss(m, ddim_transfer(m, cosine_schedule(334, 0, 1, 1)));
  CHECK(fine < coarse);
}
