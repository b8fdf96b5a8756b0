#include "test_util.hpp"

#include "specsched/schedules.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace specsched;

namespace {

std::vector<Schedule> all_baselines(int S) {
  return {linear_schedule(S),
          cosine_schedule(S, 0, 1, 1),
          cosine_schedule(S, 0, 0.5, 1),
          sigmoid_schedule(S, -3, 3, 1),
          sigmoid_schedule(S, 0, 3, 0.7),
          edm_schedule(S),
          uniform_decrease_schedule(S)};
}

}  // namespace

TEST_CASE("every generator satisfies the schedule invariants") {
  for (int S : {1, 10, 112, 1000}) {
    for (const auto& s : all_baselines(S)) {
      CAPTURE(s.kind);
      CAPTURE(S);
      CHECK_NOTHROW(s.validate());
      CHECK(s.steps() == S);
      CHECK(s.alpha_bar[0] == 1.0 - kDefaultEps0);
      CHECK(s.alpha_bar[S] == kDefaultEpsS);
      for (int i = 1; i <= S; ++i) CHECK(s.alpha_bar[i] < s.alpha_bar[i - 1]);
    }
  }
}

TEST_CASE("generators are deterministic") {
  const auto a = all_baselines(57);
  const auto b = all_baselines(57);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].kind == b[i].kind);
    CHECK((a[i].alpha_bar.array() == b[i].alpha_bar.array()).all());
  }
}

TEST_CASE("custom endpoints are honored") {
  const Schedule s = cosine_schedule(20, 0, 1, 1, {1e-3, 1e-2});
  CHECK(s.alpha_bar[0] == 1.0 - 1e-3);
  CHECK(s.alpha_bar[20] == 1e-2);
  CHECK(s.eps0 == 1e-3);
  CHECK(s.epsS == 1e-2);
  CHECK_THROWS_AS(cosine_schedule(20, 0, 1, 1, {0.5, 0.6}), ValidationError);
}

TEST_CASE("linear schedule") {
  // Product over the training grid, independent of the library's log-sum.
  double prod = 1.0;
  for (int k = 1; k <= 1000; ++k) prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * (k - 1) / 999.0);
  CHECK(prod > 1e-5);
  CHECK(prod < 1e-4);

  const Schedule s1 = linear_schedule(1);
  CHECK(s1.alpha_bar.size() == 2);
  CHECK(s1.alpha_bar[0] == 1.0 - kDefaultEps0);
  CHECK(s1.alpha_bar[1] == kDefaultEpsS);

  // At S = 1000 the interior follows the raw product exactly, modulo the affine map.
  const Schedule s = linear_schedule(1000);
  double raw = 1.0;
  for (int k = 1; k <= 500; ++k) raw *= 1.0 - (1e-4 + (0.02 - 1e-4) * (k - 1) / 999.0);
  const double expected =
      kDefaultEpsS + (raw - prod) / (1.0 - prod) * (1.0 - kDefaultEps0 - kDefaultEpsS);
  CHECK(s.alpha_bar[500] == doctest::Approx(expected).epsilon(1e-10));

  CHECK_THROWS_AS(linear_schedule(0), ValidationError);
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_curve(0.5, 0, 1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  for (double t : {0.1, 0.3, 0.77}) {
    const double c = std::cos(std::numbers::pi * t / 2);
    CHECK(cosine_curve(t, 0, 1, 1) == doctest::Approx(c * c).epsilon(1e-15));
  }
  const Schedule full = cosine_schedule(40, 0, 1, 1);
  const Schedule half = cosine_schedule(40, 0, 0.5, 1);
  const double span = 1.0 - kDefaultEps0 - kDefaultEpsS;
  for (int i = 1; i < 40; ++i) {
    const double t = i / 40.0;
    const double c = std::cos(std::numbers::pi * t / 2);
    CHECK(full.alpha_bar[i] == doctest::Approx(kDefaultEpsS + c * c * span).epsilon(1e-13));
    CHECK(half.alpha_bar[i] > full.alpha_bar[i]);
  }
  CHECK(full.kind == "cosine(0,1,1)");

  CHECK_THROWS_AS(cosine_schedule(10, 0.5, 0.5, 1), ValidationError);
  CHECK_THROWS_AS(cosine_schedule(10, -0.1, 1, 1), ValidationError);
  CHECK_THROWS_AS(cosine_schedule(10, 0, 1.1, 1), ValidationError);
  CHECK_THROWS_AS(cosine_schedule(10, 0, 1, 0), ValidationError);
}

TEST_CASE("sigmoid schedule") {
  CHECK(sigmoid_curve(0.0, -3, 3, 1) == doctest::Approx(0.95257).epsilon(1e-5));
  CHECK(sigmoid_curve(0.0, -3, 3, 1) == doctest::Approx(1.0 / (1.0 + std::exp(-3.0))).epsilon(1e-15));
  const Schedule sym = sigmoid_schedule(10, -4, 4, 0.8);
  const double mid = kDefaultEpsS + 0.5 * (1.0 - kDefaultEps0 - kDefaultEpsS);
  CHECK(sym.alpha_bar[5] == doctest::Approx(mid).epsilon(1e-14));
  CHECK_NOTHROW(sigmoid_schedule(300, 0, 3, 0.7).validate());
  CHECK_THROWS_AS(sigmoid_schedule(10, 3, -3, 1), ValidationError);
  CHECK_THROWS_AS(sigmoid_schedule(10, -3, 3, -1), ValidationError);
}

TEST_CASE("edm schedule") {
  CHECK(edm_sigma(0, 10, 7, 0.002, 80) == doctest::Approx(80.0).epsilon(1e-14));
  CHECK(sigma_to_alpha_bar(edm_sigma(0, 10, 7, 0.002, 80)) == doctest::Approx(1.0 / 6401).epsilon(1e-12));
  CHECK(edm_sigma(10, 10, 7, 0.002, 80) == doctest::Approx(0.002).epsilon(1e-12));
  for (int i = 0; i <= 8; ++i) {
    CHECK(edm_sigma(i, 8, 1, 1, 9) == doctest::Approx(9.0 - i).epsilon(1e-14));
  }
  for (int S : {3, 50, 400}) {
    for (double rho : {1.0, 3.0, 7.0, 12.0}) CHECK_NOTHROW(edm_schedule(S, rho).validate());
  }
  CHECK_THROWS_AS(edm_schedule(10, 0.5), ValidationError);
  CHECK_THROWS_AS(edm_schedule(10, 7, 1.0, 0.5), ValidationError);
}

TEST_CASE("warm_start_interpolate") {
  const Schedule s = cosine_schedule(28, 0, 1, 1);
  const Schedule same = warm_start_interpolate(s, 28);
  CHECK((same.alpha_bar - s.alpha_bar).cwiseAbs().maxCoeff() <= 1e-15);

  const Schedule up = warm_start_interpolate(s, 112);
  CHECK((up.alpha_bar - cosine_schedule(112, 0, 1, 1).alpha_bar).cwiseAbs().maxCoeff() <= 0.01);
  CHECK_NOTHROW(up.validate());

  const Schedule from10 = warm_start_interpolate(sigmoid_schedule(10, -3, 3, 1), 50);
  CHECK_NOTHROW(from10.validate());
  CHECK(from10.steps() == 50);
  CHECK_THROWS_AS(warm_start_interpolate(s, 0), ValidationError);
}

TEST_CASE("fit_parametric") {
  const auto self = fit_parametric(cosine_schedule(40, 0, 1, 1), ParametricFamily::cosine);
  CHECK(std::abs(self.start - 0.0) <= 0.02);
  CHECK(std::abs(self.end - 1.0) <= 0.02);
  CHECK(std::abs(self.tau - 1.0) <= 0.02);
  CHECK(self.residual <= 1e-4);

  const auto mismatch = fit_parametric(sigmoid_schedule(40, -3, 3, 1), ParametricFamily::cosine);
  CHECK(mismatch.residual > self.residual);

  const auto sig = fit_parametric(sigmoid_schedule(40, -3, 3, 1), ParametricFamily::sigmoid);
  CHECK(sig.residual <= 1e-4);
}

TEST_CASE("make_schedule") {
  CHECK(make_schedule("cosine", 12, {0, 1, 1}).alpha_bar == cosine_schedule(12, 0, 1, 1).alpha_bar);
  CHECK(make_schedule("linear", 12, {}).alpha_bar == linear_schedule(12).alpha_bar);
  CHECK(make_schedule("edm", 12, {}).alpha_bar == edm_schedule(12).alpha_bar);
  CHECK_THROWS_AS(make_schedule("cosine", 12, {0, 1, 0}), ValidationError);
  CHECK_THROWS_AS(make_schedule("cosine", 12, {0, 1}), ValidationError);
  CHECK_THROWS_AS(make_schedule("bogus", 12, {}), ValidationError);
}
