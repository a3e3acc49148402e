#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "polycascade/cascade.hpp"

using namespace polycascade;

namespace {

WeightSamples constant_samples(std::size_t n, std::size_t rows) {
  return WeightSamples::from_values(std::vector<std::vector<double>>(rows, std::vector<double>(n, 1.0 / n)));
}

WeightSamples rem_samples(std::size_t n, double beta, std::size_t rows, std::uint64_t seed) {
  WeightSamples out(n, rows);
  const auto sampler = rem_sampler(beta);
  for (std::size_t r = 0; r < rows; ++r) sampler(derive_seed(seed, "rem", r), out.mutable_row(r));
  return out;
}

// Each vector of a finite law listed once per unit of probability mass.
WeightSamples exact_law(const std::vector<std::vector<double>>& law) { return WeightSamples::from_values(law); }

}  // namespace

TEST(ThetaMoment, ConstantVector) {
  for (std::size_t n : {1u, 2u, 5u, 9u}) {
    const auto samples = constant_samples(n, 4);
    for (double theta : {0.01, 0.3, 0.5, 1.0}) {
      const auto m = theta_moment(samples, theta);
      EXPECT_NEAR(m.value, std::pow(double(n), 1.0 - theta), 1e-12 * std::pow(double(n), 1.0 - theta));
      EXPECT_NEAR(m.std_err, 0.0, 1e-12);
    }
  }
}

TEST(ThetaMoment, PolymerLawAtOneCoversOne) {
  const auto samples = sample_polymer_weights<1>(EnvironmentModel::gaussian(0, 1), 1.0, 8, 20000, 3);
  const auto m = theta_moment(samples, 1.0);
  EXPECT_LT(std::abs(m.value - 1.0), 5 * m.std_err);
}

TEST(ThetaMoment, BernoulliMatchesExhaustiveEnumeration) {
  const double exact = oracles::bernoulli_half_m2_moment(1.0, 0.5);
  const auto samples = sample_polymer_weights<1>(EnvironmentModel::bernoulli(0.5, 0, 1), 1.0, 2, 100000, 11);
  const auto m = theta_moment(samples, 0.5);
  EXPECT_LT(std::abs(m.value - exact), 4 * m.std_err) << m.value << " vs " << exact;
}

TEST(ThetaMoment, Errors) {
  const auto samples = constant_samples(3, 4);
  EXPECT_THROW(theta_moment(samples, 0.0), UsageError);
  EXPECT_THROW(theta_moment(samples, 1.5), UsageError);
  EXPECT_THROW(theta_moment(WeightSamples(3), 0.5), UsageError);
  EXPECT_THROW(theta_moment(constant_samples(3, 1), 0.5), UsageError);
  EXPECT_THROW(WeightSamples::from_values({{0.5, 0.0}}), ParameterError);
}

TEST(ThetaMoment, HeavyTailFlag) {
  // Quantiles of a Pareto law with tail index 1/2 in a fixed shuffled order,
  // against uniform quantiles in the same order.
  const std::size_t n = 20000;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(1));
  std::vector<std::vector<double>> heavy, light;
  for (std::size_t i : order) {
    const double u = (i + 0.5) / n;
    heavy.push_back({1.0 / (u * u)});
    light.push_back({u});
  }
  const auto h = theta_moment(exact_law(heavy), 1.0);
  EXPECT_TRUE(h.heavy_tail) << h.value << " " << h.median_of_means.value;
  EXPECT_FALSE(theta_moment(exact_law(light), 1.0).heavy_tail);
  EXPECT_FALSE(theta_moment(sample_polymer_weights<1>(EnvironmentModel::gaussian(0, 1), 0.5, 4, 4000, 2), 1.0).heavy_tail);
}

TEST(VCurve, ZeroTemperatureIsExact) {
  const auto grid = make_theta_grid(0.01, 25);
  const auto curve = v_curve<1>(EnvironmentModel::gaussian(0, 1), 0.0, 2, grid, 8, 1);
  ASSERT_EQ(curve.theta_grid.size(), grid.size());
  EXPECT_EQ(curve.theta_grid.back(), 1.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    EXPECT_NEAR(curve.v_hat[i], std::log(2 * std::pow(0.25, t) + std::pow(0.5, t)) / t, 1e-12);
  }
  EXPECT_NEAR(curve.v_hat.back(), 0.0, 1e-12);
  EXPECT_TRUE(unimodal_sign_pattern(curve.v_hat));
}

TEST(VCurve, AtOneWithinFiveErrorsOfZero) {
  const std::vector<double> grid{0.5, 1.0};
  for (const auto& model : {EnvironmentModel::gaussian(0, 1), EnvironmentModel::bernoulli(0.3, -1, 2),
                            EnvironmentModel::uniform(0, 1), EnvironmentModel::rademacher()}) {
    const auto curve = v_curve<1>(model, 1.5, 6, grid, 20000, 4);
    EXPECT_LT(std::abs(curve.v_hat.back()), 5 * curve.std_err.back()) << model.name();
  }
}

TEST(VCurve, GaussianSingleStepLognormalMoment) {
  // E W_1(x)^theta for W_1 = (1/2) e^{eta - 1/2}, by quadrature against the
  // standard normal density, times the two sites.
  const double theta = 0.5;
  auto integrand = [&](double g) {
    return std::pow(0.5 * std::exp(g - 0.5), theta) * std::exp(-0.5 * g * g) / std::sqrt(2 * std::numbers::pi);
  };
  const double quad = 2 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -40.0, 40.0, 15, 1e-14);
  const double analytic = std::pow(2.0, 1 - theta) * std::exp((theta * theta - theta) / 2);
  EXPECT_NEAR(quad, analytic, 1e-12);
  EXPECT_NEAR(analytic, 1.2480391, 1e-7);

  const auto samples = sample_polymer_weights<1>(EnvironmentModel::gaussian(0, 1), 1.0, 1, 100000, 21);
  const auto m = theta_moment(samples, theta);
  EXPECT_LT(std::abs(m.value - analytic), 4 * m.std_err);
}

TEST(MinimizeV, RemClosedForm) {
  const double n = 4, beta = 3;
  const auto result = minimize_v([&](double t) { return oracles::rem_v(n, beta, t); }, std::nullopt);
  EXPECT_FALSE(result.boundary_minimum);
  EXPECT_NEAR(result.theta_star, oracles::rem_theta_star(n, beta), 1e-3);
  EXPECT_NEAR(result.theta_star, 0.5550, 1e-3);
  EXPECT_NEAR(result.p_tree, oracles::rem_v_min(n, beta), 1e-6);
  EXPECT_NEAR(result.p_tree, -0.8910, 1e-4);
}

TEST(MinimizeV, RemMonteCarlo) {
  const auto samples = rem_samples(4, 3.0, 200000, 7);
  const auto result = minimize_v(samples);
  EXPECT_FALSE(result.boundary_minimum);
  EXPECT_NEAR(result.theta_star, oracles::rem_theta_star(4, 3), 0.03);
  EXPECT_NEAR(result.p_tree, oracles::rem_v_min(4, 3), 0.03);
}

TEST(MinimizeV, NonPositiveSlopeGivesBoundary) {
  const auto samples = constant_samples(3, 4);
  const auto result = minimize_v(samples);
  EXPECT_TRUE(result.boundary_minimum);
  EXPECT_EQ(result.theta_star, 1.0);
  EXPECT_NEAR(result.p_tree, 0.0, 1e-12);

  for (int m : {1, 2, 5, 10}) {
    const auto polymer = sample_polymer_weights<1>(EnvironmentModel::gaussian(0, 1), 0.0, m, 4, 1);
    const auto r = minimize_v(polymer);
    EXPECT_EQ(r.theta_star, 1.0);
    EXPECT_NEAR(r.p_tree, 0.0, 1e-12);
  }
}

TEST(MinimizeV, NonFiniteIsNumericError) {
  EXPECT_THROW(minimize_v([](double t) { return t < 0.5 ? std::nan("") : -t; }, 1.0), NumericError);
  EXPECT_THROW(minimize_v([](double) { return 0.0; }, 1.0, {0.0, 1e-3}), UsageError);
}

TEST(MinimizeV, StableUnderToleranceAndGridRefinement) {
  const auto law = oracles::bernoulli_half_m2_law(8.0);
  std::vector<std::vector<double>> rows;
  for (const auto& w : law) rows.push_back({w[0], w[1], w[2]});
  const auto samples = exact_law(rows);
  const auto coarse = minimize_v(samples, {0.01, 1e-3});
  const auto fine = minimize_v(samples, {0.01, 5e-4});
  EXPECT_FALSE(coarse.boundary_minimum);
  EXPECT_LT(std::abs(coarse.theta_star - fine.theta_star), 1e-3);

  // Grid argmin at resolution G and 2G.
  auto grid_argmin = [&](std::size_t size) {
    const auto curve = v_curve(samples, make_theta_grid(0.01, size));
    return curve.theta_grid[std::min_element(curve.v_hat.begin(), curve.v_hat.end()) - curve.v_hat.begin()];
  };
  const double step = 0.99 / 1000;
  EXPECT_LE(std::abs(grid_argmin(1001) - grid_argmin(2001)), step);
  EXPECT_LE(std::abs(grid_argmin(2001) - coarse.theta_star), step + 1e-3);
}

TEST(DerivativeCriterion, ExactCases) {
  for (std::size_t n : {1u, 2u, 7u}) EXPECT_NEAR(derivative_criterion(constant_samples(n, 3)).value, -std::log(double(n)), 1e-12);
  const auto polymer = sample_polymer_weights<1>(EnvironmentModel::gaussian(0, 1), 0.0, 2, 3, 1);
  EXPECT_NEAR(derivative_criterion(polymer).value, -1.5 * std::log(2.0), 1e-12);
}

TEST(DerivativeCriterion, FiniteDifferenceOnSameReplicas) {
  const auto samples = sample_polymer_weights<1>(EnvironmentModel::gaussian(0, 1), 1.5, 4, 50000, 31);
  const double h = 1e-3;
  const auto curve = v_curve(samples, std::vector<double>{1.0 - h, 1.0});
  const double fd = (curve.v_hat[1] - curve.v_hat[0]) / h;
  const auto d = derivative_criterion(samples);
  // v''(1) = g'(1) - 2 g(1) sets the O(h) term.
  const double curvature = std::abs(g_prime(samples, 1.0).value - 2 * g_function(samples, 1.0).value);
  EXPECT_LT(std::abs(fd - d.value), 5 * d.std_err + curvature * h) << fd << " " << d.value;
}

TEST(GFunction, ConstantVector) {
  const auto samples = constant_samples(5, 40);
  for (double theta : {0.1, 0.5, 1.0}) {
    EXPECT_NEAR(g_function(samples, theta).value, -std::log(5.0), 1e-12);
    EXPECT_NEAR(g_prime(samples, theta).value, 0.0, 1e-12);
  }
}

TEST(GFunction, AtOneEqualsDerivativeCriterionOnNormalizedLaws) {
  // Finite laws with exact mean sum A = 1 under the uniform empirical measure.
  std::vector<std::vector<std::vector<double>>> laws{
      {{0.5, 0.5}, {0.1, 0.9}, {0.8, 0.2}, {0.6, 0.4}},
      {{0.2, 0.3, 0.1}, {0.5, 0.6, 0.3}, {0.4, 0.2, 0.4}},
  };
  std::vector<std::vector<double>> bernoulli;
  for (const auto& w : oracles::bernoulli_half_m2_law(2.0)) bernoulli.push_back({w[0], w[1], w[2]});
  laws.push_back(bernoulli);
  for (const auto& law : laws) {
    const auto samples = exact_law(law);
    EXPECT_NEAR(theta_moment(samples, 1.0).value, 1.0, 1e-14);
    EXPECT_NEAR(g_function(samples, 1.0).value, derivative_criterion(samples).value, 1e-12);
  }
}

TEST(GFunction, RemChangesSignAtThetaStar) {
  const auto samples = rem_samples(4, 3.0, 200000, 9);
  const double star = oracles::rem_theta_star(4, 3);
  const auto below = g_function(samples, star - 0.1);
  const auto above = g_function(samples, star + 0.1);
  EXPECT_LT(below.value + 3 * below.std_err, 0.0);
  EXPECT_GT(above.value - 3 * above.std_err, 0.0);
}

TEST(GFunction, MonotoneOnCommonRandomNumbers) {
  const auto samples = sample_polymer_weights<1>(EnvironmentModel::gaussian(0, 1), 2.0, 4, 20000, 5);
  const auto grid = make_theta_grid(0.05, 20);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const auto a = g_function(samples, grid[i - 1]);
    const auto b = g_function(samples, grid[i]);
    EXPECT_GE(b.value, a.value - 5 * combined_error(a.std_err, b.std_err));
    const auto gp = g_prime(samples, grid[i]);
    EXPECT_GE(gp.value, -5 * gp.std_err);
  }
}

TEST(Properties, SubadditivePower) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> log_u(-20.0, 20.0);
  std::uniform_real_distribution<double> theta_dist(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double u = std::exp(log_u(rng));
    const double v = std::exp(log_u(rng));
    double theta = theta_dist(rng);
    if (theta == 0.0) theta = 0.5;
    const double lhs = std::pow(u + v, theta);
    const double rhs = std::pow(u, theta) + std::pow(v, theta);
    EXPECT_LE(lhs, rhs * (1 + 1e-15)) << u << " " << v << " " << theta;
  }
}

TEST(Properties, UnimodalOnExactCurves) {
  const auto grid = make_theta_grid(0.01, 100);
  for (int m = 1; m <= 16; ++m) {
    const auto curve = v_curve<1>(EnvironmentModel::gaussian(0, 1), 0.0, m, grid, 2, 1);
    EXPECT_TRUE(unimodal_sign_pattern(curve.v_hat)) << m;
    EXPECT_NEAR(curve.v_hat.back(), 0.0, 1e-12);
  }
  for (double beta : {1.0, 4.0, 8.0}) {
    std::vector<std::vector<double>> rows;
    for (const auto& w : oracles::bernoulli_half_m2_law(beta)) rows.push_back({w[0], w[1], w[2]});
    const auto curve = v_curve(exact_law(rows), grid);
    EXPECT_TRUE(unimodal_sign_pattern(curve.v_hat)) << beta;
    EXPECT_NEAR(curve.v_hat.back(), 0.0, 1e-12);
  }
  EXPECT_TRUE(unimodal_sign_pattern(std::vector<double>{3, 2, 1, 1, 2}));
  EXPECT_FALSE(unimodal_sign_pattern(std::vector<double>{1, 2, 1}));
}

TEST(Properties, BernoulliCertificateAgreesWithExactLaw) {
  // The exact law certifies v < 0 at beta = 8 but not at beta = 1.
  EXPECT_LT(oracles::bernoulli_half_m2_moment(8.0, 0.5), 1.0);
  EXPECT_GT(oracles::bernoulli_half_m2_moment(1.0, 0.5), 1.0);
  EXPECT_NEAR(oracles::bernoulli_half_m2_moment(8.0, 1.0), 1.0, 1e-14);
}

TEST(Cascade, DeterministicUniformWeights) {
  for (std::size_t n : {1u, 2u, 3u, 7u}) {
    const auto p = cascade_free_energy_path(uniform_sampler(), n, {1, 2, 4, 6}, 1);
    for (double v : p) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(Cascade, DepthOneIsSingleVectorSum) {
  const auto sampler = rem_sampler(1.3);
  const std::uint64_t seed = 77;
  std::vector<double> logs(5);
  sampler(derive_seed(seed, std::uint64_t{0}, 0), logs);
  double total = 0.0;
  for (double l : logs) total += std::exp(l);
  EXPECT_NEAR(std::exp(simulate_cascade_martingale(sampler, 5, 1, seed)), total, 1e-13 * total);
}

TEST(Cascade, MartingaleMeanIsOne) {
  const auto sampler = rem_sampler(1.0);
  std::vector<double> w(4000);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(simulate_cascade_martingale(sampler, 3, 4, i));
  const auto e = mean_estimate(w);
  EXPECT_LT(std::abs(e.value - 1.0), 5 * e.std_err);
}

TEST(Cascade, PolymerSamplerDepthOneMatchesEvolve) {
  const auto model = EnvironmentModel::gaussian(0, 1);
  const auto sampler = polymer_sampler<1>(model, 1.0, 3);
  const std::uint64_t seed = 5;
  const EnvironmentSlab<1> slab(model, derive_seed(seed, std::uint64_t{0}, 0), 3);
  EXPECT_NEAR(simulate_cascade_martingale(sampler, 4, 1, seed), partition_log(evolve(slab, 1.0, 3)), 1e-13);
}

TEST(Cascade, BudgetRefusal) {
  EXPECT_THROW(simulate_cascade_martingale(uniform_sampler(), 4, 14, 1), BudgetError);
  EXPECT_THROW(simulate_cascade_martingale(uniform_sampler(), 10, 9, 1), BudgetError);
  EXPECT_THROW(cascade_free_energy_path(uniform_sampler(), 2, {0}, 1), UsageError);
}

TEST(PolymerSamples, BudgetsCheckedBeforeAllocation) {
  EXPECT_THROW(sample_polymer_weights<3>(EnvironmentModel::gaussian(0, 1), 1.0, 400, 40, 1), BudgetError);
  EXPECT_THROW(sample_polymer_weights<1>(EnvironmentModel::gaussian(0, 1), 1.0, 1000, 1'000'000, 1), BudgetError);
}
