#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bounds.hpp"
#include "environment.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "statistics.hpp"
#include "transfer.hpp"

namespace polycascade {

// Replica overlaps I_k = mu_{k-1}^{(x)2}(omega_k = omega~_k) along one environment.
struct OverlapSeries {
  double beta = 0.0;
  int n = 0;
  std::vector<double> i_k;     // k = 1..n
  std::vector<double> cesaro;  // (1/k) sum_{l <= k} I_l
};

template <int D>
OverlapSeries overlap_series(const EnvironmentSlab<D>& slab, double beta, int n) {
  if (n < 1) throw UsageError("overlap series needs n >= 1");
  if (n > slab.horizon()) throw RangeError("overlap horizon exceeds slab horizon");
  OverlapSeries out{beta, n, {}, {}};
  auto w = PolymerWeights<D>::at_origin(beta);
  double running = 0.0;
  for (int k = 1; k <= n; ++k) {
    double overlap = 0.0;
    for (double p : step_distribution(w)) overlap += p * p;
    out.i_k.push_back(overlap);
    running += overlap;
    out.cesaro.push_back(running / k);
    if (k < n) w = forward_step(w, slab);
  }
  return out;
}

struct ConcentrationRow {
  double lambda = 0.0;
  double empirical = 0.0;  // ln Q e^{lambda (ln W_n - Q ln W_n)}
  double std_err = 0.0;
  double bound = 0.0;
  bool pass = true;  // empirical <= bound + 3 std_err
};

struct ConcentrationTable {
  std::string family;
  double beta = 0.0;
  int n = 0;
  std::size_t replicas = 0;
  double mean_log_w = 0.0;
  std::vector<ConcentrationRow> rows;
};

// Exponent of the sub-Gaussian bound on the log-MGF of ln W_n - Q ln W_n: ln W_n
// is convex and beta sqrt(n)-Lipschitz in the environment (scaled by the
// stddev for a non-standard Gaussian).
inline double concentration_bound(const EnvironmentModel& model, double beta, int n, double lambda) {
  if (const auto* g = std::get_if<Gaussian>(&model.family())) {
    return beta * beta * g->stddev * g->stddev * lambda * lambda * n / 2.0;
  }
  if (const auto range = model.support_bounds()) {
    const double width = range->second - range->first;
    return beta * beta * width * width * lambda * lambda * n;
  }
  throw UsageError("concentration bounds cover Gaussian or bounded environments only, not '" + model.name() + "'");
}

template <int D>
ConcentrationTable concentration_check(const EnvironmentModel& model, double beta, int n,
                                       const std::vector<double>& lambdas, const StudyOptions& options = {}) {
  if (n < 1) throw UsageError("concentration check needs n >= 1");
  for (double l : lambdas) {
    if (!(l >= 0.0)) throw UsageError("concentration lambdas must be >= 0");
    concentration_bound(model, beta, n, l);
  }
  const std::uint64_t seed = derive_seed(options.seed, "concentration");
  std::vector<double> log_w(options.replicas);
  parallel_for(options.replicas, options.workers, [&](std::size_t r) {
    const EnvironmentSlab<D> slab(model, replica_seed(seed, r), n);
    log_w[r] = partition_log(evolve(slab, beta, n));
  });
  const double centre = sample_mean(log_w);

  ConcentrationTable out{model.name(), beta, n, options.replicas, centre, {}};
  std::vector<double> tilted(log_w.size());
  for (double lambda : lambdas) {
    for (std::size_t i = 0; i < log_w.size(); ++i) tilted[i] = std::exp(lambda * (log_w[i] - centre));
    const Estimate mgf = mean_estimate(tilted);
    ConcentrationRow row{lambda, std::log(mgf.value), mgf.std_err / mgf.value,
                         concentration_bound(model, beta, n, lambda), true};
    row.pass = row.empirical <= row.bound + kComparisonSigmas * row.std_err;
    out.rows.push_back(row);
  }
  return out;
}

template <int D>
struct InfluenceRow {
  int j = 0;
  Site<D> x{};
  double finite_difference = 0.0;
  double exact = 0.0;  // beta mu_n(omega_j = x)
  double step = 0.0;   // effective central-difference half width
  bool step_adjusted = false;
};

template <int D>
struct InfluenceTable {
  double beta = 0.0;
  int n = 0;
  std::vector<InfluenceRow<D>> rows;
  double gradient_norm = 0.0;  // exact Euclidean norm over every cone site
  double norm_bound = 0.0;     // beta sqrt(n)
  bool in_range = true;        // every exact component lies in [0, beta]
};

// Compares the central difference of ln W_n in a single eta(j, x) against the
// exact derivative beta mu_n(omega_j = x).
template <int D>
InfluenceTable<D> influence_check(const EnvironmentSlab<D>& slab, double beta, int n,
                                  const std::vector<std::pair<int, Site<D>>>& sites, double step = 1e-5) {
  if (n < 1 || n > slab.horizon()) throw RangeError("influence horizon must lie in [1, slab horizon]");
  const auto marginals = polymer_marginals(slab, beta, n);
  InfluenceTable<D> out{beta, n, {}, 0.0, beta * std::sqrt(static_cast<double>(n)), true};

  double squares = 0.0;
  for (int j = 1; j <= n; ++j) {
    for (double mu : marginals[j]) {
      const double g = beta * mu;
      squares += g * g;
      if (g < 0.0 || g > beta * (1.0 + 1e-12)) out.in_range = false;
    }
  }
  out.gradient_norm = std::sqrt(squares);

  for (const auto& [j, x] : sites) {
    if (j < 1 || j > n || !in_cone<D>(j, x)) {
      throw DomainError("influence site " + format_site<D>(x) + " at time " + std::to_string(j) +
                        " is outside the cone of horizon " + std::to_string(n));
    }
    const double eta = slab.eta(j, x);
    double h = step;
    bool adjusted = false;
    // Grow the step until eta +- h are distinct doubles.
    while ((eta + h) - eta <= 0.0 || eta - (eta - h) <= 0.0) {
      h *= 2.0;
      adjusted = true;
    }
    const double up = eta + h;
    const double down = eta - h;
    const double plus = partition_log(evolve(slab.with_value(j, x, up), beta, n));
    const double minus = partition_log(evolve(slab.with_value(j, x, down), beta, n));
    const double exact = beta * marginals[j][*ConeSlice<D>(j).index(x)];
    out.rows.push_back({j, x, (plus - minus) / (up - down), exact, 0.5 * (up - down), adjusted});
  }
  return out;
}

}  // namespace polycascade
