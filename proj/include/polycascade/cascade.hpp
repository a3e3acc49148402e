#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "environment.hpp"
#include "errors.hpp"
#include "log_sum_exp.hpp"
#include "parallel.hpp"
#include "philox.hpp"
#include "statistics.hpp"
#include "transfer.hpp"

namespace polycascade {

// Independent draws of a random weight vector (A_1, ..., A_N), stored as
// ln A_i in a flat row-major buffer.
class WeightSamples {
 public:
  WeightSamples() = default;
  explicit WeightSamples(std::size_t width, std::size_t rows = 0) : width_(width), log_values_(width * rows) {
    if (width == 0) throw UsageError("weight vectors need at least one component");
  }

  // From strictly positive values (not logarithms).
  static WeightSamples from_values(const std::vector<std::vector<double>>& vectors) {
    if (vectors.empty()) throw UsageError("no weight vectors given");
    WeightSamples out(vectors.front().size());
    std::vector<double> logs;
    for (const auto& v : vectors) {
      logs.clear();
      for (double a : v) {
        if (!(a > 0.0) || !std::isfinite(a)) throw ParameterError("weights must be finite and strictly positive");
        logs.push_back(std::log(a));
      }
      out.add(logs);
    }
    return out;
  }

  void add(std::span<const double> log_values) {
    if (log_values.size() != width_) {
      throw UsageError("weight vector of width " + std::to_string(log_values.size()) + ", expected " +
                       std::to_string(width_));
    }
    log_values_.insert(log_values_.end(), log_values.begin(), log_values.end());
  }

  std::size_t size() const noexcept { return width_ ? log_values_.size() / width_ : 0; }
  std::size_t width() const noexcept { return width_; }
  bool empty() const noexcept { return size() == 0; }

  std::span<const double> row(std::size_t i) const noexcept { return {log_values_.data() + i * width_, width_}; }
  std::span<double> mutable_row(std::size_t i) noexcept { return {log_values_.data() + i * width_, width_}; }

 private:
  std::size_t width_ = 0;
  std::vector<double> log_values_;
};

// Per-replica sums S_i = sum_k A_{i,k}^theta.
inline std::vector<double> power_sums(const WeightSamples& samples, double theta) {
  std::vector<double> sums(samples.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    double s = 0.0;
    for (double la : samples.row(i)) s += std::exp(theta * la);
    sums[i] = s;
  }
  return sums;
}

struct MomentEstimate {
  double value = 0.0;
  double std_err = 0.0;
  Estimate median_of_means;
  bool heavy_tail = false;  // mean and median-of-means disagree by more than 3 combined robust errors
};

inline MomentEstimate moment_from_sums(std::span<const double> sums) {
  const Estimate mean = mean_estimate(sums);
  MomentEstimate out{mean.value, mean.std_err, {mean.value, mean.std_err}, false};
  if (sums.size() >= 32) {
    out.median_of_means = median_of_means(sums, 16);
    // The plain standard error is inflated by the very outliers this guard
    // looks for, so both errors use the robust block spread.
    const double robust = out.median_of_means.std_err / std::sqrt(std::numbers::pi / 2.0);
    out.heavy_tail = std::abs(out.value - out.median_of_means.value) >
                     3.0 * combined_error(robust, out.median_of_means.std_err);
  }
  return out;
}

inline void check_theta(double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw UsageError("theta must lie in (0, 1], got " + std::to_string(theta));
}

// Monte Carlo estimate of E sum_i A_i^theta.
inline MomentEstimate theta_moment(const WeightSamples& samples, double theta) {
  check_theta(theta);
  if (samples.size() < 2) throw UsageError("theta_moment needs at least 2 weight vectors");
  const auto sums = power_sums(samples, theta);
  return moment_from_sums(sums);
}

// (1/theta) ln mean(S) with its delta-method error.
inline Estimate log_moment_over_theta(const MomentEstimate& moment, double theta) {
  if (!(moment.value > 0.0)) {
    throw NumericError("non-positive moment estimate at theta=" + std::to_string(theta));
  }
  return {std::log(moment.value) / theta, moment.std_err / (theta * moment.value)};
}

struct ThetaCurve {
  std::vector<double> theta_grid;
  std::vector<double> v_hat;
  std::vector<double> std_err;
  std::size_t replicas = 0;
  int m = 0;
  double beta = 0.0;
};

// theta_min, ..., 1 in `size` evenly spaced points.
inline std::vector<double> make_theta_grid(double theta_min, std::size_t size) {
  if (!(theta_min > 0.0 && theta_min < 1.0) || size < 2) throw UsageError("theta grid needs 0 < theta_min < 1 and size >= 2");
  std::vector<double> grid(size);
  for (std::size_t i = 0; i < size; ++i) {
    grid[i] = theta_min + (1.0 - theta_min) * static_cast<double>(i) / static_cast<double>(size - 1);
  }
  grid.back() = 1.0;
  return grid;
}

// v(theta) = (1/theta) ln E sum_i A_i^theta on a grid; every grid point uses the
// same samples.
inline ThetaCurve v_curve(const WeightSamples& samples, std::span<const double> theta_grid, int m = 0, double beta = 0.0) {
  if (theta_grid.empty()) throw UsageError("empty theta grid");
  for (std::size_t i = 0; i < theta_grid.size(); ++i) {
    check_theta(theta_grid[i]);
    if (i && !(theta_grid[i] > theta_grid[i - 1])) throw UsageError("theta grid must be strictly increasing");
  }
  ThetaCurve curve{{theta_grid.begin(), theta_grid.end()}, {}, {}, samples.size(), m, beta};
  for (double theta : theta_grid) {
    const Estimate v = log_moment_over_theta(theta_moment(samples, theta), theta);
    curve.v_hat.push_back(v.value);
    curve.std_err.push_back(v.std_err);
  }
  return curve;
}

// True when successive differences change sign at most once, from falling to
// rising.
inline bool unimodal_sign_pattern(std::span<const double> values) {
  bool rising = false;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double diff = values[i] - values[i - 1];
    if (diff > 0.0) rising = true;
    if (diff < 0.0 && rising) return false;
  }
  return true;
}

// E sum_i A_i ln A_i, which equals v'(1) under the normalization E sum_i A_i = 1.
inline Estimate derivative_criterion(const WeightSamples& samples) {
  if (samples.empty()) throw UsageError("derivative_criterion needs samples");
  std::vector<double> terms(samples.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    double s = 0.0;
    for (double la : samples.row(i)) s += std::exp(la) * la;
    terms[i] = s;
  }
  if (terms.size() < 2) return {terms.front(), 0.0};
  return mean_estimate(terms);
}

namespace detail {

// Columns sum A^theta, sum A^theta ln A, sum A^theta ln^2 A per replica.
inline std::vector<std::vector<double>> tilted_columns(const WeightSamples& samples, double theta) {
  std::vector<std::vector<double>> cols(3, std::vector<double>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (double la : samples.row(i)) {
      const double a = std::exp(theta * la);
      s0 += a;
      s1 += a * la;
      s2 += a * la * la;
    }
    cols[0][i] = s0;
    cols[1][i] = s1;
    cols[2][i] = s2;
  }
  return cols;
}

inline std::size_t jackknife_blocks(std::size_t n) { return std::min<std::size_t>(32, n); }

}  // namespace detail

// g(theta) = theta E[sum A^theta ln A] / E[sum A^theta] - ln E[sum A^theta], so
// that v'(theta) = g(theta) / theta^2. Error by block jackknife.
inline Estimate g_function(const WeightSamples& samples, double theta) {
  check_theta(theta);
  if (samples.size() < 2) throw UsageError("g_function needs at least 2 weight vectors");
  const auto cols = detail::tilted_columns(samples, theta);
  return block_jackknife(
      cols, [theta](std::span<const double> m) { return theta * m[1] / m[0] - std::log(m[0]); },
      detail::jackknife_blocks(samples.size()));
}

// g'(theta) = theta E[sum A^theta (ln A - c)^2] / E[sum A^theta] with
// c = E[sum A^theta ln A] / E[sum A^theta]; non-negative for any law.
inline Estimate g_prime(const WeightSamples& samples, double theta) {
  check_theta(theta);
  if (samples.size() < 2) throw UsageError("g_prime needs at least 2 weight vectors");
  const auto cols = detail::tilted_columns(samples, theta);
  return block_jackknife(
      cols,
      [theta](std::span<const double> m) {
        const double c = m[1] / m[0];
        return theta * (m[2] / m[0] - c * c);
      },
      detail::jackknife_blocks(samples.size()));
}

struct MinimizeOptions {
  double theta_min = 0.01;
  double tolerance = 1e-3;
};

struct CascadeBoundResult {
  double theta_star = 1.0;
  double p_tree = 0.0;
  double ci_halfwidth = 0.0;  // one standard error
  bool boundary_minimum = true;
};

// Minimizes a unimodal v on [theta_min, 1] by golden-section search. When the
// slope at 1 is non-positive, v is decreasing and the minimum sits at theta = 1.
// Without a slope, a backward difference of width `tolerance` stands in.
inline CascadeBoundResult minimize_v(const std::function<double(double)>& v, std::optional<double> slope_at_one,
                                     const MinimizeOptions& options = {}) {
  if (!(options.theta_min > 0.0 && options.theta_min < 1.0) || !(options.tolerance > 0.0)) {
    throw UsageError("minimize_v needs 0 < theta_min < 1 and a positive tolerance");
  }
  auto eval = [&v](double theta) {
    const double value = v(theta);
    if (!std::isfinite(value)) throw NumericError("v(theta) is not finite at theta=" + std::to_string(theta));
    return value;
  };

  const double v_one = eval(1.0);
  const double slope = slope_at_one ? *slope_at_one : (v_one - eval(1.0 - options.tolerance)) / options.tolerance;
  if (slope <= 0.0) return {1.0, v_one, 0.0, true};

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = options.theta_min;
  double hi = 1.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = eval(c);
  double fd = eval(d);
  while (hi - lo > options.tolerance) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = eval(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = eval(d);
    }
  }
  const double theta = 0.5 * (lo + hi);
  const double value = eval(theta);
  if (v_one <= value) return {1.0, v_one, 0.0, true};
  return {theta, value, 0.0, false};
}

// Minimizes the empirical v of a sample set; the boundary decision uses the
// exact slope of the empirical curve at 1.
inline CascadeBoundResult minimize_v(const WeightSamples& samples, const MinimizeOptions& options = {}) {
  auto v = [&samples](double theta) { return log_moment_over_theta(theta_moment(samples, theta), theta).value; };
  auto result = minimize_v(v, g_function(samples, 1.0).value, options);
  result.ci_halfwidth = log_moment_over_theta(theta_moment(samples, result.theta_star), result.theta_star).std_err;
  return result;
}

// scale_a v_a(theta_a) - scale_b v_b(theta_b) from per-replica power sums of two
// paired sample sets, with a linearized paired standard error.
inline Estimate paired_v_difference(std::span<const double> sums_a, double theta_a, double scale_a,
                                    std::span<const double> sums_b, double theta_b, double scale_b) {
  if (sums_a.size() != sums_b.size() || sums_a.size() < 2) throw UsageError("paired comparison needs equal-length samples");
  const double mean_a = sample_mean(sums_a);
  const double mean_b = sample_mean(sums_b);
  if (!(mean_a > 0.0 && mean_b > 0.0)) throw NumericError("non-positive moment in paired comparison");
  std::vector<double> lin(sums_a.size());
  const double ka = scale_a / (theta_a * mean_a);
  const double kb = scale_b / (theta_b * mean_b);
  for (std::size_t i = 0; i < lin.size(); ++i) lin[i] = ka * sums_a[i] - kb * sums_b[i];
  const Estimate spread = mean_estimate(lin);
  return {scale_a * std::log(mean_a) / theta_a - scale_b * std::log(mean_b) / theta_b, spread.std_err};
}

// --- Polymer-induced weight laws ---------------------------------------------

inline constexpr double kSampleBudget = 2e8;

inline std::uint64_t replica_seed(std::uint64_t job_seed, std::size_t replica) {
  return derive_seed(job_seed, "replica", replica);
}

// Draws `replicas` independent environments and records (ln W_m(x))_{x in L_m}
// for every m in `ms` from a single forward sweep per environment. Environment
// draws do not depend on beta, so different beta values share random numbers.
template <int D>
std::vector<WeightSamples> sample_polymer_weights(const EnvironmentModel& model, double beta, const std::vector<int>& ms,
                                                  std::size_t replicas, std::uint64_t seed, unsigned workers = 1) {
  if (ms.empty()) throw UsageError("no horizons requested");
  int horizon = 0;
  for (int m : ms) {
    if (m < 1) throw UsageError("horizons must be >= 1");
    horizon = std::max(horizon, m);
  }
  EnvironmentSlab<D>::check_budget(horizon);
  double stored = 0.0;
  for (int m : ms) stored += static_cast<double>(slice_size<D>(m)) * static_cast<double>(replicas);
  if (stored > kSampleBudget) {
    throw BudgetError("storing " + std::to_string(static_cast<long double>(stored)) +
                      " log-weights exceeds the sample budget of 2e8");
  }
  std::vector<WeightSamples> out;
  for (int m : ms) out.emplace_back(slice_size<D>(m), replicas);
  parallel_for(replicas, workers, [&](std::size_t r) {
    const EnvironmentSlab<D> slab(model, replica_seed(seed, r), horizon);
    evolve(slab, beta, horizon, [&](const PolymerWeights<D>& w) {
      for (std::size_t k = 0; k < ms.size(); ++k) {
        if (ms[k] == w.time) std::copy(w.log_w.begin(), w.log_w.end(), out[k].mutable_row(r).begin());
      }
    });
  });
  return out;
}

template <int D>
WeightSamples sample_polymer_weights(const EnvironmentModel& model, double beta, int m, std::size_t replicas,
                                     std::uint64_t seed, unsigned workers = 1) {
  return std::move(sample_polymer_weights<D>(model, beta, std::vector<int>{m}, replicas, seed, workers).front());
}

// v_m on a grid for the law of (W_m(x))_{x in L_m}.
template <int D>
ThetaCurve v_curve(const EnvironmentModel& model, double beta, int m, std::span<const double> theta_grid,
                   std::size_t replicas, std::uint64_t seed, unsigned workers = 1) {
  const auto samples = sample_polymer_weights<D>(model, beta, m, replicas, seed, workers);
  return v_curve(samples, theta_grid, m, beta);
}

// --- Direct cascade simulation --------------------------------------------------

// Fills log_out with ln A_1..ln A_N for the tree node keyed by node_seed.
using WeightVectorSampler = std::function<void(std::uint64_t node_seed, std::span<double> log_out)>;

// A_i = (1/N) e^{beta g_i - beta^2 / 2} with g_i i.i.d. standard normal.
inline WeightVectorSampler rem_sampler(double beta) {
  const EnvironmentModel normal = EnvironmentModel::gaussian(0.0, 1.0);
  return [normal, beta](std::uint64_t node_seed, std::span<double> log_out) {
    const double shift = -std::log(static_cast<double>(log_out.size())) - 0.5 * beta * beta;
    for (std::size_t i = 0; i < log_out.size(); ++i) {
      log_out[i] = beta * sample_eta_unchecked<1>(normal, node_seed, static_cast<int>(i) + 1, Site<1>{0}) + shift;
    }
  };
}

// The deterministic vector (1/N, ..., 1/N).
inline WeightVectorSampler uniform_sampler() {
  return [](std::uint64_t, std::span<double> log_out) {
    const double value = -std::log(static_cast<double>(log_out.size()));
    for (double& x : log_out) x = value;
  };
}

// The law of (W_m(x))_{x in L_m}: each tree node carries its own environment.
template <int D>
WeightVectorSampler polymer_sampler(EnvironmentModel model, double beta, int m) {
  return [model = std::move(model), beta, m](std::uint64_t node_seed, std::span<double> log_out) {
    const EnvironmentSlab<D> slab(model, node_seed, m);
    const auto w = evolve(slab, beta, m);
    if (w.log_w.size() != log_out.size()) throw UsageError("polymer sampler width must be |L_m|");
    std::copy(w.log_w.begin(), w.log_w.end(), log_out.begin());
  };
}

inline constexpr double kLeafBudget = 1e8;

// ln W_n^casc for every depth n in `depths`, summing the N^n products of
// weights along root-to-node paths of one realized tree. Depth-first, so
// memory is O(max depth * N).
inline std::vector<double> cascade_log_martingale_path(const WeightVectorSampler& sampler, std::size_t branching,
                                                       const std::vector<int>& depths, std::uint64_t seed) {
  if (branching < 1) throw UsageError("cascade branching must be >= 1");
  if (depths.empty()) throw UsageError("no cascade depths requested");
  int max_depth = 0;
  for (int n : depths) {
    if (n < 1) throw UsageError("cascade depths must be >= 1");
    max_depth = std::max(max_depth, n);
  }
  const double leaves = std::pow(static_cast<double>(branching), max_depth);
  if (leaves > kLeafBudget) {
    throw BudgetError("cascade of branching " + std::to_string(branching) + " and depth " + std::to_string(max_depth) +
                      " has " + std::to_string(static_cast<long double>(leaves)) + " leaves, above the budget of 1e8");
  }

  std::vector<LogSumAccumulator> level_sums(static_cast<std::size_t>(max_depth) + 1);
  std::vector<std::vector<double>> scratch(static_cast<std::size_t>(max_depth), std::vector<double>(branching));

  auto visit = [&](auto&& self, int level, std::uint64_t index, double log_prefix) -> void {
    auto& weights = scratch[level];
    sampler(derive_seed(seed, static_cast<std::uint64_t>(level), index), weights);
    for (std::size_t i = 0; i < branching; ++i) {
      const double lp = log_prefix + weights[i];
      level_sums[level + 1].add(lp);
      if (level + 1 < max_depth) self(self, level + 1, index * branching + i, lp);
    }
  };
  visit(visit, 0, 0, 0.0);

  std::vector<double> out;
  for (int n : depths) out.push_back(level_sums[n].value());
  return out;
}

// ln W_n^casc of one realized tree.
inline double simulate_cascade_martingale(const WeightVectorSampler& sampler, std::size_t branching, int depth,
                                          std::uint64_t seed) {
  return cascade_log_martingale_path(sampler, branching, {depth}, seed).front();
}

// p_n = (1/n) ln W_n^casc along one realized tree.
inline std::vector<double> cascade_free_energy_path(const WeightVectorSampler& sampler, std::size_t branching,
                                                    const std::vector<int>& depths, std::uint64_t seed) {
  auto logs = cascade_log_martingale_path(sampler, branching, depths, seed);
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i] /= depths[i];
  return logs;
}

}  // namespace polycascade
