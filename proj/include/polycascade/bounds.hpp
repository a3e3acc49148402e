#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascade.hpp"
#include "environment.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "statistics.hpp"
#include "transfer.hpp"

namespace polycascade {

// Standard-error multipliers for sign decisions.
inline constexpr double kCertificateSigmas = 4.0;
inline constexpr double kComparisonSigmas = 3.0;

struct StudyOptions {
  std::size_t replicas = 100'000;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double theta_min = 0.01;
  double tolerance = 1e-3;
  std::size_t final_factor = 4;  // replicas for the terminal estimate at theta*, as a multiple
  std::size_t curve_points = 0;  // > 0 attaches a v_m curve per row
};

struct TreeRow {
  int m = 0;
  double theta_star = 1.0;
  bool boundary_minimum = true;
  double p_tree = 0.0;  // estimate of p_m^tree
  double p_tree_std_err = 0.0;
  double per_step = 0.0;  // p_m^tree / m
  double per_step_std_err = 0.0;
  double moment = 1.0;  // Q sum_x W_m(x)^theta*, terminal replicas
  double moment_std_err = 0.0;
  bool heavy_tail = false;
  Estimate slope_at_one;  // E sum_x W_m(x) ln W_m(x), search replicas
  double running_inf = 0.0;  // min of per_step over rows processed so far
};

// `difference` of per-step (or per-site) quantities between two rows of one
// study, with a paired standard error.
struct PairedComparison {
  int from = 0;
  int to = 0;
  double difference = 0.0;
  double std_err = 0.0;
  bool holds = true;
};

struct TreeBound {
  double beta = 0.0;
  std::vector<TreeRow> rows;
  double running_inf = 0.0;
  double running_inf_std_err = 0.0;
  int running_inf_m = 0;
  std::vector<PairedComparison> doubling;  // per_step(2m) - per_step(m) <= 3 sigma
  std::vector<ThetaCurve> curves;
  std::map<std::string, std::uint64_t> seeds;
};

struct LowerRow {
  int n = 0;
  double mean_per_step = 0.0;  // Q ln W_n / n
  double std_err = 0.0;
};

struct LowerBound {
  double beta = 0.0;
  std::vector<LowerRow> rows;
  double lower_sup = 0.0;
  double lower_sup_std_err = 0.0;
  int lower_sup_n = 0;
  std::vector<PairedComparison> monotone;  // row(n2) - row(n1) >= -3 sigma for n1 < n2
  std::map<std::string, std::uint64_t> seeds;
};

struct Certificate {
  int m = 0;
  double theta = 0.0;
  double moment = 0.0;  // Q sum_x W_m(x)^theta
  double std_err = 0.0;
  std::size_t replicas = 0;
  bool escalated = false;
  bool certified = false;  // moment + 4 std_err < 1
};

struct Sandwich {
  double gap = 0.0;    // running_inf - lower_sup
  double slack = 0.0;  // 3 combined standard errors
  bool holds = true;   // lower_sup <= running_inf + slack
};

struct BoundReport {
  double beta = 0.0;
  TreeBound tree;
  LowerBound lower;
  std::optional<Certificate> certificate;
  Sandwich sandwich;
};

namespace detail {

inline void check_horizons(const std::vector<int>& list, const char* what) {
  if (list.empty()) throw UsageError(std::string(what) + " must not be empty");
  for (int v : list) {
    if (v < 1) throw UsageError(std::string(what) + " entries must be >= 1");
  }
}

// Per-replica sum_x W_m(x)^theta_k for each (m_k, theta_k), one sweep per environment.
template <int D>
std::vector<std::vector<double>> power_sums_by_horizon(const EnvironmentModel& model, double beta,
                                                       const std::vector<int>& ms, const std::vector<double>& thetas,
                                                       std::size_t replicas, std::uint64_t seed, unsigned workers) {
  const int horizon = *std::max_element(ms.begin(), ms.end());
  std::vector<std::vector<double>> sums(ms.size(), std::vector<double>(replicas));
  parallel_for(replicas, workers, [&](std::size_t r) {
    const EnvironmentSlab<D> slab(model, replica_seed(seed, r), horizon);
    evolve(slab, beta, horizon, [&](const PolymerWeights<D>& w) {
      for (std::size_t k = 0; k < ms.size(); ++k) {
        if (ms[k] != w.time) continue;
        double s = 0.0;
        for (double lw : w.log_w) s += std::exp(thetas[k] * lw);
        sums[k][r] = s;
      }
    });
  });
  return sums;
}

struct TreeRowsWithSums {
  TreeBound bound;
  std::vector<std::vector<double>> final_sums;
};

template <int D>
TreeRowsWithSums tree_rows(const EnvironmentModel& model, double beta, const std::vector<int>& m_list,
                           const StudyOptions& options) {
  check_horizons(m_list, "m_list");
  if (options.replicas < 32) throw UsageError("tree bounds need at least 32 replicas");
  TreeRowsWithSums out;
  TreeBound& bound = out.bound;
  bound.beta = beta;
  bound.seeds["tree_search"] = derive_seed(options.seed, "tree-search");
  bound.seeds["tree_final"] = derive_seed(options.seed, "tree-final");

  const MinimizeOptions minimize{options.theta_min, options.tolerance};
  std::vector<double> theta_star(m_list.size());
  {
    const auto samples = sample_polymer_weights<D>(model, beta, m_list, options.replicas, bound.seeds["tree_search"],
                                                   options.workers);
    const auto grid = options.curve_points ? make_theta_grid(options.theta_min, options.curve_points)
                                           : std::vector<double>{};
    for (std::size_t k = 0; k < m_list.size(); ++k) {
      CascadeBoundResult best;
      try {
        best = minimize_v(samples[k], minimize);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (m=" + std::to_string(m_list[k]) + ", beta=" + std::to_string(beta) + ")");
      }
      TreeRow row;
      row.m = m_list[k];
      row.theta_star = best.theta_star;
      row.boundary_minimum = best.boundary_minimum;
      row.slope_at_one = derivative_criterion(samples[k]);
      bound.rows.push_back(row);
      theta_star[k] = best.theta_star;
      if (!grid.empty()) bound.curves.push_back(v_curve(samples[k], grid, m_list[k], beta));
    }
  }

  const std::size_t final_replicas = options.replicas * std::max<std::size_t>(1, options.final_factor);
  out.final_sums = power_sums_by_horizon<D>(model, beta, m_list, theta_star, final_replicas, bound.seeds["tree_final"],
                                            options.workers);

  double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m_list.size(); ++k) {
    TreeRow& row = bound.rows[k];
    const MomentEstimate moment = moment_from_sums(out.final_sums[k]);
    const Estimate p = log_moment_over_theta(moment, row.theta_star);
    row.moment = moment.value;
    row.moment_std_err = moment.std_err;
    row.heavy_tail = moment.heavy_tail;
    row.p_tree = p.value;
    row.p_tree_std_err = p.std_err;
    row.per_step = p.value / row.m;
    row.per_step_std_err = p.std_err / row.m;
    if (row.per_step < inf) {
      inf = row.per_step;
      bound.running_inf = row.per_step;
      bound.running_inf_std_err = row.per_step_std_err;
      bound.running_inf_m = row.m;
    }
    row.running_inf = inf;
  }

  for (std::size_t a = 0; a < m_list.size(); ++a) {
    for (std::size_t b = 0; b < m_list.size(); ++b) {
      if (m_list[b] != 2 * m_list[a]) continue;
      const TreeRow& small = bound.rows[a];
      const TreeRow& large = bound.rows[b];
      const Estimate diff = paired_v_difference(out.final_sums[b], large.theta_star, 1.0 / large.m, out.final_sums[a],
                                                small.theta_star, 1.0 / small.m);
      bound.doubling.push_back({small.m, large.m, diff.value, diff.std_err,
                                diff.value <= kComparisonSigmas * diff.std_err});
    }
  }
  return out;
}

}  // namespace detail

// Tree upper bounds (1/m) p_m^tree(beta) for each m: theta* from a golden-section
// search over the empirical v_m, then a terminal estimate at theta* on
// final_factor times as many fresh replicas. Replicas are shared across m, so
// rows along a doubling chain are paired.
template <int D>
TreeBound tree_upper_bound(const EnvironmentModel& model, double beta, const std::vector<int>& m_list,
                           const StudyOptions& options = {}) {
  return detail::tree_rows<D>(model, beta, m_list, options).bound;
}

// Monte Carlo (1/n) Q ln W_n along n_list on shared replicas; by
// super-additivity each row is a lower bound on p(beta).
template <int D>
LowerBound superadditive_lower_bound(const EnvironmentModel& model, double beta, const std::vector<int>& n_list,
                                     const StudyOptions& options = {}) {
  detail::check_horizons(n_list, "n_list");
  LowerBound out;
  out.beta = beta;
  out.seeds["lower"] = derive_seed(options.seed, "lower");
  const int horizon = *std::max_element(n_list.begin(), n_list.end());
  std::vector<std::vector<double>> per_step(n_list.size(), std::vector<double>(options.replicas));
  parallel_for(options.replicas, options.workers, [&](std::size_t r) {
    const EnvironmentSlab<D> slab(model, replica_seed(out.seeds["lower"], r), horizon);
    evolve(slab, beta, horizon, [&](const PolymerWeights<D>& w) {
      for (std::size_t k = 0; k < n_list.size(); ++k) {
        if (n_list[k] == w.time) per_step[k][r] = partition_log(w) / w.time;
      }
    });
  });

  out.lower_sup = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    const Estimate e = mean_estimate(per_step[k]);
    out.rows.push_back({n_list[k], e.value, e.std_err});
    if (e.value > out.lower_sup) {
      out.lower_sup = e.value;
      out.lower_sup_std_err = e.std_err;
      out.lower_sup_n = n_list[k];
    }
  }
  std::vector<std::size_t> order(n_list.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return n_list[a] < n_list[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const std::size_t lo = order[k - 1];
    const std::size_t hi = order[k];
    const Estimate diff = paired_difference(per_step[hi], per_step[lo]);
    out.monotone.push_back({n_list[lo], n_list[hi], diff.value, diff.std_err,
                            diff.value >= -kComparisonSigmas * diff.std_err});
  }
  return out;
}

// Q sum_x W_m(x)^theta < 1 certifies p(beta) < 0. Certified when the estimate
// plus 4 standard errors is below 1; a decision within one standard error of
// that threshold is re-run once with 4x replicas.
template <int D>
Certificate strong_disorder_certificate(const EnvironmentModel& model, double beta, int m, double theta,
                                        const StudyOptions& options = {}) {
  if (!(theta > 0.0 && theta < 1.0)) throw UsageError("certificate theta must lie in (0, 1)");
  if (m < 2) throw UsageError("certificates need m >= 2");
  auto run = [&](std::size_t replicas) {
    const auto sums = detail::power_sums_by_horizon<D>(model, beta, {m}, {theta}, replicas,
                                                       derive_seed(options.seed, "certificate", replicas), options.workers);
    const MomentEstimate est = moment_from_sums(sums.front());
    return Certificate{m, theta, est.value, est.std_err, replicas, false,
                       est.value + kCertificateSigmas * est.std_err < 1.0};
  };
  Certificate cert = run(options.replicas);
  if (std::abs(cert.moment + kCertificateSigmas * cert.std_err - 1.0) < cert.std_err) {
    cert = run(options.replicas * 4);
    cert.escalated = true;
  }
  return cert;
}

// Combined tree upper bound, super-additive lower bound and the best
// strong-disorder certificate among rows with an interior theta*.
template <int D>
BoundReport bound_study(const EnvironmentModel& model, double beta, const std::vector<int>& m_list,
                        const std::vector<int>& n_list, const StudyOptions& options = {}) {
  BoundReport report;
  report.beta = beta;
  report.tree = tree_upper_bound<D>(model, beta, m_list, options);
  report.lower = superadditive_lower_bound<D>(model, beta, n_list, options);

  const TreeRow* best = nullptr;
  for (const auto& row : report.tree.rows) {
    if (row.m < 2 || row.boundary_minimum || !(row.theta_star < 1.0)) continue;
    const double upper = row.moment + kCertificateSigmas * row.moment_std_err;
    if (!best || upper < best->moment + kCertificateSigmas * best->moment_std_err) best = &row;
  }
  if (best) {
    Certificate cert{best->m,
                     best->theta_star,
                     best->moment,
                     best->moment_std_err,
                     options.replicas * std::max<std::size_t>(1, options.final_factor),
                     false,
                     best->moment + kCertificateSigmas * best->moment_std_err < 1.0};
    if (std::abs(cert.moment + kCertificateSigmas * cert.std_err - 1.0) < cert.std_err) {
      StudyOptions escalated = options;
      escalated.replicas = cert.replicas;
      cert = strong_disorder_certificate<D>(model, beta, best->m, best->theta_star, escalated);
      cert.escalated = true;
    }
    report.certificate = cert;
  }

  report.sandwich.gap = report.tree.running_inf - report.lower.lower_sup;
  report.sandwich.slack =
      kComparisonSigmas * combined_error(report.tree.running_inf_std_err, report.lower.lower_sup_std_err);
  report.sandwich.holds = report.lower.lower_sup <= report.tree.running_inf + report.sandwich.slack;
  return report;
}

// p_m^tree on a beta grid with common random numbers, plus paired checks that
// it is non-increasing: row(beta_{k+1}) - row(beta_k) <= 3 sigma.
struct BetaProfile {
  int m = 0;
  std::vector<double> betas;
  std::vector<TreeRow> rows;
  std::vector<PairedComparison> monotone;  // `from`/`to` index into betas
};

template <int D>
BetaProfile tree_profile_in_beta(const EnvironmentModel& model, int m, const std::vector<double>& betas,
                                 const StudyOptions& options = {}) {
  BetaProfile out{m, betas, {}, {}};
  std::vector<std::vector<double>> sums;
  for (double beta : betas) {
    auto res = detail::tree_rows<D>(model, beta, {m}, options);
    out.rows.push_back(res.bound.rows.front());
    sums.push_back(std::move(res.final_sums.front()));
  }
  for (std::size_t k = 1; k < betas.size(); ++k) {
    const Estimate diff = paired_v_difference(sums[k], out.rows[k].theta_star, 1.0, sums[k - 1],
                                              out.rows[k - 1].theta_star, 1.0);
    out.monotone.push_back({static_cast<int>(k - 1), static_cast<int>(k), diff.value, diff.std_err,
                            diff.value <= kComparisonSigmas * diff.std_err});
  }
  return out;
}

enum class DisorderSign { zero, negative, inconclusive };

inline const char* to_string(DisorderSign s) {
  switch (s) {
    case DisorderSign::zero: return "zero";
    case DisorderSign::negative: return "negative";
    default: return "inconclusive";
  }
}

struct SignQuery {
  double beta = 0.0;
  Estimate slope;  // v_m'(1)
  std::size_t replicas = 0;
  DisorderSign verdict = DisorderSign::inconclusive;
};

struct BetaBracket {
  int m = 0;
  double lo = 0.0;
  double hi = 0.0;
  double tolerance = 0.0;
  std::vector<SignQuery> queries;
  bool flagged = false;  // some query stayed inconclusive after escalation
};

// Sign of p_m^tree(beta) through v_m'(1) = Q sum_x W_m(x) ln W_m(x):
// p_m^tree < 0 exactly when the slope is positive.
template <int D>
SignQuery tree_sign(const EnvironmentModel& model, double beta, int m, std::size_t replicas, std::uint64_t seed,
                    unsigned workers) {
  const auto samples = sample_polymer_weights<D>(model, beta, m, replicas, seed, workers);
  SignQuery q{beta, derivative_criterion(samples), replicas, DisorderSign::inconclusive};
  if (q.slope.value - kComparisonSigmas * q.slope.std_err > 0.0) {
    q.verdict = DisorderSign::negative;
  } else if (q.slope.value + kComparisonSigmas * q.slope.std_err < 0.0) {
    q.verdict = DisorderSign::zero;
  }
  return q;
}

// Bisection for beta_c^m, valid because p_m^tree is non-increasing in beta.
// Inconclusive queries are retried with 4x replicas, then treated as
// p_m^tree = 0 (moving the bracket toward beta_hi) and flagged.
template <int D>
BetaBracket estimate_beta_c_m(const EnvironmentModel& model, int m, double beta_lo, double beta_hi, double tolerance,
                              const StudyOptions& options = {}) {
  if (m < 1) throw UsageError("m must be >= 1");
  if (!(beta_lo >= 0.0 && beta_lo < beta_hi) || !(tolerance > 0.0)) {
    throw UsageError("beta interval must satisfy 0 <= lo < hi with a positive tolerance");
  }
  const std::uint64_t seed = derive_seed(options.seed, "beta-c");
  BetaBracket out{m, beta_lo, beta_hi, tolerance, {}, false};
  auto query = [&](double beta) {
    SignQuery q = tree_sign<D>(model, beta, m, options.replicas, seed, options.workers);
    if (q.verdict == DisorderSign::inconclusive) q = tree_sign<D>(model, beta, m, options.replicas * 4, seed, options.workers);
    out.queries.push_back(q);
    return q;
  };
  if (query(beta_lo).verdict == DisorderSign::negative) {
    throw UsageError("p_m^tree is already negative at beta_lo=" + std::to_string(beta_lo) + "; widen the interval downward");
  }
  if (query(beta_hi).verdict != DisorderSign::negative) {
    throw UsageError("p_m^tree is not certified negative at beta_hi=" + std::to_string(beta_hi) +
                     "; widen the interval upward");
  }
  while (out.hi - out.lo > tolerance) {
    const double mid = 0.5 * (out.lo + out.hi);
    const SignQuery q = query(mid);
    if (q.verdict == DisorderSign::negative) {
      out.hi = mid;
    } else {
      if (q.verdict == DisorderSign::inconclusive) out.flagged = true;
      out.lo = mid;
    }
  }
  return out;
}

struct EntropyDoublingCheck {
  int m = 0;
  double beta = 0.0;
  Estimate lhs;         // Q sum_y W_2m(y) ln W_2m(y)
  Estimate rhs;         // 2 Q sum_x W_m(x) ln W_m(x)
  Estimate difference;  // lhs - rhs, paired
  bool holds = true;    // lhs >= rhs - 3 sigma
};

template <int D>
EntropyDoublingCheck entropy_doubling_check(const EnvironmentModel& model, double beta, int m, const StudyOptions& options = {}) {
  if (m < 1) throw UsageError("m must be >= 1");
  const auto samples = sample_polymer_weights<D>(model, beta, {m, 2 * m}, options.replicas,
                                                 derive_seed(options.seed, "entropy-doubling"), options.workers);
  auto entropy_terms = [](const WeightSamples& s, double scale) {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      double acc = 0.0;
      for (double lw : s.row(i)) acc += std::exp(lw) * lw;
      out[i] = scale * acc;
    }
    return out;
  };
  const auto rhs = entropy_terms(samples[0], 2.0);
  const auto lhs = entropy_terms(samples[1], 1.0);
  EntropyDoublingCheck out{m, beta, mean_estimate(lhs), mean_estimate(rhs), paired_difference(lhs, rhs), true};
  out.holds = out.difference.value >= -kComparisonSigmas * out.difference.std_err;
  return out;
}

}  // namespace polycascade
