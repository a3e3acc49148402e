#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "environment.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "log_sum_exp.hpp"

namespace polycascade {

// Log-domain point-to-point weights ln W_n(x) of paths starting at the origin
// and ending at x at time n, over the reachable slice L_n. Summing W_n(x) over
// x gives the normalized partition function W_n.
template <int D>
struct PolymerWeights {
  int time = 0;
  double beta = 0.0;
  std::vector<double> log_w;  // ordered as ConeSlice<D>(time)

  static PolymerWeights at_origin(double beta) { return PolymerWeights{0, beta, {0.0}}; }

  ConeSlice<D> slice() const { return ConeSlice<D>(time); }

  double log_weight(const Site<D>& x) const {
    const auto idx = slice().index(x);
    return idx ? log_w[*idx] : kNegInf;
  }

  std::map<Site<D>, double> as_map() const {
    std::map<Site<D>, double> out;
    const auto s = slice();
    for (std::size_t i = 0; i < log_w.size(); ++i) out.emplace(s.site(i), log_w[i]);
    return out;
  }
};

// ln W_{n+1}(y) = logsumexp_{x ~ y} [ln W_n(x) - ln 2d] + beta eta(n+1, y) - lambda(beta).
template <int D>
PolymerWeights<D> forward_step(const PolymerWeights<D>& w, const EnvironmentSlab<D>& slab) {
  const int next = w.time + 1;
  if (next > slab.horizon()) {
    throw RangeError("forward step to time " + std::to_string(next) + " exceeds slab horizon " +
                     std::to_string(slab.horizon()));
  }
  const double beta = w.beta;
  const double shift = -std::log(2.0 * D) - slab.model().log_mgf(beta);

  PolymerWeights<D> out{next, beta, {}};
  if constexpr (D == 1) {
    const auto& prev = w.log_w;
    out.log_w.resize(static_cast<std::size_t>(next) + 1);
    for (int k = 0; k <= next; ++k) {
      const double left = k >= 1 ? prev[k - 1] : kNegInf;
      const double right = k < next ? prev[k] : kNegInf;
      const double eta = slab.eta_unchecked(next, Site<1>{2 * k - next});
      out.log_w[k] = log_add_exp(left, right) + beta * eta + shift;
    }
  } else {
    const ConeSlice<D> from(w.time);
    const ConeSlice<D> to(next);
    out.log_w.resize(to.size());
    for (std::size_t i = 0; i < to.size(); ++i) {
      const Site<D> y = to.site(i);
      LogSumAccumulator acc;
      for (int k = 0; k < D; ++k) {
        for (int step : {-1, 1}) {
          Site<D> x = y;
          x[k] += step;
          if (auto idx = from.index(x)) acc.add(w.log_w[*idx]);
        }
      }
      out.log_w[i] = acc.value() + beta * slab.eta_unchecked(next, y) + shift;
    }
  }
  return out;
}

// ln W_n.
template <int D>
double partition_log(const PolymerWeights<D>& w) {
  if (w.log_w.empty()) throw UsageError("partition_log of empty weights");
  return log_sum_exp(w.log_w);
}

// Runs the recursion from the origin to time n, calling on_step(w) after every
// step including time 0.
template <int D, class OnStep>
PolymerWeights<D> evolve(const EnvironmentSlab<D>& slab, double beta, int n, OnStep&& on_step) {
  auto w = PolymerWeights<D>::at_origin(beta);
  on_step(static_cast<const PolymerWeights<D>&>(w));
  for (int t = 0; t < n; ++t) {
    w = forward_step(w, slab);
    on_step(static_cast<const PolymerWeights<D>&>(w));
  }
  return w;
}

template <int D>
PolymerWeights<D> evolve(const EnvironmentSlab<D>& slab, double beta, int n) {
  return evolve(slab, beta, n, [](const PolymerWeights<D>&) {});
}

// mu_n(omega_{n+1} = y) for y in L_{n+1}: under the time-n polymer measure
// the next increment is a free walk step, so this is the image of
// mu_n(omega_n = .) under the simple random walk kernel.
template <int D>
std::vector<double> step_distribution(const PolymerWeights<D>& w) {
  const double total = partition_log(w);
  const ConeSlice<D> from(w.time);
  const ConeSlice<D> to(w.time + 1);
  std::vector<double> endpoint(w.log_w.size());
  for (std::size_t i = 0; i < endpoint.size(); ++i) endpoint[i] = std::exp(w.log_w[i] - total);

  std::vector<double> out(to.size(), 0.0);
  const double kernel = 1.0 / (2.0 * D);
  for (std::size_t i = 0; i < from.size(); ++i) {
    const Site<D> x = from.site(i);
    for (int k = 0; k < D; ++k) {
      for (int step : {-1, 1}) {
        Site<D> y = x;
        y[k] += step;
        out[*to.index(y)] += kernel * endpoint[i];
      }
    }
  }
  return out;
}

struct PathOracleResult {
  double log_partition = 0.0;
  std::map<std::vector<int>, double> per_site;  // site -> ln W_n(x)
};

inline constexpr double kPathBudget = 1e7;

// Exact ln W_n and ln W_n(x) by enumerating every nearest-neighbour path of
// length n from the origin.
template <int D>
PathOracleResult path_oracle(const EnvironmentSlab<D>& slab, double beta, int n) {
  const double paths = std::pow(2.0 * D, n);
  if (paths > kPathBudget) {
    throw BudgetError("path enumeration needs (2d)^n = " + std::to_string(static_cast<long double>(paths)) +
                      " paths, above the budget of 1e7");
  }
  if (n > slab.horizon()) throw RangeError("path length exceeds slab horizon");
  const double lambda = slab.model().log_mgf(beta);
  const double step_log = -std::log(2.0 * D) - lambda;

  std::map<Site<D>, LogSumAccumulator> ends;
  LogSumAccumulator total;
  Site<D> pos = origin_site<D>();

  auto descend = [&](auto&& self, int depth, double energy) -> void {
    if (depth == n) {
      const double lw = beta * energy + n * step_log;
      ends[pos].add(lw);
      total.add(lw);
      return;
    }
    for (int k = 0; k < D; ++k) {
      for (int step : {-1, 1}) {
        pos[k] += step;
        self(self, depth + 1, energy + slab.eta_unchecked(depth + 1, pos));
        pos[k] -= step;
      }
    }
  };
  descend(descend, 0, 0.0);

  PathOracleResult result;
  result.log_partition = total.value();
  for (const auto& [site, acc] : ends) result.per_site.emplace(std::vector<int>(site.begin(), site.end()), acc.value());
  return result;
}

// mu_n(omega_j = x) for every j in [0, n], each ordered as ConeSlice<D>(j),
// from a forward and a backward log-domain sweep.
template <int D>
std::vector<std::vector<double>> polymer_marginals(const EnvironmentSlab<D>& slab, double beta, int n) {
  std::vector<std::vector<double>> forward;
  forward.reserve(static_cast<std::size_t>(n) + 1);
  evolve(slab, beta, n, [&](const PolymerWeights<D>& w) { forward.push_back(w.log_w); });
  const double total = log_sum_exp(forward.back());
  const double shift = -std::log(2.0 * D) - slab.model().log_mgf(beta);

  // backward[j][x]: log weight of all continuations from (j, x) to time n.
  std::vector<double> backward(forward.back().size(), 0.0);
  std::vector<std::vector<double>> marginals(static_cast<std::size_t>(n) + 1);
  for (int j = n; j >= 0; --j) {
    auto& mj = marginals[j];
    mj.resize(forward[j].size());
    for (std::size_t i = 0; i < mj.size(); ++i) mj[i] = std::exp(forward[j][i] + backward[i] - total);
    if (j == 0) break;

    const ConeSlice<D> here(j);
    const ConeSlice<D> prev(j - 1);
    std::vector<double> incoming(here.size());
    for (std::size_t i = 0; i < here.size(); ++i) {
      incoming[i] = backward[i] + beta * slab.eta_unchecked(j, here.site(i)) + shift;
    }
    std::vector<double> next_back(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
      const Site<D> x = prev.site(i);
      LogSumAccumulator acc;
      for (int k = 0; k < D; ++k) {
        for (int step : {-1, 1}) {
          Site<D> y = x;
          y[k] += step;
          acc.add(incoming[*here.index(y)]);
        }
      }
      next_back[i] = acc.value();
    }
    backward = std::move(next_back);
  }
  return marginals;
}

}  // namespace polycascade
