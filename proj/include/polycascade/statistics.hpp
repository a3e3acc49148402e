#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"

namespace polycascade {

// A point estimate with its (one sigma) standard error.
struct Estimate {
  double value = 0.0;
  double std_err = 0.0;
};

inline double sample_mean(std::span<const double> xs) {
  if (xs.empty()) throw UsageError("mean of an empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

// Sample mean with standard error s / sqrt(n) (two-pass variance).
inline Estimate mean_estimate(std::span<const double> xs) {
  if (xs.size() < 2) throw UsageError("a standard error needs at least 2 samples");
  const double mean = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double n = static_cast<double>(xs.size());
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

// Mean of a - b over paired samples.
inline Estimate paired_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UsageError("paired samples must have equal length");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return mean_estimate(diff);
}

// Median of `blocks` contiguous block means. The standard error uses the
// asymptotic sqrt(pi/2) efficiency loss of the median of normal block means.
inline double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t k = xs.size() / 2;
  return xs.size() % 2 ? xs[k] : 0.5 * (xs[k - 1] + xs[k]);
}

inline Estimate median_of_means(std::span<const double> xs, std::size_t blocks = 16) {
  if (xs.size() < blocks || blocks < 2) throw UsageError("median of means needs at least one sample per block");
  std::vector<double> means(blocks);
  const std::size_t n = xs.size();
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * n / blocks;
    const std::size_t hi = (b + 1) * n / blocks;
    means[b] = sample_mean(xs.subspan(lo, hi - lo));
  }
  const double median = median_of(means);
  for (double& m : means) m = std::abs(m - median);
  // Block spread from the scaled MAD so that a few extreme blocks cannot
  // inflate it.
  const double spread = 1.4826 * median_of(means) / std::sqrt(static_cast<double>(blocks));
  return {median, std::sqrt(std::numbers::pi / 2.0) * spread};
}

// Delete-one-block jackknife for a smooth function of column means.
// columns[k][i] is feature k of replica i; estimator maps the vector of column
// means to the statistic.
template <class Estimator>
Estimate block_jackknife(const std::vector<std::vector<double>>& columns, Estimator&& estimator,
                         std::size_t blocks = 32) {
  if (columns.empty() || columns.front().size() < blocks) throw UsageError("jackknife needs at least one replica per block");
  const std::size_t n = columns.front().size();
  const std::size_t k = columns.size();
  std::vector<std::vector<double>> block_sums(blocks, std::vector<double>(k, 0.0));
  std::vector<std::size_t> block_sizes(blocks);
  std::vector<double> totals(k, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * n / blocks;
    const std::size_t hi = (b + 1) * n / blocks;
    block_sizes[b] = hi - lo;
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += columns[c][i];
      block_sums[b][c] = s;
      totals[c] += s;
    }
  }
  std::vector<double> means(k);
  for (std::size_t c = 0; c < k; ++c) means[c] = totals[c] / static_cast<double>(n);
  const double full = estimator(std::span<const double>(means));

  std::vector<double> leave_out(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    const double rest = static_cast<double>(n - block_sizes[b]);
    for (std::size_t c = 0; c < k; ++c) means[c] = (totals[c] - block_sums[b][c]) / rest;
    leave_out[b] = estimator(std::span<const double>(means));
  }
  const double avg = sample_mean(leave_out);
  double ss = 0.0;
  for (double v : leave_out) ss += (v - avg) * (v - avg);
  const double g = static_cast<double>(blocks);
  return {full, std::sqrt((g - 1.0) / g * ss)};
}

inline double combined_error(double a, double b) noexcept { return std::sqrt(a * a + b * b); }

}  // namespace polycascade
