#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace polycascade {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ln(e^a + e^b), exact for infinite arguments.
inline double log_add_exp(double a, double b) noexcept {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

// Max-shifted ln(sum_i e^{args_i}); -inf for an empty range.
inline double log_sum_exp(std::span<const double> args) noexcept {
  if (args.empty()) return kNegInf;
  const double top = *std::max_element(args.begin(), args.end());
  if (top == kNegInf || !std::isfinite(top)) return top;
  double sum = 0.0;
  for (double a : args) sum += std::exp(a - top);
  return top + std::log(sum);
}

// Streaming log-sum-exp with a running maximum.
class LogSumAccumulator {
 public:
  void add(double a) noexcept {
    if (a == kNegInf) return;
    if (a <= top_) {
      sum_ += std::exp(a - top_);
    } else {
      sum_ = sum_ * std::exp(top_ - a) + 1.0;
      top_ = a;
    }
  }

  double value() const noexcept { return top_ == kNegInf ? kNegInf : top_ + std::log(sum_); }

 private:
  double top_ = kNegInf;
  double sum_ = 0.0;
};

}  // namespace polycascade
