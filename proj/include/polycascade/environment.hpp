#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "philox.hpp"

namespace polycascade {

struct Gaussian {
  double mean = 0.0;
  double stddev = 1.0;
};

// Takes value v1 with probability p and v0 otherwise.
struct Bernoulli {
  double p = 0.5;
  double v0 = 0.0;
  double v1 = 1.0;
};

struct Uniform {
  double a = 0.0;
  double b = 1.0;
};

// Symmetric +-1.
struct Rademacher {};

// Law of a single site energy eta(j, x). All supported families have finite
// exponential moments of every order.
class EnvironmentModel {
 public:
  using Family = std::variant<Gaussian, Bernoulli, Uniform, Rademacher>;

  EnvironmentModel() : EnvironmentModel(Gaussian{}) {}

  explicit EnvironmentModel(Family family) : family_(family) { validate(); }

  static EnvironmentModel gaussian(double mean = 0.0, double stddev = 1.0) { return EnvironmentModel(Gaussian{mean, stddev}); }
  static EnvironmentModel bernoulli(double p, double v0 = 0.0, double v1 = 1.0) {
    return EnvironmentModel(Bernoulli{p, v0, v1});
  }
  static EnvironmentModel uniform(double a = 0.0, double b = 1.0) { return EnvironmentModel(Uniform{a, b}); }
  static EnvironmentModel rademacher() { return EnvironmentModel(Rademacher{}); }

  // Builds a model from a family name and its positional parameters, as used in
  // configuration files: gaussian(mean, stddev), bernoulli(p, v0, v1),
  // uniform(a, b), rademacher().
  static EnvironmentModel from_name(const std::string& name, const std::vector<double>& params) {
    auto expect = [&](std::size_t count) {
      if (params.size() != count) {
        throw ParameterError("environment family '" + name + "' takes " + std::to_string(count) + " parameters, got " +
                             std::to_string(params.size()));
      }
    };
    if (name == "gaussian") {
      expect(2);
      return gaussian(params[0], params[1]);
    }
    if (name == "bernoulli") {
      expect(3);
      return bernoulli(params[0], params[1], params[2]);
    }
    if (name == "uniform") {
      expect(2);
      return uniform(params[0], params[1]);
    }
    if (name == "rademacher") {
      expect(0);
      return rademacher();
    }
    throw ParameterError("unknown environment family '" + name + "' (expected gaussian, bernoulli, uniform or rademacher)");
  }

  const Family& family() const noexcept { return family_; }

  std::string name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Gaussian>) return "gaussian";
          if constexpr (std::is_same_v<F, Bernoulli>) return "bernoulli";
          if constexpr (std::is_same_v<F, Uniform>) return "uniform";
          if constexpr (std::is_same_v<F, Rademacher>) return "rademacher";
        },
        family_);
  }

  std::vector<double> params() const {
    return std::visit(
        [](const auto& f) -> std::vector<double> {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Gaussian>) return {f.mean, f.stddev};
          if constexpr (std::is_same_v<F, Bernoulli>) return {f.p, f.v0, f.v1};
          if constexpr (std::is_same_v<F, Uniform>) return {f.a, f.b};
          if constexpr (std::is_same_v<F, Rademacher>) return {};
        },
        family_);
  }

  bool is_gaussian() const noexcept { return std::holds_alternative<Gaussian>(family_); }

  // Smallest interval [a, b] containing the support, for bounded families.
  std::optional<std::pair<double, double>> support_bounds() const {
    return std::visit(
        [](const auto& f) -> std::optional<std::pair<double, double>> {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Gaussian>) return std::nullopt;
          if constexpr (std::is_same_v<F, Bernoulli>) return std::pair{std::min(f.v0, f.v1), std::max(f.v0, f.v1)};
          if constexpr (std::is_same_v<F, Uniform>) return std::pair{f.a, f.b};
          if constexpr (std::is_same_v<F, Rademacher>) return std::pair{-1.0, 1.0};
        },
        family_);
  }

  double log_mgf(double beta) const {
    return std::visit([beta](const auto& f) { return log_mgf_of(f, beta); }, family_);
  }

  // Maps one block of random bits to a sample of the law.
  double transform(const RandomPair& bits) const noexcept {
    return std::visit([&bits](const auto& f) { return transform_of(f, bits); }, family_);
  }

 private:
  Family family_;

  void validate() const {
    std::visit(
        [](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, Gaussian>) {
            if (!std::isfinite(f.mean) || !(f.stddev > 0.0) || !std::isfinite(f.stddev)) {
              throw ParameterError("gaussian environment requires a finite mean and stddev > 0");
            }
          } else if constexpr (std::is_same_v<F, Bernoulli>) {
            if (!(f.p > 0.0 && f.p < 1.0)) throw ParameterError("bernoulli environment requires 0 < p < 1");
            if (!std::isfinite(f.v0) || !std::isfinite(f.v1) || f.v0 == f.v1) {
              throw ParameterError("bernoulli environment requires finite values v0 != v1");
            }
          } else if constexpr (std::is_same_v<F, Uniform>) {
            if (!std::isfinite(f.a) || !std::isfinite(f.b) || !(f.a < f.b)) {
              throw ParameterError("uniform environment requires finite a < b");
            }
          }
        },
        family_);
  }

  static double log_mgf_of(const Gaussian& g, double beta) noexcept {
    return g.mean * beta + 0.5 * g.stddev * g.stddev * beta * beta;
  }

  static double log_mgf_of(const Bernoulli& b, double beta) noexcept {
    const double e0 = beta * b.v0;
    const double e1 = beta * b.v1;
    const double top = std::max(e0, e1);
    return top + std::log((1.0 - b.p) * std::exp(e0 - top) + b.p * std::exp(e1 - top));
  }

  // ln((e^{beta b} - e^{beta a}) / (beta (b - a))) = beta a + ln(expm1(t) / t), t = beta (b - a).
  static double log_mgf_of(const Uniform& u, double beta) noexcept {
    const double width = u.b - u.a;
    const double t = beta * width;
    double tail;
    if (std::abs(beta) < 1e-4 && std::abs(t) < 1e-3) {
      // expm1(t)/t = 1 + t/2 + t^2/6 + t^3/24 + t^4/120 + t^5/720 + ...
      const double series = t * (1.0 / 2 + t * (1.0 / 6 + t * (1.0 / 24 + t * (1.0 / 120 + t * (1.0 / 720)))));
      tail = std::log1p(series);
    } else if (t > 30.0) {
      tail = t + std::log1p(-std::exp(-t)) - std::log(t);
    } else if (t < -30.0) {
      tail = std::log1p(-std::exp(t)) - std::log(-t);
    } else {
      tail = std::log(std::expm1(t) / t);
    }
    return beta * u.a + tail;
  }

  static double log_mgf_of(const Rademacher&, double beta) noexcept {
    const double a = std::abs(beta);
    return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
  }

  static double transform_of(const Gaussian& g, const RandomPair& bits) noexcept {
    const double radius = std::sqrt(-2.0 * std::log(uniform_open_closed(bits.first)));
    const double angle = 2.0 * std::numbers::pi * uniform_closed_open(bits.second);
    return g.mean + g.stddev * radius * std::cos(angle);
  }

  static double transform_of(const Bernoulli& b, const RandomPair& bits) noexcept {
    return uniform_closed_open(bits.first) < b.p ? b.v1 : b.v0;
  }

  static double transform_of(const Uniform& u, const RandomPair& bits) noexcept {
    return u.a + (u.b - u.a) * uniform_closed_open(bits.first);
  }

  static double transform_of(const Rademacher&, const RandomPair& bits) noexcept {
    return (bits.first >> 63) ? 1.0 : -1.0;
  }
};

inline double log_mgf(const EnvironmentModel& model, double beta) { return model.log_mgf(beta); }

// e^{beta eta - lambda(beta)}; its mean over the environment law is 1.
inline double normalized_weight(const EnvironmentModel& model, double beta, double eta) {
  return std::exp(beta * eta - model.log_mgf(beta));
}

namespace detail {

template <int D>
Philox4x32::Counter site_counter(int j, const Site<D>& x) noexcept {
  Philox4x32::Counter ctr{static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(x[0]), 0u, 0x9a11u};
  if constexpr (D >= 2) ctr[2] = static_cast<std::uint32_t>(x[1]);
  if constexpr (D >= 3) {
    std::uint64_t folded = 0;
    for (int k = 2; k < D; ++k) folded = folded * 0x100000001b3ull + static_cast<std::uint32_t>(x[k]);
    ctr[3] ^= static_cast<std::uint32_t>(folded ^ (folded >> 32));
  }
  return ctr;
}

}  // namespace detail

// eta(j, x) as a pure function of (seed, j, x).
template <int D>
double sample_eta_unchecked(const EnvironmentModel& model, std::uint64_t seed, int j, const Site<D>& x) noexcept {
  return model.transform(philox_pair(seed, detail::site_counter<D>(j, x)));
}

template <int D>
double sample_eta(const EnvironmentModel& model, std::uint64_t seed, int j, const Site<D>& x) {
  if (j < 1 || !in_cone<D>(j, x)) {
    throw DomainError("site " + format_site<D>(x) + " at time " + std::to_string(j) + " is outside the reachable cone");
  }
  return sample_eta_unchecked<D>(model, seed, j, x);
}

// A realized disorder field on the space-time cone {1..horizon} x L_j. Values
// are generated on demand from the seed; explicit per-site values can be
// installed on top (for perturbations and exhaustive enumeration).
template <int D>
class EnvironmentSlab {
 public:
  static constexpr int dimension = D;
  static constexpr std::size_t kMaxHigherDimSites = 10'000'000;

  EnvironmentSlab(EnvironmentModel model, std::uint64_t seed, int horizon)
      : model_(std::move(model)), seed_(seed), horizon_(horizon) {
    check_budget(horizon);
  }

  // Throws BudgetError when a slab of this horizon would exceed the site limit.
  static void check_budget(int horizon) {
    if (horizon < 1) throw ParameterError("slab horizon must be positive");
    if constexpr (D > 1) {
      const std::size_t volume = cone_volume<D>(horizon);
      if (volume > kMaxHigherDimSites) {
        throw BudgetError("cone of horizon " + std::to_string(horizon) + " in d=" + std::to_string(D) + " has " +
                          std::to_string(volume) + " sites, above the limit of " + std::to_string(kMaxHigherDimSites));
      }
    }
  }

  const EnvironmentModel& model() const noexcept { return model_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int horizon() const noexcept { return horizon_; }

  double eta(int j, const Site<D>& x) const {
    if (j > horizon_) {
      throw RangeError("time " + std::to_string(j) + " exceeds slab horizon " + std::to_string(horizon_));
    }
    if (j < 1 || !in_cone<D>(j, x)) {
      throw DomainError("site " + format_site<D>(x) + " at time " + std::to_string(j) + " is outside the reachable cone");
    }
    return eta_unchecked(j, x);
  }

  double eta_unchecked(int j, const Site<D>& x) const {
    if (!overrides_.empty()) {
      auto it = overrides_.find({j, x});
      if (it != overrides_.end()) return it->second;
    }
    return sample_eta_unchecked<D>(model_, seed_, j, x);
  }

  void set(int j, const Site<D>& x, double value) {
    eta(j, x);  // validates the address
    overrides_[{j, x}] = value;
  }

  EnvironmentSlab with_value(int j, const Site<D>& x, double value) const {
    EnvironmentSlab copy = *this;
    copy.set(j, x, value);
    return copy;
  }

  // All values at time j, ordered as ConeSlice<D>(j).
  std::vector<double> slice_values(int j) const {
    if (j < 1 || j > horizon_) throw RangeError("time " + std::to_string(j) + " outside slab [1, horizon]");
    const ConeSlice<D> slice(j);
    std::vector<double> values(slice.size());
    for (std::size_t i = 0; i < slice.size(); ++i) values[i] = eta_unchecked(j, slice.site(i));
    return values;
  }

 private:
  EnvironmentModel model_;
  std::uint64_t seed_;
  int horizon_;
  std::map<std::pair<int, Site<D>>, double> overrides_;
};

}  // namespace polycascade
