#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace polycascade {

template <int D>
using Site = std::array<int, D>;

template <int D>
constexpr Site<D> origin_site() noexcept {
  return Site<D>{};
}

template <int D>
constexpr int l1_norm(const Site<D>& x) noexcept {
  int s = 0;
  for (int c : x) s += c < 0 ? -c : c;
  return s;
}

template <int D>
constexpr int coordinate_sum(const Site<D>& x) noexcept {
  int s = 0;
  for (int c : x) s += c;
  return s;
}

// (time, site) is reachable by the simple random walk from the origin.
template <int D>
constexpr bool in_cone(int time, const Site<D>& x) noexcept {
  if (time < 0) return false;
  const int norm = l1_norm<D>(x);
  return norm <= time && ((time - coordinate_sum<D>(x)) % 2 == 0);
}

template <int D>
std::string format_site(const Site<D>& x) {
  std::string out = "(";
  for (int k = 0; k < D; ++k) {
    if (k) out += ",";
    out += std::to_string(x[k]);
  }
  return out + ")";
}

namespace detail {

template <int D>
void enumerate_sites(int time, int dim, int budget, Site<D>& partial, std::vector<Site<D>>& out) {
  if (dim == D - 1) {
    // The last coordinate takes every value with the remaining budget and right parity.
    for (int v = -budget; v <= budget; ++v) {
      partial[dim] = v;
      if (in_cone<D>(time, partial)) out.push_back(partial);
    }
    return;
  }
  for (int v = -budget; v <= budget; ++v) {
    partial[dim] = v;
    enumerate_sites<D>(time, dim + 1, budget - std::abs(v), partial, out);
  }
}

template <int D>
std::shared_ptr<const std::vector<Site<D>>> cached_slice(int time) {
  static std::mutex mutex;
  static std::map<int, std::shared_ptr<const std::vector<Site<D>>>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(time);
  if (it != cache.end()) return it->second;
  auto sites = std::make_shared<std::vector<Site<D>>>();
  Site<D> partial{};
  enumerate_sites<D>(time, 0, time, partial, *sites);
  std::sort(sites->begin(), sites->end());
  cache.emplace(time, sites);
  return sites;
}

}  // namespace detail

// Sites reachable at a fixed time, in lexicographic order. In d = 1 the slice
// is {-n, -n+2, ..., n} with index (x + n) / 2 and nothing is stored.
template <int D>
class ConeSlice {
 public:
  explicit ConeSlice(int time) : time_(time) {
    if constexpr (D > 1) sites_ = detail::cached_slice<D>(time);
  }

  int time() const noexcept { return time_; }

  std::size_t size() const noexcept {
    if constexpr (D == 1) {
      return static_cast<std::size_t>(time_ + 1);
    } else {
      return sites_->size();
    }
  }

  Site<D> site(std::size_t i) const noexcept {
    if constexpr (D == 1) {
      return {2 * static_cast<int>(i) - time_};
    } else {
      return (*sites_)[i];
    }
  }

  std::optional<std::size_t> index(const Site<D>& x) const noexcept {
    if (!in_cone<D>(time_, x)) return std::nullopt;
    if constexpr (D == 1) {
      return static_cast<std::size_t>((x[0] + time_) / 2);
    } else {
      auto it = std::lower_bound(sites_->begin(), sites_->end(), x);
      return static_cast<std::size_t>(it - sites_->begin());
    }
  }

 private:
  int time_;
  std::shared_ptr<const std::vector<Site<D>>> sites_;
};

namespace detail {

inline std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

// Lattice points of Z^D at l1 distance exactly k.
template <int D>
std::size_t sphere_count(int k) {
  if (k == 0) return 1;
  std::size_t total = 0;
  for (int i = 1; i <= std::min(D, k); ++i) total += (std::size_t{1} << i) * binomial(D, i) * binomial(k - 1, i - 1);
  return total;
}

}  // namespace detail

// |L_n|: number of sites reachable at time n, counted without enumeration.
template <int D>
std::size_t slice_size(int time) {
  std::size_t total = 0;
  for (int k = time % 2; k <= time; k += 2) total += detail::sphere_count<D>(k);
  return total;
}

// Number of reachable sites summed over times 1..horizon.
template <int D>
std::size_t cone_volume(int horizon) {
  std::size_t total = 0;
  for (int j = 1; j <= horizon; ++j) total += slice_size<D>(j);
  return total;
}

}  // namespace polycascade
