#include "safear/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace safear {

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

namespace {

/// Midranks of the pooled sample, in pooled order.
std::vector<double> midranks(const std::vector<double>& pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });

  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = midrank;
    i = j + 1;
  }
  return ranks;
}

double u_from_rank_sum(double rank_sum_a, std::size_t n_a, std::size_t n_b) {
  return static_cast<double>(n_a) * static_cast<double>(n_b) +
         static_cast<double>(n_a) * (static_cast<double>(n_a) + 1.0) / 2.0 - rank_sum_a;
}

}  // namespace

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");

  const std::size_t n_a = a.size(), n_b = b.size(), n = n_a + n_b;
  std::vector<double> pooled;
  pooled.reserve(n);
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < n_a; ++i) rank_sum_a += ranks[i];
  const double u_a = u_from_rank_sum(rank_sum_a, n_a, n_b);
  const double u_b = static_cast<double>(n_a) * static_cast<double>(n_b) - u_a;

  MannWhitneyResult result;
  result.u = std::min(u_a, u_b);
  const double mu = static_cast<double>(n_a) * static_cast<double>(n_b) / 2.0;
  const double observed_dev = std::abs(u_a - mu);

  if (n <= 14) {
    // Exact permutation distribution: every way of assigning n_a of the
    // pooled midranks to group a, counted against the observed deviation.
    result.exact = true;
    std::uint64_t total = 0, as_extreme = 0;
    const std::uint32_t full = 1u << n;
    for (std::uint32_t mask = 0; mask < full; ++mask) {
      if (std::popcount(mask) != static_cast<int>(n_a)) continue;
      ++total;
      double rs = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) rs += ranks[i];
      const double dev = std::abs(u_from_rank_sum(rs, n_a, n_b) - mu);
      if (dev >= observed_dev - 1e-12) ++as_extreme;
    }
    result.p_value = static_cast<double>(as_extreme) / static_cast<double>(total);
    return result;
  }

  // Normal approximation with tie-corrected variance and continuity correction.
  result.exact = false;
  double tie_sum = 0.0;
  {
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_sum += t * t * t - t;
      i = j + 1;
    }
  }
  const double nn = static_cast<double>(n);
  const double var = static_cast<double>(n_a) * static_cast<double>(n_b) / 12.0 *
                     ((nn + 1.0) - tie_sum / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double z = std::max(0.0, observed_dev - 0.5) / std::sqrt(var);
  result.p_value = std::min(1.0, 2.0 * normal_sf(z));
  return result;
}

}  // namespace safear
