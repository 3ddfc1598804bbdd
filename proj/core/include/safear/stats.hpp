#pragma once

#include <span>

namespace safear {

struct MannWhitneyResult {
  double u = 0.0;        // min(U_a, U_b)
  double p_value = 1.0;  // two-sided
  bool exact = false;    // exact permutation enumeration vs normal approximation
};

/// Two-sided Mann-Whitney U test with midrank tie handling.
///
/// Small samples (n_a + n_b <= 14) are tested by exhaustive enumeration of all
/// group assignments of the pooled midranks; larger samples use the normal
/// approximation with tie-corrected variance and a 0.5 continuity correction.
/// Samples whose pooled values are all identical give p = 1.
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Standard normal survival function.
double normal_sf(double z);

}  // namespace safear
