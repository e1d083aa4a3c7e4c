#ifndef CFTPMIX_STEPPED_CDF_HPP
#define CFTPMIX_STEPPED_CDF_HPP

#include <span>
#include <vector>

namespace cftpmix {

inline constexpr double kCdfTol = 1e-12;

// Distribution function of a discrete variable on {0, ..., K-1}:
// nondecreasing values with F(K-1) = 1.
struct SteppedCDF {
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
  double at(int k) const { return values[static_cast<std::size_t>(k)]; }

  bool valid(double tol = kCdfTol) const;
  void check(const char* what) const;  // throws invariant_violation_error

  // Smallest k with F(k) >= u. Ledger uniforms live in the open interval, so
  // u in (0,1); ties resolve to the smaller index.
  int invert(double u) const;

  // From unnormalized log weights, max-subtracted before exponentiation.
  static SteppedCDF from_log_weights(std::span<const double> log_w);
  static SteppedCDF point_mass(int k, int support);
};

// Lower/upper envelope pair over a common support.
struct BoundPair {
  SteppedCDF lower;  // F^L
  SteppedCDF upper;  // F^U

  void check(const char* what) const;

  // Inverting the upper envelope gives the lower realization and vice versa.
  int invert_lower_realization(double u) const { return upper.invert(u); }
  int invert_upper_realization(double u) const { return lower.invert(u); }
  bool degenerate() const;  // lower == upper within tolerance
};

// Monotonizes per-point optimizer output without tightening either envelope:
// the lower envelope is replaced by its running minimum from the right, the
// upper by its running maximum from the left, both clamped to [0,1] with the
// terminal value pinned to 1.
void repair_envelopes(std::vector<double>& lower_raw, std::vector<double>& upper_raw);

}  // namespace cftpmix

#endif  // CFTPMIX_STEPPED_CDF_HPP
