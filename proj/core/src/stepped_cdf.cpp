#include "cftpmix/stepped_cdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cftpmix/dist.hpp"
#include "cftpmix/errors.hpp"

namespace cftpmix {

bool SteppedCDF::valid(double tol) const {
  if (values.empty()) return false;
  double prev = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < -tol || v > 1.0 + tol) return false;
    if (v < prev - tol) return false;
    prev = v;
  }
  return std::abs(values.back() - 1.0) <= tol;
}

void SteppedCDF::check(const char* what) const {
  if (!valid()) throw invariant_violation_error(std::string(what) + ": invalid stepped CDF");
}

int SteppedCDF::invert(double u) const {
  if (values.empty()) throw usage_error("invert: empty CDF");
  auto it = std::lower_bound(values.begin(), values.end(), u);
  if (it == values.end()) return size() - 1;
  return static_cast<int>(it - values.begin());
}

SteppedCDF SteppedCDF::from_log_weights(std::span<const double> log_w) {
  if (log_w.empty()) throw usage_error("from_log_weights: empty support");
  double m = -std::numeric_limits<double>::infinity();
  for (double lw : log_w) {
    if (std::isnan(lw)) throw numerical_degeneracy_error("from_log_weights: NaN weight");
    if (lw > m) m = lw;
  }
  if (!std::isfinite(m))
    throw numerical_degeneracy_error("from_log_weights: all weights underflowed");
  SteppedCDF f;
  f.values.resize(log_w.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < log_w.size(); ++k) {
    acc += std::exp(log_w[k] - m);
    f.values[k] = acc;
  }
  for (double& v : f.values) v /= acc;
  f.values.back() = 1.0;
  return f;
}

SteppedCDF SteppedCDF::point_mass(int k, int support) {
  if (support < 1 || k < 0 || k >= support) throw usage_error("point_mass: bad support");
  SteppedCDF f;
  f.values.assign(static_cast<std::size_t>(support), 1.0);
  for (int i = 0; i < k; ++i) f.values[static_cast<std::size_t>(i)] = 0.0;
  return f;
}

void BoundPair::check(const char* what) const {
  lower.check(what);
  upper.check(what);
  if (lower.size() != upper.size())
    throw invariant_violation_error(std::string(what) + ": envelope support mismatch");
  for (int k = 0; k < lower.size(); ++k) {
    if (lower.at(k) > upper.at(k) + kCdfTol)
      throw invariant_violation_error(std::string(what) + ": lower envelope exceeds upper at " +
                                      std::to_string(k));
  }
}

bool BoundPair::degenerate() const {
  for (int k = 0; k < lower.size(); ++k)
    if (std::abs(lower.at(k) - upper.at(k)) > kCdfTol) return false;
  return true;
}

void repair_envelopes(std::vector<double>& lower_raw, std::vector<double>& upper_raw) {
  if (lower_raw.size() != upper_raw.size() || lower_raw.empty())
    throw usage_error("repair_envelopes: size mismatch");
  const std::size_t K = lower_raw.size();
  for (std::size_t k = 0; k < K; ++k) {
    lower_raw[k] = std::clamp(lower_raw[k], 0.0, 1.0);
    upper_raw[k] = std::clamp(upper_raw[k], 0.0, 1.0);
  }
  lower_raw[K - 1] = 1.0;
  upper_raw[K - 1] = 1.0;
  // Loosen only: running min from the right on the lower envelope, running
  // max from the left on the upper one.
  for (std::size_t k = K - 1; k-- > 0;)
    lower_raw[k] = std::min(lower_raw[k], lower_raw[k + 1]);
  for (std::size_t k = 1; k < K; ++k)
    upper_raw[k] = std::max(upper_raw[k], upper_raw[k - 1]);
  upper_raw[K - 1] = 1.0;
}

}  // namespace cftpmix
