#ifndef CFTPMIX_DIST_HPP
#define CFTPMIX_DIST_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "cftpmix/rng.hpp"

namespace cftpmix {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

double logsumexp(std::span<const double> v);

double std_normal_cdf(double x);
// Inverse standard normal CDF (Acklam's rational approximation plus one
// Halley refinement); |error| < 1e-13 over (0,1).
double inv_std_normal_cdf(double p);

// Deterministic transforms of ledger uniforms.
inline double normal_from_uniform(double u) { return inv_std_normal_cdf(u); }

// Marsaglia-Tsang gamma generator driven by a ledger stream (shape/rate
// parameterization, density proportional to x^(shape-1) exp(-rate x)).
double gamma_from_stream(double shape, double rate, CellStream& stream);

// Dirichlet via normalized gammas, one stream per coordinate.
std::vector<double> dirichlet_from_streams(std::span<const double> shapes,
                                           std::span<CellStream> streams);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
};

inline constexpr std::int64_t kDefaultRejectionBudget = 100000;

// Draws from the base density restricted to [lo, hi] by sequentially
// consuming proposals from the stream; throws sampler_stall_error when the
// budget runs out.
double truncated_normal_from_stream(double mean, double sd, Interval iv,
                                    CellStream& stream,
                                    std::int64_t budget = kDefaultRejectionBudget);
double truncated_gamma_from_stream(double shape, double rate, Interval iv,
                                   CellStream& stream,
                                   std::int64_t budget = kDefaultRejectionBudget);

// Adaptive rejection sampling for a log-concave density on [lo, hi] given
// its log density and derivative. Used for non-conjugate conditionals that
// have no named truncated form.
struct LogConcaveDensity {
  double (*log_f)(double x, const void* ctx);
  double (*dlog_f)(double x, const void* ctx);
  const void* ctx = nullptr;
};
double adaptive_rejection_from_stream(const LogConcaveDensity& density, Interval iv,
                                      CellStream& stream,
                                      std::int64_t budget = kDefaultRejectionBudget);

// Log densities used by oracles and tests.
double log_normal_density(double x, double mean, double sd);
double log_gamma_density(double x, double shape, double rate);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double reg_inc_beta(double a, double b, double x);

}  // namespace cftpmix

#endif  // CFTPMIX_DIST_HPP
