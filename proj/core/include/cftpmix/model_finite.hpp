#ifndef CFTPMIX_MODEL_FINITE_HPP
#define CFTPMIX_MODEL_FINITE_HPP

#include <optional>
#include <span>
#include <vector>

#include "cftpmix/data.hpp"
#include "cftpmix/dist.hpp"
#include "cftpmix/rng.hpp"
#include "cftpmix/stepped_cdf.hpp"

namespace cftpmix {

// Normal mixture with a known number of components p and conjugate priors:
//   lambda_j ~ Gamma(eta/2, zeta/2)
//   mu_j | lambda_j ~ N(xi_j, tau_j^2 / lambda_j)
//   Pi ~ Dirichlet(gamma_1, ..., gamma_p)
// Bounded mode restricts mu_j / lambda_j (and optionally Pi) to closed
// intervals; draws then go through truncated rejection sampling.
struct FiniteMixtureSpec {
  int p = 1;
  double eta = 1.0;
  double zeta = 1.0;
  std::vector<double> xi;
  std::vector<double> tau;
  std::vector<double> gamma;

  std::vector<Interval> mu_bounds;      // empty => unbounded
  std::vector<Interval> lambda_bounds;  // empty => unbounded
  std::vector<Interval> pi_bounds;      // empty => only the simplex constraint
  std::vector<double> lambda_known;     // nonempty => precisions fixed

  bool bounded() const { return !mu_bounds.empty(); }
  bool has_known_lambda() const { return !lambda_known.empty(); }
  void validate() const;
};

struct FiniteMixtureState {
  std::vector<int> z;   // allocations in {0, ..., p-1}
  std::vector<double> pi;
  std::vector<double> mu;
  std::vector<double> lambda;

  void validate(const FiniteMixtureSpec& spec, int n) const;
  bool operator==(const FiniteMixtureState&) const = default;
};

// Per-component counts, means, and within-component sums of squares.
// Components with no members report mean 0 and ss 0 so the conditional
// formulas reduce to the prior. Updates recompute affected components with
// the same fixed index-order loop as a fresh pass, so cached and recomputed
// values agree exactly.
class AllocationSummary {
 public:
  AllocationSummary(const Dataset& data, std::span<const int> z, int p);

  int p() const { return p_; }
  int count(int j) const { return n_[static_cast<std::size_t>(j)]; }
  double mean(int j) const { return mean_[static_cast<std::size_t>(j)]; }
  double ss(int j) const { return ss_[static_cast<std::size_t>(j)]; }
  const std::vector<int>& z() const { return z_; }

  void set_allocation(int i, int j);

 private:
  void recompute(int j);

  const Dataset* data_;
  int p_;
  std::vector<int> z_;
  std::vector<int> n_;
  std::vector<double> mean_;
  std::vector<double> ss_;
};

// log of sqrt(lambda/2pi) exp(-lambda/2 (y-mu)^2).
double log_component_density(double y, double mu, double lambda);

// Full conditional of z_i: pmf proportional to
// pi_j sqrt(lambda_j) exp(-lambda_j/2 (y_i - mu_j)^2); independent of Z_{-i}.
SteppedCDF z_full_conditional(int i, const FiniteMixtureState& state, const Dataset& data);

// Beta(n1+1, n-n1+1) draw from n+2 shared Exp(1) variates; monotone
// nondecreasing in n1 for fixed variates.
double beta_from_exponentials(int n1, int n, std::span<const double> e);

// Conditional moments of the conjugate updates given allocation stats.
struct LambdaConditional {
  double shape;  // (eta + n_j)/2
  double rate;
};
struct MuConditional {
  double mean;
  double var_times_lambda;  // tau^2/(n tau^2 + 1); variance = this / lambda
};
LambdaConditional lambda_conditional(const FiniteMixtureSpec& spec, int j, int n_j,
                                     double ybar_j, double ss_j);
MuConditional mu_conditional(const FiniteMixtureSpec& spec, int j, int n_j, double ybar_j);

// One deterministic Gibbs sweep in the fixed order Z, Pi, (lambda_j, mu_j).
// Identical draws and input state reproduce the output bit for bit.
FiniteMixtureState gibbs_sweep_finite(const FiniteMixtureState& state, const Dataset& data,
                                      const FiniteMixtureSpec& spec, const RandomLedger& ledger,
                                      std::int64_t t);

// Draw (Pi, Theta) from their full conditionals given Z, consuming the
// same ledger positions the sweep would.
void draw_continuous_given_z(FiniteMixtureState& state, const Dataset& data,
                             const FiniteMixtureSpec& spec, const RandomLedger& ledger,
                             std::int64_t t);

// Log marginal likelihood of the members of one component with (Pi, Theta)
// integrated out; stats are (count, mean, within-ss) of the members. Handles
// the known-precision case and optional truncation of the mu prior.
double log_component_marginal(const FiniteMixtureSpec& spec, int j, int n_j, double ybar_j,
                              double ss_j);

// Collapsed full conditional of z_i given Z_{-i} (conjugate mode only):
// weight_j proportional to (n_j^{-i} + gamma_j) * m_j(y_i | other members).
SteppedCDF z_collapsed_conditional(int i, AllocationSummary& summary, const Dataset& data,
                                   const FiniteMixtureSpec& spec);

}  // namespace cftpmix

#endif  // CFTPMIX_MODEL_FINITE_HPP
