#ifndef CFTPMIX_MODEL_DP_HPP
#define CFTPMIX_MODEL_DP_HPP

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cftpmix/data.hpp"
#include "cftpmix/dist.hpp"
#include "cftpmix/model_finite.hpp"
#include "cftpmix/rng.hpp"
#include "cftpmix/stepped_cdf.hpp"

namespace cftpmix {

// Equal-weight mixture of M normal components whose parameters are draws
// from a Dirichlet process, so ties among them leave k <= M distinct
// components. Base measure:
//   lambda ~ Gamma(eta/2, zeta/2), mu | lambda ~ N(mu0, psi / lambda).
struct DPMixtureSpec {
  int M = 1;
  double eta = 1.0;
  double zeta = 1.0;
  double mu0 = 0.0;
  double psi = 1.0;

  bool alpha_random = false;
  double alpha = 1.0;  // fixed value when !alpha_random, initial value otherwise
  double a_alpha = 1.0;
  double b_alpha = 1.0;
  Interval alpha_bounds{0.0, 0.0};

  bool truncated = false;  // bounds on mu/lambda active (non-conjugate mode)
  Interval mu_bounds{0.0, 0.0};
  Interval lambda_bounds{0.0, 0.0};

  std::optional<double> lambda_known;  // shared fixed precision

  bool has_known_lambda() const { return lambda_known.has_value(); }
  void validate() const;
};

// Reparameterized state. Canonical labels s_j index the distinct parameter
// pairs in first-appearance order (s_0 = 0); the full parameter sequence is
// always read through (S, ThetaStar), never stored on its own.
struct DPState {
  std::vector<int> z;      // n allocations in {0, ..., M-1}
  std::vector<int> s;      // M canonical labels in {0, ..., k-1}
  int k = 1;
  std::vector<double> mu_star;      // size k
  std::vector<double> lambda_star;  // size k
  std::vector<int> c_ops;  // raw configuration draws of the last sweep
  double alpha = 1.0;

  double theta_mu(int j) const { return mu_star[static_cast<std::size_t>(s[static_cast<std::size_t>(j)])]; }
  double theta_lambda(int j) const {
    return lambda_star[static_cast<std::size_t>(s[static_cast<std::size_t>(j)])];
  }

  void validate(const DPMixtureSpec& spec, int n) const;
  bool operator==(const DPState&) const = default;
};

struct AuxComponent {
  double mu = 0.0;
  double lambda = 1.0;
};

// Aggregated statistics per distinct label: member count, weighted mean, and
// the posterior inputs of the distinct-parameter conditional.
class StarSummary {
 public:
  StarSummary(const AllocationSummary& slots, std::span<const int> s, int k,
              const DPMixtureSpec& spec);

  int k() const { return k_; }
  int n_star(int l) const { return n_[static_cast<std::size_t>(l)]; }
  double ybar_star(int l) const { return ybar_[static_cast<std::size_t>(l)]; }
  double eta_star(int l) const { return eta_[static_cast<std::size_t>(l)]; }
  double zeta_star(int l) const { return zeta_[static_cast<std::size_t>(l)]; }
  double mu0_star(int l) const { return mu0_[static_cast<std::size_t>(l)]; }
  double psi_star(int l) const { return psi_[static_cast<std::size_t>(l)]; }

  // Recomputes one label with the same fixed-order pass the constructor
  // uses, so refreshed values match a fresh construction exactly.
  void refresh(const AllocationSummary& slots, std::span<const int> s, int l,
               const DPMixtureSpec& spec);

 private:
  int k_;
  std::vector<int> n_;
  std::vector<double> ybar_, eta_, zeta_, mu0_, psi_;
};

// Full conditional of z_i over slots: pmf proportional to
// sqrt(lambda_j) exp(-lambda_j/2 (y_i - mu_j)^2), parameters read through S.
SteppedCDF z_full_conditional_dp(int i, const DPState& state, const Dataset& data);

// Per-occurrence log weight of an existing component for the configuration
// update of slot j, given that slot's data stats.
double log_occurrence_weight(int n_j, double ybar_j, double ss_j, double mu, double lambda);

// Normalizing constant q0 of the slot-j posterior base measure (conjugate
// mode; untruncated base measure required).
double log_q0(const DPMixtureSpec& spec, double alpha, int n_j, double ybar_j, double ss_j);

// Distinct components of S_{-j} in label order with their multiplicities.
struct OthersView {
  std::vector<int> labels;  // ascending label values present in S_{-j}
  std::vector<int> mult;    // occurrences in S_{-j}
  int k_j() const { return static_cast<int>(labels.size()); }
};
OthersView others_view(std::span<const int> s, int j);

// Conditional of c_j with the closed-form new-component weight; support
// {0..k_j}: the last cell opens a new component.
SteppedCDF c_full_conditional(int j, const DPState& state, const AllocationSummary& slots,
                              const Dataset& data, const DPMixtureSpec& spec);

// Non-conjugate variant: the new-component weight is evaluated at the
// auxiliary parameter instead of being integrated.
SteppedCDF c_full_conditional_aux(int j, const DPState& state, const AllocationSummary& slots,
                                  const AuxComponent& aux, const DPMixtureSpec& spec);

// Auxiliary component for slot j: a (truncated) base-measure draw when the
// slot shares its parameter, the slot's own distinct parameter when not.
AuxComponent aux_draw(int j, const DPState& state, const DPMixtureSpec& spec,
                      const RandomLedger& ledger, std::int64_t t);

// Distinct-parameter draw for label l: lambda* ~ Gamma(eta*, zeta*) then
// mu* ~ N(mu0*, psi*/lambda*), truncated in bounded mode.
std::pair<double, double> theta_star_draw(int l, const StarSummary& stars,
                                          const DPMixtureSpec& spec, const RandomLedger& ledger,
                                          std::int64_t t);

// Concentration-parameter update given the distinct count, by the usual
// beta-augmented mixture-of-gammas step, rejected onto the declared
// interval. Fixed-alpha specs return the fixed value.
double alpha_draw(double alpha_current, int k, const DPMixtureSpec& spec,
                  const RandomLedger& ledger, std::int64_t t);

// First-appearance canonical relabeling of a full parameter sequence given
// through (C, ThetaM). Equal configuration entries must carry equal
// parameters and vice versa.
struct Relabeling {
  std::vector<int> s;
  int k = 1;
  std::vector<double> mu_star;
  std::vector<double> lambda_star;
};
Relabeling relabel(std::span<const int> c, std::span<const double> mu_m,
                   std::span<const double> lambda_m);

// A configuration update expressed independently of any one chain's state.
struct CfgOp {
  enum Kind { JoinIndex, JoinSlot, Fresh } kind = Fresh;
  int value = 0;  // distinct-component index for JoinIndex, slot for JoinSlot
};

// Applies configuration operations slot by slot starting from an
// all-distinct sequence and returns the canonical labels of the result; the
// outcome depends only on the operations, not on the starting values.
std::pair<std::vector<int>, int> apply_config_ops(std::span<const CfgOp> ops);

// One deterministic Gibbs sweep in the order Z, (c_j, s_j)_j, Theta*, alpha.
// freeze_z skips the allocation update (the fixed-allocation reduction).
DPState dp_gibbs_sweep(const DPState& state, const Dataset& data, const DPMixtureSpec& spec,
                       const RandomLedger& ledger, std::int64_t t, bool conjugate,
                       bool freeze_z = false);

}  // namespace cftpmix

#endif  // CFTPMIX_MODEL_DP_HPP
