#ifndef CFTPMIX_HARNESS_HPP
#define CFTPMIX_HARNESS_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "cftpmix/model_dp.hpp"
#include "cftpmix/model_finite.hpp"

namespace cftpmix {

// Density evaluated on an even grid.
struct GridDensity {
  std::vector<double> x;
  std::vector<double> density;
  double bandwidth = 0.0;  // KDE only
};

inline constexpr int kComparisonGrid = 512;

double silverman_bandwidth(std::span<const double> sample);
GridDensity kde(std::span<const double> sample, int grid = kComparisonGrid);

// Total variation between two samples histogrammed on a fixed 512-bin grid
// over the pooled range.
double tv_on_grid(std::span<const double> a, std::span<const double> b);
double tv_on_grid_vs_curve(std::span<const double> sample, const GridDensity& curve);

double ks_two_sample(std::span<const double> a, std::span<const double> b);
double ks_vs_curve(std::span<const double> sample, const GridDensity& curve);
// Asymptotic critical values; alpha is the test level.
double ks_critical_two_sample(double alpha, std::size_t n, std::size_t m);
double ks_critical_one_sample(double alpha, std::size_t n);

enum class CompareStat { KS, TVGrid };
struct ComparisonResult {
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
};
ComparisonResult compare_distributions(std::span<const double> a, std::span<const double> b,
                                       CompareStat stat, double threshold);
ComparisonResult compare_distributions(std::span<const double> sample, const GridDensity& curve,
                                       CompareStat stat, double threshold);

// ---------------------------------------------------------------------------
// Exact posterior by allocation enumeration (conjugate structure, p^n small).
// ---------------------------------------------------------------------------

struct ExactPosterior {
  std::vector<double> allocation_weights;  // in odometer order over {0..p-1}^n
  GridDensity pi_marginal;                 // first-component mixing weight
  std::vector<GridDensity> mu_marginals;   // one per component
  double pi_mean = 0.0;
};

ExactPosterior oracle_exact_posterior(const Dataset& data, const FiniteMixtureSpec& spec,
                                      int grid = kComparisonGrid);

// ---------------------------------------------------------------------------
// Gibbs baselines.
// ---------------------------------------------------------------------------

struct GibbsOptions {
  std::int64_t burnin = 10000;
  std::int64_t keep = 1;
  std::int64_t thin = 1;
  bool independent_replicates = true;  // fresh chain per retained draw
  std::int64_t replicates = 1;         // retained draws in replicate mode
  std::uint64_t seed = 1;
};

std::vector<FiniteMixtureState> gibbs_baseline_finite(const Dataset& data,
                                                      const FiniteMixtureSpec& spec,
                                                      const GibbsOptions& options);
std::vector<DPState> gibbs_baseline_dp(const Dataset& data, const DPMixtureSpec& spec,
                                       const GibbsOptions& options);

// Deterministic initial states shared by baselines and forward completion.
FiniteMixtureState initial_state_finite(const FiniteMixtureSpec& spec, const Dataset& data);
DPState initial_state_dp(const DPMixtureSpec& spec, const Dataset& data);

// One forward ledger exposing sweeps 1..N as times -1..-N.
class ForwardChain {
 public:
  ForwardChain(std::uint64_t seed, std::int64_t sweeps);
  RandomLedger& ledger() { return ledger_; }
  std::int64_t time_of_sweep(std::int64_t sweep) const { return -sweep; }

 private:
  RandomLedger ledger_;
};

// ---------------------------------------------------------------------------
// Pilot bound elicitation.
// ---------------------------------------------------------------------------

struct PilotResult {
  std::vector<Interval> mu;      // per component (finite) or shared (dp, size 1)
  std::vector<Interval> lambda;  // likewise
  Interval alpha{0.0, 0.0};      // dp with random alpha
  // Density agreement between the bounded re-run and the unbounded run
  // (TV on the pooled-mu sample); negative when refinement was skipped.
  double agreement_tv = -1.0;
};

PilotResult pilot_bounds_finite(const Dataset& data, const FiniteMixtureSpec& unbounded_spec,
                                std::int64_t sweeps, std::uint64_t seed, bool refine = false);
PilotResult pilot_bounds_dp(const Dataset& data, const DPMixtureSpec& unbounded_spec,
                            std::int64_t sweeps, std::uint64_t seed, bool refine = false);

}  // namespace cftpmix

#endif  // CFTPMIX_HARNESS_HPP
