#ifndef CFTPMIX_RUNNER_HPP
#define CFTPMIX_RUNNER_HPP

#include <functional>

#include "cftpmix/io.hpp"

namespace cftpmix {

// Replicate r always runs with replicate_seed(base, r), so results depend
// only on (config, base seed), never on scheduling.
std::uint64_t replicate_seed(std::uint64_t base, std::int64_t replicate);

// Runs `count` jobs indexed 0..count-1 over a worker pool; results land by
// index in whatever the job writes.
void parallel_for_replicates(std::int64_t count, int workers,
                             const std::function<void(std::int64_t)>& job);

// N i.i.d. perfect replicates of the configured model.
RunOutputs run_perfect_replicates(const RunConfig& config, const Dataset& data);

// Gibbs baseline draws of the configured model, parallel over independent
// replicates.
RunOutputs run_gibbs_baseline(const RunConfig& config, const Dataset& data);

// Mixture density of a state on a grid; the predictive table averages it
// over retained draws.
std::vector<double> mixture_density(const FiniteMixtureState& state, const std::vector<double>& x);
std::vector<double> mixture_density(const DPState& state, const std::vector<double>& x);

struct PredictiveCurve {
  std::vector<double> x;
  std::vector<double> density;
};
PredictiveCurve predictive_from_finite(const std::vector<FiniteMixtureState>& states,
                                       const Dataset& data);
PredictiveCurve predictive_from_dp(const std::vector<DPState>& states, const Dataset& data);

// Distinct-count posterior over {1..M}.
std::vector<double> k_distribution(const std::vector<DPState>& states, int M);

// One perfect sample, then `draws` forward sweeps appended (the chain-mode
// predictive protocol for unknown-k runs).
std::vector<DPState> perfect_then_forward(const RunConfig& config, const Dataset& data,
                                          std::int64_t draws);

}  // namespace cftpmix

#endif  // CFTPMIX_RUNNER_HPP
