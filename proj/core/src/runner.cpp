#include "cftpmix/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace cftpmix {

std::uint64_t replicate_seed(std::uint64_t base, std::int64_t replicate) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(replicate) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void parallel_for_replicates(std::int64_t count, int workers,
                             const std::function<void(std::int64_t)>& job) {
  if (count <= 0) return;
  workers = static_cast<int>(std::max<std::int64_t>(1, std::min<std::int64_t>(workers, count)));
  if (workers == 1) {
    for (std::int64_t r = 0; r < count; ++r) job(r);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      std::int64_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        job(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

RunOutputs run_perfect_replicates(const RunConfig& config, const Dataset& data) {
  config.validate();
  RunOutputs out;
  if (config.model == ModelKind::Dp) {
    out.dp_samples.resize(static_cast<std::size_t>(config.replicates));
    parallel_for_replicates(config.replicates, config.workers, [&](std::int64_t r) {
      RandomLedger ledger(replicate_seed(config.seed, r));
      out.dp_samples[static_cast<std::size_t>(r)] =
          run_cftp_dp(data, config.dp, ledger, config.cftp);
    });
  } else {
    out.finite_samples.resize(static_cast<std::size_t>(config.replicates));
    parallel_for_replicates(config.replicates, config.workers, [&](std::int64_t r) {
      RandomLedger ledger(replicate_seed(config.seed, r));
      out.finite_samples[static_cast<std::size_t>(r)] =
          config.model == ModelKind::FiniteTwoComp
              ? run_cftp_two_component(data, config.finite, ledger, config.cftp)
              : run_cftp_known(data, config.finite, ledger, config.cftp);
    });
  }
  return out;
}

RunOutputs run_gibbs_baseline(const RunConfig& config, const Dataset& data) {
  config.validate();
  RunOutputs out;
  GibbsOptions opt;
  opt.burnin = config.burnin;
  opt.keep = config.keep;
  opt.thin = config.thin;
  opt.independent_replicates = config.independent_replicates;
  opt.seed = config.seed;

  if (config.model == ModelKind::Dp) {
    DPMixtureSpec spec = config.dp;
    if (!config.gibbs_bounded) spec.truncated = false;
    std::vector<DPState> states;
    if (opt.independent_replicates) {
      states.resize(static_cast<std::size_t>(config.replicates));
      parallel_for_replicates(config.replicates, config.workers, [&](std::int64_t r) {
        GibbsOptions one = opt;
        one.replicates = 1;
        one.seed = replicate_seed(config.seed, r);
        states[static_cast<std::size_t>(r)] = gibbs_baseline_dp(data, spec, one).front();
      });
    } else {
      states = gibbs_baseline_dp(data, spec, opt);
    }
    out.dp_samples.resize(states.size());
    for (std::size_t r = 0; r < states.size(); ++r) out.dp_samples[r].state = std::move(states[r]);
  } else {
    FiniteMixtureSpec spec = config.finite;
    if (!config.gibbs_bounded) {
      spec.mu_bounds.clear();
      spec.lambda_bounds.clear();
      spec.pi_bounds.clear();
    }
    std::vector<FiniteMixtureState> states;
    if (opt.independent_replicates) {
      states.resize(static_cast<std::size_t>(config.replicates));
      parallel_for_replicates(config.replicates, config.workers, [&](std::int64_t r) {
        GibbsOptions one = opt;
        one.replicates = 1;
        one.seed = replicate_seed(config.seed, r);
        states[static_cast<std::size_t>(r)] = gibbs_baseline_finite(data, spec, one).front();
      });
    } else {
      states = gibbs_baseline_finite(data, spec, opt);
    }
    out.finite_samples.resize(states.size());
    for (std::size_t r = 0; r < states.size(); ++r)
      out.finite_samples[r].state = std::move(states[r]);
  }
  return out;
}

std::vector<double> mixture_density(const FiniteMixtureState& state, const std::vector<double>& x) {
  std::vector<double> d(x.size(), 0.0);
  for (std::size_t j = 0; j < state.pi.size(); ++j) {
    double sd = 1.0 / std::sqrt(state.lambda[j]);
    for (std::size_t g = 0; g < x.size(); ++g)
      d[g] += state.pi[j] * std::exp(log_normal_density(x[g], state.mu[j], sd));
  }
  return d;
}

std::vector<double> mixture_density(const DPState& state, const std::vector<double>& x) {
  std::vector<double> d(x.size(), 0.0);
  const int M = static_cast<int>(state.s.size());
  for (int j = 0; j < M; ++j) {
    double sd = 1.0 / std::sqrt(state.theta_lambda(j));
    for (std::size_t g = 0; g < x.size(); ++g)
      d[g] += std::exp(log_normal_density(x[g], state.theta_mu(j), sd)) / M;
  }
  return d;
}

namespace {

std::vector<double> predictive_grid(const Dataset& data) {
  auto [mn, mx] = std::minmax_element(data.y.begin(), data.y.end());
  double pad = 0.25 * std::max(*mx - *mn, 1e-6);
  double lo = *mn - pad, hi = *mx + pad;
  std::vector<double> x(static_cast<std::size_t>(kComparisonGrid));
  for (int g = 0; g < kComparisonGrid; ++g)
    x[static_cast<std::size_t>(g)] = lo + (hi - lo) * g / (kComparisonGrid - 1);
  return x;
}

}  // namespace

PredictiveCurve predictive_from_finite(const std::vector<FiniteMixtureState>& states,
                                       const Dataset& data) {
  if (states.empty()) throw usage_error("predictive: no states");
  PredictiveCurve out;
  out.x = predictive_grid(data);
  out.density.assign(out.x.size(), 0.0);
  for (const auto& st : states) {
    std::vector<double> d = mixture_density(st, out.x);
    for (std::size_t g = 0; g < d.size(); ++g) out.density[g] += d[g] / states.size();
  }
  return out;
}

PredictiveCurve predictive_from_dp(const std::vector<DPState>& states, const Dataset& data) {
  if (states.empty()) throw usage_error("predictive: no states");
  PredictiveCurve out;
  out.x = predictive_grid(data);
  out.density.assign(out.x.size(), 0.0);
  for (const auto& st : states) {
    std::vector<double> d = mixture_density(st, out.x);
    for (std::size_t g = 0; g < d.size(); ++g) out.density[g] += d[g] / states.size();
  }
  return out;
}

std::vector<double> k_distribution(const std::vector<DPState>& states, int M) {
  std::vector<double> probs(static_cast<std::size_t>(M), 0.0);
  if (states.empty()) return probs;
  for (const auto& st : states) {
    if (st.k < 1 || st.k > M) throw invariant_violation_error("k outside {1..M}");
    probs[static_cast<std::size_t>(st.k - 1)] += 1.0;
  }
  for (double& p : probs) p /= static_cast<double>(states.size());
  return probs;
}

std::vector<DPState> perfect_then_forward(const RunConfig& config, const Dataset& data,
                                          std::int64_t draws) {
  if (config.model != ModelKind::Dp) throw usage_error("chain-mode predictive is for dp runs");
  RandomLedger ledger(replicate_seed(config.seed, 0));
  DpPerfectSample ps = run_cftp_dp(data, config.dp, ledger, config.cftp);
  std::vector<DPState> states;
  states.reserve(static_cast<std::size_t>(draws) + 1);
  states.push_back(ps.state);
  ForwardChain chain(replicate_seed(config.seed, 1), draws);
  DPState st = ps.state;
  for (std::int64_t d = 1; d <= draws; ++d) {
    st = dp_gibbs_sweep(st, data, config.dp, chain.ledger(), chain.time_of_sweep(d),
                        /*conjugate=*/!config.dp.truncated);
    states.push_back(st);
  }
  return states;
}

}  // namespace cftpmix
