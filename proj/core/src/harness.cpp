#include "cftpmix/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cftpmix {

namespace {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int epochs_for(std::int64_t sweeps) {
  int j = 1;
  while ((std::int64_t{1} << j) - 1 < sweeps) ++j;
  return j;
}

}  // namespace

double silverman_bandwidth(std::span<const double> sample) {
  if (sample.size() < 2) return 1.0;
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
  double var = 0.0;
  for (double v : sorted) var += (v - mean) * (v - mean);
  var /= (sorted.size() - 1);
  double sd = std::sqrt(var);
  auto quantile = [&](double q) {
    double pos = q * (sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - lo;
    return lo + 1 < sorted.size() ? sorted[lo] * (1 - frac) + sorted[lo + 1] * frac : sorted[lo];
  };
  double iqr = quantile(0.75) - quantile(0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
  return 0.9 * spread * std::pow(static_cast<double>(sorted.size()), -0.2);
}

GridDensity kde(std::span<const double> sample, int grid) {
  if (sample.empty()) throw usage_error("kde: empty sample");
  double h = silverman_bandwidth(sample);
  auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
  double lo = *mn - 3.0 * h, hi = *mx + 3.0 * h;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  GridDensity out;
  out.bandwidth = h;
  out.x.resize(static_cast<std::size_t>(grid));
  out.density.assign(static_cast<std::size_t>(grid), 0.0);
  double dx = (hi - lo) / (grid - 1);
  for (int g = 0; g < grid; ++g) out.x[static_cast<std::size_t>(g)] = lo + g * dx;
  const double norm = 1.0 / (sample.size() * h * std::sqrt(2.0 * M_PI));
  for (double v : sample) {
    // Kernel support truncated at 6 bandwidths.
    int g0 = std::max(0, static_cast<int>((v - 6.0 * h - lo) / dx));
    int g1 = std::min(grid - 1, static_cast<int>((v + 6.0 * h - lo) / dx) + 1);
    for (int g = g0; g <= g1; ++g) {
      double zscore = (out.x[static_cast<std::size_t>(g)] - v) / h;
      out.density[static_cast<std::size_t>(g)] += norm * std::exp(-0.5 * zscore * zscore);
    }
  }
  return out;
}

namespace {

std::vector<double> histogram_mass(std::span<const double> sample, double lo, double hi, int bins) {
  std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
  if (sample.empty()) return mass;
  double width = hi - lo;
  for (double v : sample) {
    int b = width > 0.0 ? static_cast<int>((v - lo) / width * bins) : 0;
    b = std::clamp(b, 0, bins - 1);
    mass[static_cast<std::size_t>(b)] += 1.0;
  }
  for (double& m : mass) m /= static_cast<double>(sample.size());
  return mass;
}

std::vector<double> curve_mass(const GridDensity& curve, double lo, double hi, int bins) {
  // Integrate the tabulated density into the bins by midpoint evaluation on
  // a refinement of the curve grid, then renormalize.
  std::vector<double> mass(static_cast<std::size_t>(bins), 0.0);
  if (curve.x.size() < 2) throw usage_error("curve must have at least two grid points");
  for (std::size_t g = 0; g + 1 < curve.x.size(); ++g) {
    double xm = 0.5 * (curve.x[g] + curve.x[g + 1]);
    double seg = (curve.x[g + 1] - curve.x[g]) * 0.5 * (curve.density[g] + curve.density[g + 1]);
    int b = hi > lo ? static_cast<int>((xm - lo) / (hi - lo) * bins) : 0;
    b = std::clamp(b, 0, bins - 1);
    mass[static_cast<std::size_t>(b)] += seg;
  }
  double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (!(total > 0.0)) throw numerical_degeneracy_error("curve mass vanished on the grid");
  for (double& m : mass) m /= total;
  return mass;
}

}  // namespace

double tv_on_grid(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw usage_error("tv_on_grid: empty input");
  double lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
  double hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
  if (!(hi > lo)) return 0.0;
  std::vector<double> ma = histogram_mass(a, lo, hi, kComparisonGrid);
  std::vector<double> mb = histogram_mass(b, lo, hi, kComparisonGrid);
  double tv = 0.0;
  for (int g = 0; g < kComparisonGrid; ++g)
    tv += std::abs(ma[static_cast<std::size_t>(g)] - mb[static_cast<std::size_t>(g)]);
  return 0.5 * tv;
}

double tv_on_grid_vs_curve(std::span<const double> sample, const GridDensity& curve) {
  if (sample.empty()) throw usage_error("tv_on_grid_vs_curve: empty sample");
  double lo = std::min(*std::min_element(sample.begin(), sample.end()), curve.x.front());
  double hi = std::max(*std::max_element(sample.begin(), sample.end()), curve.x.back());
  std::vector<double> ms = histogram_mass(sample, lo, hi, kComparisonGrid);
  std::vector<double> mc = curve_mass(curve, lo, hi, kComparisonGrid);
  double tv = 0.0;
  for (int g = 0; g < kComparisonGrid; ++g)
    tv += std::abs(ms[static_cast<std::size_t>(g)] - mc[static_cast<std::size_t>(g)]);
  return 0.5 * tv;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw usage_error("ks_two_sample: empty input");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double d = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < sa.size() && ib < sb.size()) {
    double v = std::min(sa[ia], sb[ib]);
    while (ia < sa.size() && sa[ia] <= v) ++ia;
    while (ib < sb.size() && sb[ib] <= v) ++ib;
    d = std::max(d, std::abs(static_cast<double>(ia) / sa.size() -
                             static_cast<double>(ib) / sb.size()));
  }
  return d;
}

double ks_vs_curve(std::span<const double> sample, const GridDensity& curve) {
  if (sample.empty()) throw usage_error("ks_vs_curve: empty sample");
  // CDF of the curve by trapezoid accumulation.
  std::vector<double> cdf(curve.x.size(), 0.0);
  for (std::size_t g = 1; g < curve.x.size(); ++g)
    cdf[g] = cdf[g - 1] +
             (curve.x[g] - curve.x[g - 1]) * 0.5 * (curve.density[g] + curve.density[g - 1]);
  double total = cdf.back();
  if (!(total > 0.0)) throw numerical_degeneracy_error("curve mass vanished");
  for (double& c : cdf) c /= total;
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  auto curve_cdf = [&](double x) {
    if (x <= curve.x.front()) return 0.0;
    if (x >= curve.x.back()) return 1.0;
    std::size_t g = static_cast<std::size_t>(
        std::lower_bound(curve.x.begin(), curve.x.end(), x) - curve.x.begin());
    double x0 = curve.x[g - 1], x1 = curve.x[g];
    double f = (x - x0) / (x1 - x0);
    return cdf[g - 1] * (1 - f) + cdf[g] * f;
  };
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double F = curve_cdf(s[i]);
    d = std::max(d, std::abs(F - static_cast<double>(i) / s.size()));
    d = std::max(d, std::abs(F - static_cast<double>(i + 1) / s.size()));
  }
  return d;
}

namespace {

double ks_coefficient(double alpha) {
  // c(alpha) = sqrt(-ln(alpha/2)/2)
  return std::sqrt(-0.5 * std::log(0.5 * alpha));
}

}  // namespace

double ks_critical_two_sample(double alpha, std::size_t n, std::size_t m) {
  return ks_coefficient(alpha) * std::sqrt(static_cast<double>(n + m) /
                                           (static_cast<double>(n) * static_cast<double>(m)));
}

double ks_critical_one_sample(double alpha, std::size_t n) {
  return ks_coefficient(alpha) / std::sqrt(static_cast<double>(n));
}

ComparisonResult compare_distributions(std::span<const double> a, std::span<const double> b,
                                       CompareStat stat, double threshold) {
  ComparisonResult out;
  out.threshold = threshold;
  out.statistic = stat == CompareStat::KS ? ks_two_sample(a, b) : tv_on_grid(a, b);
  out.pass = out.statistic < threshold;
  return out;
}

ComparisonResult compare_distributions(std::span<const double> sample, const GridDensity& curve,
                                       CompareStat stat, double threshold) {
  ComparisonResult out;
  out.threshold = threshold;
  out.statistic =
      stat == CompareStat::KS ? ks_vs_curve(sample, curve) : tv_on_grid_vs_curve(sample, curve);
  out.pass = out.statistic < threshold;
  return out;
}

// ---------------------------------------------------------------------------
// Exact posterior oracle.
// ---------------------------------------------------------------------------

ExactPosterior oracle_exact_posterior(const Dataset& data, const FiniteMixtureSpec& spec,
                                      int grid) {
  data.validate();
  spec.validate();
  const int n = data.n(), p = spec.p;
  double state_count = std::pow(static_cast<double>(p), n);
  if (state_count > 65536.0)
    throw usage_error("oracle_exact_posterior: p^n too large to enumerate");
  if (!spec.pi_bounds.empty() && p != 2)
    throw usage_error("oracle_exact_posterior: weight truncation handled for p=2 only");

  const int total = static_cast<int>(state_count);
  double gamma_sum = std::accumulate(spec.gamma.begin(), spec.gamma.end(), 0.0);

  std::vector<double> log_w(static_cast<std::size_t>(total));
  std::vector<int> z(static_cast<std::size_t>(n), 0);
  AllocationSummary summary(data, z, p);
  for (int idx = 0;; ++idx) {
    double lw = -std::lgamma(gamma_sum + n);
    for (int j = 0; j < p; ++j) {
      lw += std::lgamma(spec.gamma[static_cast<std::size_t>(j)] + summary.count(j));
      lw += log_component_marginal(spec, j, summary.count(j), summary.mean(j), summary.ss(j));
    }
    if (!spec.pi_bounds.empty()) {
      // Truncated Dirichlet normalizer for p = 2 via the incomplete beta.
      double a = spec.gamma[0] + summary.count(0), b = spec.gamma[1] + summary.count(1);
      double m_hi = reg_inc_beta(a, b, spec.pi_bounds[0].hi);
      double m_lo = reg_inc_beta(a, b, spec.pi_bounds[0].lo);
      double mass = m_hi - m_lo;
      if (!(mass > 0.0)) mass = 1e-300;
      lw += std::log(mass);
    }
    log_w[static_cast<std::size_t>(idx)] = lw;
    // Odometer advance.
    int pos = 0;
    while (pos < n) {
      int cur = summary.z()[static_cast<std::size_t>(pos)];
      if (cur + 1 < p) {
        summary.set_allocation(pos, cur + 1);
        break;
      }
      summary.set_allocation(pos, 0);
      ++pos;
    }
    if (pos == n) break;
  }

  double lmax = *std::max_element(log_w.begin(), log_w.end());
  double lsum = 0.0;
  for (double lw : log_w) lsum += std::exp(lw - lmax);
  ExactPosterior out;
  out.allocation_weights.resize(static_cast<std::size_t>(total));
  for (int idx = 0; idx < total; ++idx)
    out.allocation_weights[static_cast<std::size_t>(idx)] =
        std::exp(log_w[static_cast<std::size_t>(idx)] - lmax) / lsum;

  // Marginal densities as weight-mixtures of per-allocation conditionals.
  auto stats_of = [&](int idx) {
    std::vector<int> zz(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      zz[static_cast<std::size_t>(i)] = idx % p;
      idx /= p;
    }
    return AllocationSummary(data, zz, p);
  };

  // pi grid over its (possibly truncated) support.
  double pi_lo = spec.pi_bounds.empty() ? 0.0 : spec.pi_bounds[0].lo;
  double pi_hi = spec.pi_bounds.empty() ? 1.0 : spec.pi_bounds[0].hi;
  out.pi_marginal.x.resize(static_cast<std::size_t>(grid));
  out.pi_marginal.density.assign(static_cast<std::size_t>(grid), 0.0);
  for (int g = 0; g < grid; ++g)
    out.pi_marginal.x[static_cast<std::size_t>(g)] =
        pi_lo + (pi_hi - pi_lo) * (g + 0.5) / grid;

  out.mu_marginals.assign(static_cast<std::size_t>(p), {});
  std::vector<double> mu_lo(static_cast<std::size_t>(p)), mu_hi(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (spec.bounded()) {
      mu_lo[ju] = spec.mu_bounds[ju].lo;
      mu_hi[ju] = spec.mu_bounds[ju].hi;
    } else {
      double spread = 4.0 * spec.tau[ju] / std::sqrt(spec.has_known_lambda()
                                                         ? spec.lambda_known[ju]
                                                         : spec.eta / spec.zeta);
      auto [mn, mx] = std::minmax_element(data.y.begin(), data.y.end());
      mu_lo[ju] = std::min(*mn, spec.xi[ju]) - spread;
      mu_hi[ju] = std::max(*mx, spec.xi[ju]) + spread;
    }
    out.mu_marginals[ju].x.resize(static_cast<std::size_t>(grid));
    out.mu_marginals[ju].density.assign(static_cast<std::size_t>(grid), 0.0);
    for (int g = 0; g < grid; ++g)
      out.mu_marginals[ju].x[static_cast<std::size_t>(g)] =
          mu_lo[ju] + (mu_hi[ju] - mu_lo[ju]) * (g + 0.5) / grid;
  }

  out.pi_mean = 0.0;
  for (int idx = 0; idx < total; ++idx) {
    double w = out.allocation_weights[static_cast<std::size_t>(idx)];
    if (w < 1e-14) continue;
    AllocationSummary st = stats_of(idx);

    // pi | Z ~ Dirichlet(n + gamma), first coordinate Beta; truncated mass
    // renormalized on the box.
    double a = spec.gamma[0] + st.count(0);
    double b = gamma_sum - spec.gamma[0] + (n - st.count(0));
    double norm = 1.0;
    if (!spec.pi_bounds.empty())
      norm = std::max(reg_inc_beta(a, b, pi_hi) - reg_inc_beta(a, b, pi_lo), 1e-300);
    double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    for (int g = 0; g < grid; ++g) {
      double x = out.pi_marginal.x[static_cast<std::size_t>(g)];
      if (x <= 0.0 || x >= 1.0) continue;
      double ld = lbeta + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
      out.pi_marginal.density[static_cast<std::size_t>(g)] += w * std::exp(ld) / norm;
    }
    out.pi_mean += w * (spec.pi_bounds.empty()
                            ? a / (a + b)
                            : a / (a + b) *
                                  (reg_inc_beta(a + 1, b, pi_hi) - reg_inc_beta(a + 1, b, pi_lo)) /
                                  norm);

    for (int j = 0; j < p; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      MuConditional mc = mu_conditional(spec, j, st.count(j), st.mean(j));
      if (spec.has_known_lambda()) {
        double sd = std::sqrt(mc.var_times_lambda / spec.lambda_known[ju]);
        double trunc = 1.0;
        if (spec.bounded())
          trunc = std::max(std_normal_cdf((mu_hi[ju] - mc.mean) / sd) -
                               std_normal_cdf((mu_lo[ju] - mc.mean) / sd),
                           1e-300);
        for (int g = 0; g < grid; ++g) {
          double x = out.mu_marginals[ju].x[static_cast<std::size_t>(g)];
          out.mu_marginals[ju].density[static_cast<std::size_t>(g)] +=
              w * std::exp(log_normal_density(x, mc.mean, sd)) / trunc;
        }
      } else {
        // Location-scale t with eta + n_j degrees of freedom.
        LambdaConditional lc = lambda_conditional(spec, j, st.count(j), st.mean(j), st.ss(j));
        double df = 2.0 * lc.shape;
        double scale2 = (lc.rate / lc.shape) * mc.var_times_lambda;
        double lnorm = std::lgamma(0.5 * (df + 1.0)) - std::lgamma(0.5 * df) -
                       0.5 * std::log(df * M_PI * scale2);
        for (int g = 0; g < grid; ++g) {
          double x = out.mu_marginals[ju].x[static_cast<std::size_t>(g)];
          double zsc = (x - mc.mean) * (x - mc.mean) / scale2;
          out.mu_marginals[ju].density[static_cast<std::size_t>(g)] +=
              w * std::exp(lnorm - 0.5 * (df + 1.0) * std::log1p(zsc / df));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gibbs baselines.
// ---------------------------------------------------------------------------

ForwardChain::ForwardChain(std::uint64_t seed, std::int64_t sweeps) : ledger_(seed) {
  int j = epochs_for(sweeps);
  for (int e = 1; e <= j; ++e) ledger_.extend_epoch(e);
}

FiniteMixtureState initial_state_finite(const FiniteMixtureSpec& spec, const Dataset& data) {
  FiniteMixtureState st;
  st.z.resize(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) st.z[static_cast<std::size_t>(i)] = i % spec.p;
  st.pi.assign(static_cast<std::size_t>(spec.p), 1.0 / spec.p);
  st.mu.resize(static_cast<std::size_t>(spec.p));
  st.lambda.resize(static_cast<std::size_t>(spec.p));
  for (int j = 0; j < spec.p; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    st.mu[ju] = spec.bounded() ? spec.mu_bounds[ju].clamp(spec.xi[ju]) : spec.xi[ju];
    double lam = spec.has_known_lambda() ? spec.lambda_known[ju] : spec.eta / spec.zeta;
    st.lambda[ju] =
        (spec.bounded() && !spec.has_known_lambda()) ? spec.lambda_bounds[ju].clamp(lam) : lam;
  }
  return st;
}

DPState initial_state_dp(const DPMixtureSpec& spec, const Dataset& data) {
  DPState st;
  st.z.resize(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) st.z[static_cast<std::size_t>(i)] = i % spec.M;
  st.s.resize(static_cast<std::size_t>(spec.M));
  for (int j = 0; j < spec.M; ++j) st.s[static_cast<std::size_t>(j)] = j;
  st.k = spec.M;
  st.c_ops.assign(static_cast<std::size_t>(spec.M), 0);
  st.mu_star.resize(static_cast<std::size_t>(spec.M));
  st.lambda_star.resize(static_cast<std::size_t>(spec.M));
  auto [mn, mx] = std::minmax_element(data.y.begin(), data.y.end());
  double lo = spec.truncated ? spec.mu_bounds.lo : *mn;
  double hi = spec.truncated ? spec.mu_bounds.hi : *mx;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  for (int j = 0; j < spec.M; ++j)
    st.mu_star[static_cast<std::size_t>(j)] = lo + (hi - lo) * (j + 0.5) / spec.M;
  double lam = spec.has_known_lambda() ? *spec.lambda_known : spec.eta / spec.zeta;
  if (spec.truncated && !spec.has_known_lambda()) lam = spec.lambda_bounds.clamp(lam);
  std::fill(st.lambda_star.begin(), st.lambda_star.end(), lam);
  st.alpha = spec.alpha_random ? spec.alpha_bounds.clamp(spec.alpha) : spec.alpha;
  return st;
}

std::vector<FiniteMixtureState> gibbs_baseline_finite(const Dataset& data,
                                                      const FiniteMixtureSpec& spec,
                                                      const GibbsOptions& options) {
  data.validate();
  spec.validate();
  std::vector<FiniteMixtureState> kept;
  if (options.keep <= 0 && options.replicates <= 0) return kept;
  auto run_chain = [&](std::uint64_t seed, std::int64_t burnin, std::int64_t draws,
                       std::int64_t thin) {
    std::int64_t sweeps = burnin + draws * thin;
    ForwardChain chain(seed, sweeps);
    FiniteMixtureState st = initial_state_finite(spec, data);
    std::int64_t sweep = 0;
    for (std::int64_t b = 0; b < burnin; ++b)
      st = gibbs_sweep_finite(st, data, spec, chain.ledger(), chain.time_of_sweep(++sweep));
    for (std::int64_t d = 0; d < draws; ++d) {
      for (std::int64_t s = 0; s < thin; ++s)
        st = gibbs_sweep_finite(st, data, spec, chain.ledger(), chain.time_of_sweep(++sweep));
      kept.push_back(st);
    }
  };
  if (options.independent_replicates) {
    for (std::int64_t r = 0; r < options.replicates; ++r)
      run_chain(mix_seed(options.seed, static_cast<std::uint64_t>(r)), options.burnin, 1, 1);
  } else {
    run_chain(options.seed, options.burnin, options.keep, options.thin);
  }
  return kept;
}

std::vector<DPState> gibbs_baseline_dp(const Dataset& data, const DPMixtureSpec& spec,
                                       const GibbsOptions& options) {
  data.validate();
  spec.validate();
  const bool conjugate = !spec.truncated;
  std::vector<DPState> kept;
  auto run_chain = [&](std::uint64_t seed, std::int64_t burnin, std::int64_t draws,
                       std::int64_t thin) {
    std::int64_t sweeps = burnin + draws * thin;
    ForwardChain chain(seed, sweeps);
    DPState st = initial_state_dp(spec, data);
    std::int64_t sweep = 0;
    for (std::int64_t b = 0; b < burnin; ++b)
      st = dp_gibbs_sweep(st, data, spec, chain.ledger(), chain.time_of_sweep(++sweep), conjugate);
    for (std::int64_t d = 0; d < draws; ++d) {
      for (std::int64_t s = 0; s < thin; ++s)
        st = dp_gibbs_sweep(st, data, spec, chain.ledger(), chain.time_of_sweep(++sweep), conjugate);
      kept.push_back(st);
    }
  };
  if (options.independent_replicates) {
    for (std::int64_t r = 0; r < options.replicates; ++r)
      run_chain(mix_seed(options.seed, static_cast<std::uint64_t>(r)), options.burnin, 1, 1);
  } else {
    run_chain(options.seed, options.burnin, options.keep, options.thin);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Pilot bound elicitation.
// ---------------------------------------------------------------------------

namespace {

Interval widened(double lo, double hi) {
  double pad = 0.1 * (hi - lo);
  if (!(pad > 0.0)) pad = 0.1 * std::max(std::abs(lo), 1.0);
  return {lo - pad, hi + pad};
}

}  // namespace

PilotResult pilot_bounds_finite(const Dataset& data, const FiniteMixtureSpec& unbounded_spec,
                                std::int64_t sweeps, std::uint64_t seed, bool refine) {
  if (unbounded_spec.bounded()) throw usage_error("pilot needs the unbounded spec");
  GibbsOptions opt;
  opt.independent_replicates = false;
  opt.burnin = std::max<std::int64_t>(sweeps / 5, 10);
  opt.keep = sweeps;
  opt.seed = seed;
  std::vector<FiniteMixtureState> draws = gibbs_baseline_finite(data, unbounded_spec, opt);

  PilotResult out;
  const int p = unbounded_spec.p;
  out.mu.resize(static_cast<std::size_t>(p));
  out.lambda.resize(static_cast<std::size_t>(p));
  std::vector<double> pooled_mu;
  for (int j = 0; j < p; ++j) {
    double mu_lo = 1e308, mu_hi = -1e308, la_lo = 1e308, la_hi = -1e308;
    for (const auto& st : draws) {
      if (!std::isfinite(st.mu[static_cast<std::size_t>(j)]))
        throw numerical_degeneracy_error("pilot produced a non-finite draw");
      mu_lo = std::min(mu_lo, st.mu[static_cast<std::size_t>(j)]);
      mu_hi = std::max(mu_hi, st.mu[static_cast<std::size_t>(j)]);
      la_lo = std::min(la_lo, st.lambda[static_cast<std::size_t>(j)]);
      la_hi = std::max(la_hi, st.lambda[static_cast<std::size_t>(j)]);
      pooled_mu.push_back(st.mu[static_cast<std::size_t>(j)]);
    }
    out.mu[static_cast<std::size_t>(j)] = widened(mu_lo, mu_hi);
    Interval li = widened(la_lo, la_hi);
    li.lo = std::max(li.lo, 1e-8);
    out.lambda[static_cast<std::size_t>(j)] = li;
  }

  if (refine) {
    FiniteMixtureSpec bounded = unbounded_spec;
    bounded.mu_bounds = out.mu;
    if (!bounded.has_known_lambda()) bounded.lambda_bounds = out.lambda;
    std::vector<FiniteMixtureState> re = gibbs_baseline_finite(data, bounded, opt);
    std::vector<double> pooled_re;
    for (const auto& st : re)
      for (double m : st.mu) pooled_re.push_back(m);
    out.agreement_tv = tv_on_grid(pooled_mu, pooled_re);
  }
  return out;
}

PilotResult pilot_bounds_dp(const Dataset& data, const DPMixtureSpec& unbounded_spec,
                            std::int64_t sweeps, std::uint64_t seed, bool refine) {
  if (unbounded_spec.truncated) throw usage_error("pilot needs the untruncated spec");
  GibbsOptions opt;
  opt.independent_replicates = false;
  opt.burnin = std::max<std::int64_t>(sweeps / 5, 10);
  opt.keep = sweeps;
  opt.seed = seed;
  std::vector<DPState> draws = gibbs_baseline_dp(data, unbounded_spec, opt);

  double mu_lo = 1e308, mu_hi = -1e308, la_lo = 1e308, la_hi = -1e308;
  double al_lo = 1e308, al_hi = -1e308;
  std::vector<double> pooled_mu;
  for (const auto& st : draws) {
    for (int l = 0; l < st.k; ++l) {
      double m = st.mu_star[static_cast<std::size_t>(l)];
      double la = st.lambda_star[static_cast<std::size_t>(l)];
      if (!std::isfinite(m) || !std::isfinite(la))
        throw numerical_degeneracy_error("pilot produced a non-finite draw");
      mu_lo = std::min(mu_lo, m);
      mu_hi = std::max(mu_hi, m);
      la_lo = std::min(la_lo, la);
      la_hi = std::max(la_hi, la);
      pooled_mu.push_back(m);
    }
    al_lo = std::min(al_lo, st.alpha);
    al_hi = std::max(al_hi, st.alpha);
  }
  PilotResult out;
  out.mu = {widened(mu_lo, mu_hi)};
  Interval li = widened(la_lo, la_hi);
  li.lo = std::max(li.lo, 1e-8);
  out.lambda = {li};
  if (unbounded_spec.alpha_random) {
    Interval ai = widened(al_lo, al_hi);
    ai.lo = std::max(ai.lo, 1e-8);
    out.alpha = ai;
  }

  if (refine) {
    DPMixtureSpec bounded = unbounded_spec;
    bounded.truncated = true;
    bounded.mu_bounds = out.mu[0];
    bounded.lambda_bounds = out.lambda[0];
    if (bounded.alpha_random) bounded.alpha_bounds = out.alpha;
    std::vector<DPState> re = gibbs_baseline_dp(data, bounded, opt);
    std::vector<double> pooled_re;
    for (const auto& st : re)
      for (int l = 0; l < st.k; ++l) pooled_re.push_back(st.mu_star[static_cast<std::size_t>(l)]);
    out.agreement_tv = tv_on_grid(pooled_mu, pooled_re);
  }
  return out;
}

}  // namespace cftpmix
