#include "cftpmix/model_finite.hpp"

#include <cmath>
#include <string>

namespace cftpmix {

void Dataset::validate() const {
  if (y.empty()) throw usage_error("dataset must contain at least one observation");
  for (double v : y)
    if (!std::isfinite(v)) throw usage_error("dataset contains a non-finite value");
}

void FiniteMixtureSpec::validate() const {
  if (p < 1) throw usage_error("spec: p must be >= 1");
  auto need = [&](std::size_t got, const char* name) {
    if (got != static_cast<std::size_t>(p))
      throw usage_error(std::string("spec: ") + name + " must have one entry per component");
  };
  need(xi.size(), "xi");
  need(tau.size(), "tau");
  need(gamma.size(), "gamma");
  if (!(eta > 0.0) || !(zeta > 0.0)) throw usage_error("spec: eta and zeta must be positive");
  for (double t : tau)
    if (!(t > 0.0)) throw usage_error("spec: tau entries must be positive");
  for (double g : gamma)
    if (!(g > 0.0)) throw usage_error("spec: gamma entries must be positive");
  if (!mu_bounds.empty()) {
    need(mu_bounds.size(), "mu_bounds");
    for (const Interval& iv : mu_bounds)
      if (!(iv.lo < iv.hi) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
        throw usage_error("spec: mu bound interval is empty or non-finite");
    if (!has_known_lambda()) {
      need(lambda_bounds.size(), "lambda_bounds");
      for (const Interval& iv : lambda_bounds)
        if (!(iv.lo < iv.hi) || !(iv.lo > 0.0) || !std::isfinite(iv.hi))
          throw usage_error("spec: lambda bounds must be inside (0, inf)");
    }
  }
  if (!pi_bounds.empty()) {
    need(pi_bounds.size(), "pi_bounds");
    for (const Interval& iv : pi_bounds)
      if (!(iv.lo > 0.0) || !(iv.lo < iv.hi) || !(iv.hi < 1.0))
        throw usage_error("spec: pi bounds must be inside (0,1)");
  }
  if (has_known_lambda()) {
    need(lambda_known.size(), "lambda_known");
    for (double l : lambda_known)
      if (!(l > 0.0)) throw usage_error("spec: known precisions must be positive");
  }
}

void FiniteMixtureState::validate(const FiniteMixtureSpec& spec, int n) const {
  if (static_cast<int>(z.size()) != n) throw invariant_violation_error("state: z size mismatch");
  for (int zi : z)
    if (zi < 0 || zi >= spec.p) throw invariant_violation_error("state: allocation out of range");
  if (static_cast<int>(pi.size()) != spec.p || static_cast<int>(mu.size()) != spec.p ||
      static_cast<int>(lambda.size()) != spec.p)
    throw invariant_violation_error("state: parameter size mismatch");
  double total = 0.0;
  for (double w : pi) {
    if (!(w > 0.0)) throw invariant_violation_error("state: pi entries must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw invariant_violation_error("state: pi does not sum to 1");
  for (double l : lambda)
    if (!(l > 0.0)) throw invariant_violation_error("state: lambda entries must be positive");
  if (spec.bounded()) {
    for (int j = 0; j < spec.p; ++j) {
      if (!spec.mu_bounds[static_cast<std::size_t>(j)].contains(mu[static_cast<std::size_t>(j)]))
        throw invariant_violation_error("state: mu outside declared bounds");
      if (!spec.has_known_lambda() &&
          !spec.lambda_bounds[static_cast<std::size_t>(j)].contains(lambda[static_cast<std::size_t>(j)]))
        throw invariant_violation_error("state: lambda outside declared bounds");
    }
  }
}

AllocationSummary::AllocationSummary(const Dataset& data, std::span<const int> z, int p)
    : data_(&data), p_(p), z_(z.begin(), z.end()) {
  if (static_cast<int>(z_.size()) != data.n()) throw usage_error("summary: z size mismatch");
  n_.assign(static_cast<std::size_t>(p), 0);
  mean_.assign(static_cast<std::size_t>(p), 0.0);
  ss_.assign(static_cast<std::size_t>(p), 0.0);
  for (int j = 0; j < p_; ++j) recompute(j);
}

void AllocationSummary::recompute(int j) {
  const auto& y = data_->y;
  int cnt = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < z_.size(); ++i) {
    if (z_[i] == j) {
      ++cnt;
      sum += y[i];
    }
  }
  double m = cnt > 0 ? sum / cnt : 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < z_.size(); ++i) {
    if (z_[i] == j) {
      double d = y[i] - m;
      ss += d * d;
    }
  }
  n_[static_cast<std::size_t>(j)] = cnt;
  mean_[static_cast<std::size_t>(j)] = m;
  ss_[static_cast<std::size_t>(j)] = ss;
}

void AllocationSummary::set_allocation(int i, int j) {
  if (i < 0 || i >= static_cast<int>(z_.size()) || j < 0 || j >= p_)
    throw usage_error("set_allocation: index out of range");
  int old = z_[static_cast<std::size_t>(i)];
  if (old == j) return;
  z_[static_cast<std::size_t>(i)] = j;
  recompute(old);
  recompute(j);
}

double log_component_density(double y, double mu, double lambda) {
  if (!std::isfinite(y) || !std::isfinite(mu) || !std::isfinite(lambda))
    throw usage_error("log_component_density: non-finite input");
  if (!(lambda > 0.0)) throw usage_error("log_component_density: lambda must be positive");
  double d = y - mu;
  return 0.5 * (std::log(lambda) - kLogTwoPi) - 0.5 * lambda * d * d;
}

SteppedCDF z_full_conditional(int i, const FiniteMixtureState& state, const Dataset& data) {
  if (i < 0 || i >= data.n()) throw usage_error("z_full_conditional: index out of range");
  const double yi = data.y[static_cast<std::size_t>(i)];
  std::vector<double> log_w(state.pi.size());
  for (std::size_t j = 0; j < state.pi.size(); ++j)
    log_w[j] = std::log(state.pi[j]) + log_component_density(yi, state.mu[j], state.lambda[j]);
  return SteppedCDF::from_log_weights(log_w);
}

double beta_from_exponentials(int n1, int n, std::span<const double> e) {
  if (n1 < 0 || n1 > n) throw usage_error("beta_from_exponentials: need 0 <= n1 <= n");
  if (static_cast<int>(e.size()) < n + 2)
    throw usage_error("beta_from_exponentials: need n+2 exponentials");
  double num = 0.0, den = 0.0;
  for (int k = 0; k < n + 2; ++k) {
    if (!(e[static_cast<std::size_t>(k)] > 0.0))
      throw usage_error("beta_from_exponentials: exponentials must be positive");
    den += e[static_cast<std::size_t>(k)];
    if (k <= n1) num += e[static_cast<std::size_t>(k)];
  }
  return num / den;
}

LambdaConditional lambda_conditional(const FiniteMixtureSpec& spec, int j, int n_j,
                                     double ybar_j, double ss_j) {
  double tau2 = spec.tau[static_cast<std::size_t>(j)] * spec.tau[static_cast<std::size_t>(j)];
  double d = ybar_j - spec.xi[static_cast<std::size_t>(j)];
  double rate = 0.5 * (spec.zeta + n_j * d * d / (n_j * tau2 + 1.0) + ss_j);
  return {0.5 * (spec.eta + n_j), rate};
}

MuConditional mu_conditional(const FiniteMixtureSpec& spec, int j, int n_j, double ybar_j) {
  double tau2 = spec.tau[static_cast<std::size_t>(j)] * spec.tau[static_cast<std::size_t>(j)];
  double denom = n_j * tau2 + 1.0;
  return {(n_j * ybar_j * tau2 + spec.xi[static_cast<std::size_t>(j)]) / denom, tau2 / denom};
}

namespace {

std::vector<double> draw_pi(const AllocationSummary& summary, const FiniteMixtureSpec& spec,
                            const RandomLedger& ledger, std::int64_t t) {
  const int p = spec.p;
  std::vector<CellStream> streams;
  streams.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) streams.emplace_back(ledger, t, VariableId{Var::Pi, j});
  std::vector<double> shapes(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j)
    shapes[static_cast<std::size_t>(j)] = spec.gamma[static_cast<std::size_t>(j)] + summary.count(j);

  if (spec.pi_bounds.empty()) return dirichlet_from_streams(shapes, streams);

  // Whole-vector rejection onto the declared simplex-interior box.
  for (std::int64_t r = 0; r < kDefaultRejectionBudget; ++r) {
    std::vector<double> pi = dirichlet_from_streams(shapes, streams);
    bool ok = true;
    for (int j = 0; j < p; ++j)
      if (!spec.pi_bounds[static_cast<std::size_t>(j)].contains(pi[static_cast<std::size_t>(j)])) {
        ok = false;
        break;
      }
    if (ok) return pi;
  }
  throw sampler_stall_error("bounded Dirichlet draw: no acceptance within budget");
}

void draw_theta_given_z(FiniteMixtureState& state, const AllocationSummary& summary,
                        const FiniteMixtureSpec& spec, const RandomLedger& ledger,
                        std::int64_t t) {
  for (int j = 0; j < spec.p; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    double lam;
    if (spec.has_known_lambda()) {
      lam = spec.lambda_known[ju];
    } else {
      LambdaConditional lc = lambda_conditional(spec, j, summary.count(j), summary.mean(j),
                                                summary.ss(j));
      CellStream ls(ledger, t, VariableId{Var::Theta, 2 * j});
      lam = spec.bounded() ? truncated_gamma_from_stream(lc.shape, lc.rate, spec.lambda_bounds[ju], ls)
                           : gamma_from_stream(lc.shape, lc.rate, ls);
    }
    MuConditional mc = mu_conditional(spec, j, summary.count(j), summary.mean(j));
    double sd = std::sqrt(mc.var_times_lambda / lam);
    CellStream ms(ledger, t, VariableId{Var::Theta, 2 * j + 1});
    double mu = spec.bounded()
                    ? truncated_normal_from_stream(mc.mean, sd, spec.mu_bounds[ju], ms)
                    : mc.mean + sd * normal_from_uniform(ms.next());
    state.lambda[ju] = lam;
    state.mu[ju] = mu;
  }
}

}  // namespace

FiniteMixtureState gibbs_sweep_finite(const FiniteMixtureState& state, const Dataset& data,
                                      const FiniteMixtureSpec& spec, const RandomLedger& ledger,
                                      std::int64_t t) {
  FiniteMixtureState next = state;
  for (int i = 0; i < data.n(); ++i) {
    SteppedCDF f = z_full_conditional(i, next, data);
    next.z[static_cast<std::size_t>(i)] = f.invert(ledger.uniform(t, {Var::Z, i}, 0));
  }
  draw_continuous_given_z(next, data, spec, ledger, t);
  return next;
}

void draw_continuous_given_z(FiniteMixtureState& state, const Dataset& data,
                             const FiniteMixtureSpec& spec, const RandomLedger& ledger,
                             std::int64_t t) {
  AllocationSummary summary(data, state.z, spec.p);
  state.pi = draw_pi(summary, spec, ledger, t);
  draw_theta_given_z(state, summary, spec, ledger, t);
}

double log_component_marginal(const FiniteMixtureSpec& spec, int j, int n_j, double ybar_j,
                              double ss_j) {
  const auto ju = static_cast<std::size_t>(j);
  double tau2 = spec.tau[ju] * spec.tau[ju];
  double denom = n_j * tau2 + 1.0;
  double d = ybar_j - spec.xi[ju];
  double out;
  if (spec.has_known_lambda()) {
    double lam = spec.lambda_known[ju];
    out = 0.5 * n_j * (std::log(lam) - kLogTwoPi) - 0.5 * std::log(denom) -
          0.5 * lam * (ss_j + n_j * d * d / denom);
    if (spec.bounded()) {
      // Truncating the mu prior rescales the marginal by the ratio of
      // posterior to prior normal mass on the box.
      const Interval& box = spec.mu_bounds[ju];
      double sd0 = spec.tau[ju] / std::sqrt(lam);
      double z_prior = std_normal_cdf((box.hi - spec.xi[ju]) / sd0) -
                       std_normal_cdf((box.lo - spec.xi[ju]) / sd0);
      MuConditional mc = mu_conditional(spec, j, n_j, ybar_j);
      double sd1 = std::sqrt(mc.var_times_lambda / lam);
      double z_post = std_normal_cdf((box.hi - mc.mean) / sd1) -
                      std_normal_cdf((box.lo - mc.mean) / sd1);
      if (!(z_prior > 0.0)) throw numerical_degeneracy_error("mu prior mass on box underflowed");
      out += std::log(std::max(z_post, 1e-300)) - std::log(z_prior);
    }
  } else {
    if (spec.bounded())
      throw usage_error("log_component_marginal: truncated marginal requires known lambda");
    double rate = 0.5 * (spec.zeta + n_j * d * d / denom + ss_j);
    out = -0.5 * n_j * kLogTwoPi - 0.5 * std::log(denom) + 0.5 * spec.eta * std::log(0.5 * spec.zeta) -
          std::lgamma(0.5 * spec.eta) + std::lgamma(0.5 * (spec.eta + n_j)) -
          0.5 * (spec.eta + n_j) * std::log(rate);
  }
  return out;
}

SteppedCDF z_collapsed_conditional(int i, AllocationSummary& summary, const Dataset& data,
                                   const FiniteMixtureSpec& spec) {
  if (i < 0 || i >= data.n()) throw usage_error("z_collapsed_conditional: index out of range");
  const int zi = summary.z()[static_cast<std::size_t>(i)];
  std::vector<double> log_w(static_cast<std::size_t>(spec.p));
  for (int j = 0; j < spec.p; ++j) {
    summary.set_allocation(i, j);
    double with = log_component_marginal(spec, j, summary.count(j), summary.mean(j), summary.ss(j));
    summary.set_allocation(i, zi);
    // Stats of component j without observation i.
    int n_wo;
    double mean_wo, ss_wo;
    if (zi == j) {
      n_wo = summary.count(j) - 1;
      const double yi = data.y[static_cast<std::size_t>(i)];
      double sum_wo = summary.mean(j) * summary.count(j) - yi;
      mean_wo = n_wo > 0 ? sum_wo / n_wo : 0.0;
      ss_wo = 0.0;
      for (int m = 0; m < data.n(); ++m)
        if (m != i && summary.z()[static_cast<std::size_t>(m)] == j) {
          double dd = data.y[static_cast<std::size_t>(m)] - mean_wo;
          ss_wo += dd * dd;
        }
    } else {
      n_wo = summary.count(j);
      mean_wo = summary.mean(j);
      ss_wo = summary.ss(j);
    }
    double without = log_component_marginal(spec, j, n_wo, mean_wo, ss_wo);
    log_w[static_cast<std::size_t>(j)] =
        std::log(n_wo + spec.gamma[static_cast<std::size_t>(j)]) + with - without;
  }
  return SteppedCDF::from_log_weights(log_w);
}

}  // namespace cftpmix
