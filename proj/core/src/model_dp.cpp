#include "cftpmix/model_dp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace cftpmix {

void DPMixtureSpec::validate() const {
  if (M < 1) throw usage_error("dp spec: M must be >= 1");
  if (!(eta > 0.0) || !(zeta > 0.0)) throw usage_error("dp spec: eta and zeta must be positive");
  if (!(psi > 0.0)) throw usage_error("dp spec: psi must be positive");
  if (truncated) {
    if (!(mu_bounds.lo < mu_bounds.hi) || !std::isfinite(mu_bounds.lo) || !std::isfinite(mu_bounds.hi))
      throw usage_error("dp spec: mu bounds empty or non-finite");
    if (!has_known_lambda()) {
      if (!(lambda_bounds.lo < lambda_bounds.hi) || lambda_bounds.lo < 0.0 ||
          !std::isfinite(lambda_bounds.hi))
        throw usage_error("dp spec: lambda bounds must lie in [0, inf)");
    }
  }
  if (alpha_random) {
    if (!(a_alpha > 0.0) || !(b_alpha > 0.0))
      throw usage_error("dp spec: alpha prior parameters must be positive");
    if (!(alpha_bounds.lo > 0.0) || !(alpha_bounds.lo < alpha_bounds.hi))
      throw usage_error("dp spec: alpha interval must lie in (0, inf)");
  } else if (!(alpha > 0.0)) {
    throw usage_error("dp spec: alpha must be positive");
  }
  if (has_known_lambda() && !(*lambda_known > 0.0))
    throw usage_error("dp spec: known lambda must be positive");
}

void DPState::validate(const DPMixtureSpec& spec, int n) const {
  if (static_cast<int>(z.size()) != n) throw invariant_violation_error("dp state: z size mismatch");
  for (int zi : z)
    if (zi < 0 || zi >= spec.M) throw invariant_violation_error("dp state: allocation out of range");
  if (static_cast<int>(s.size()) != spec.M)
    throw invariant_violation_error("dp state: label vector size mismatch");
  if (s[0] != 0) throw invariant_violation_error("dp state: first label must be 0");
  int prefix_max = 0;
  for (std::size_t j = 1; j < s.size(); ++j) {
    if (s[j] < 0 || s[j] > prefix_max + 1)
      throw invariant_violation_error("dp state: labels must be first-appearance canonical");
    prefix_max = std::max(prefix_max, s[j]);
  }
  if (k != prefix_max + 1) throw invariant_violation_error("dp state: k inconsistent with labels");
  if (static_cast<int>(mu_star.size()) != k || static_cast<int>(lambda_star.size()) != k)
    throw invariant_violation_error("dp state: distinct parameter count mismatch");
  for (int l = 0; l < k; ++l) {
    if (!(lambda_star[static_cast<std::size_t>(l)] > 0.0))
      throw invariant_violation_error("dp state: nonpositive precision");
    if (spec.truncated) {
      if (!spec.mu_bounds.contains(mu_star[static_cast<std::size_t>(l)]))
        throw invariant_violation_error("dp state: mu outside bounds");
      if (!spec.has_known_lambda() && !spec.lambda_bounds.contains(lambda_star[static_cast<std::size_t>(l)]))
        throw invariant_violation_error("dp state: lambda outside bounds");
    }
  }
  if (spec.alpha_random && !spec.alpha_bounds.contains(alpha))
    throw invariant_violation_error("dp state: alpha outside bounds");
}

StarSummary::StarSummary(const AllocationSummary& slots, std::span<const int> s, int k,
                         const DPMixtureSpec& spec)
    : k_(k) {
  n_.assign(static_cast<std::size_t>(k), 0);
  ybar_.assign(static_cast<std::size_t>(k), 0.0);
  eta_.assign(static_cast<std::size_t>(k), 0.0);
  zeta_.assign(static_cast<std::size_t>(k), 0.0);
  mu0_.assign(static_cast<std::size_t>(k), 0.0);
  psi_.assign(static_cast<std::size_t>(k), 0.0);
  for (int l = 0; l < k; ++l) refresh(slots, s, l, spec);
}

void StarSummary::refresh(const AllocationSummary& slots, std::span<const int> s, int l,
                          const DPMixtureSpec& spec) {
  int n_star = 0;
  double weighted_sum = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] == l) {
      n_star += slots.count(static_cast<int>(j));
      weighted_sum += slots.count(static_cast<int>(j)) * slots.mean(static_cast<int>(j));
    }
  }
  double ybar = n_star > 0 ? weighted_sum / n_star : 0.0;
  double between = 0.0, within = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (s[j] == l) {
      double d = slots.mean(static_cast<int>(j)) - ybar;
      between += slots.count(static_cast<int>(j)) * d * d;
      within += slots.ss(static_cast<int>(j));
    }
  }
  const double denom = spec.psi * n_star + 1.0;
  double d0 = spec.mu0 - ybar;
  n_[static_cast<std::size_t>(l)] = n_star;
  ybar_[static_cast<std::size_t>(l)] = ybar;
  eta_[static_cast<std::size_t>(l)] = 0.5 * (n_star + spec.eta);
  zeta_[static_cast<std::size_t>(l)] = 0.5 * (spec.zeta + n_star * d0 * d0 / denom + between + within);
  mu0_[static_cast<std::size_t>(l)] = (spec.psi * n_star * ybar + spec.mu0) / denom;
  psi_[static_cast<std::size_t>(l)] = spec.psi / denom;
}

SteppedCDF z_full_conditional_dp(int i, const DPState& state, const Dataset& data) {
  if (i < 0 || i >= data.n()) throw usage_error("z_full_conditional_dp: index out of range");
  const double yi = data.y[static_cast<std::size_t>(i)];
  std::vector<double> log_w(state.s.size());
  for (std::size_t j = 0; j < state.s.size(); ++j)
    log_w[j] = log_component_density(yi, state.theta_mu(static_cast<int>(j)),
                                     state.theta_lambda(static_cast<int>(j)));
  return SteppedCDF::from_log_weights(log_w);
}

double log_occurrence_weight(int n_j, double ybar_j, double ss_j, double mu, double lambda) {
  double d = mu - ybar_j;
  return 0.5 * n_j * (std::log(lambda) - kLogTwoPi) - 0.5 * lambda * (n_j * d * d + ss_j);
}

double log_q0(const DPMixtureSpec& spec, double alpha, int n_j, double ybar_j, double ss_j) {
  const double denom = n_j * spec.psi + 1.0;
  const double d = ybar_j - spec.mu0;
  if (spec.has_known_lambda()) {
    double lam = *spec.lambda_known;
    return std::log(alpha) + 0.5 * n_j * (std::log(lam) - kLogTwoPi) - 0.5 * std::log(denom) -
           0.5 * lam * (ss_j + n_j * d * d / denom);
  }
  double rate = 0.5 * (spec.zeta + n_j * d * d / denom + ss_j);
  return std::log(alpha) - 0.5 * n_j * kLogTwoPi - 0.5 * std::log(denom) +
         0.5 * spec.eta * std::log(0.5 * spec.zeta) - std::lgamma(0.5 * spec.eta) +
         std::lgamma(0.5 * (spec.eta + n_j)) - 0.5 * (spec.eta + n_j) * std::log(rate);
}

OthersView others_view(std::span<const int> s, int j) {
  OthersView view;
  std::map<int, int> mult;
  for (std::size_t m = 0; m < s.size(); ++m)
    if (static_cast<int>(m) != j) ++mult[s[m]];
  for (const auto& [label, count] : mult) {
    view.labels.push_back(label);
    view.mult.push_back(count);
  }
  return view;
}

namespace {

SteppedCDF c_conditional_impl(int j, const DPState& state, const AllocationSummary& slots,
                              const DPMixtureSpec& spec, double log_new_weight) {
  OthersView view = others_view(state.s, j);
  const int n_j = slots.count(j);
  const double ybar_j = slots.mean(j);
  const double ss_j = slots.ss(j);
  std::vector<double> log_w(static_cast<std::size_t>(view.k_j()) + 1);
  for (int l = 0; l < view.k_j(); ++l) {
    int label = view.labels[static_cast<std::size_t>(l)];
    log_w[static_cast<std::size_t>(l)] =
        std::log(static_cast<double>(view.mult[static_cast<std::size_t>(l)])) +
        log_occurrence_weight(n_j, ybar_j, ss_j, state.mu_star[static_cast<std::size_t>(label)],
                              state.lambda_star[static_cast<std::size_t>(label)]);
  }
  log_w.back() = log_new_weight;
  return SteppedCDF::from_log_weights(log_w);
}

}  // namespace

SteppedCDF c_full_conditional(int j, const DPState& state, const AllocationSummary& slots,
                              const Dataset& data, const DPMixtureSpec& spec) {
  (void)data;
  if (spec.truncated)
    throw usage_error("c_full_conditional: closed-form q0 requires the untruncated base measure");
  double lq0 = log_q0(spec, state.alpha, slots.count(j), slots.mean(j), slots.ss(j));
  return c_conditional_impl(j, state, slots, spec, lq0);
}

SteppedCDF c_full_conditional_aux(int j, const DPState& state, const AllocationSummary& slots,
                                  const AuxComponent& aux, const DPMixtureSpec& spec) {
  double lqa = std::log(state.alpha) +
               log_occurrence_weight(slots.count(j), slots.mean(j), slots.ss(j), aux.mu, aux.lambda);
  return c_conditional_impl(j, state, slots, spec, lqa);
}

AuxComponent aux_draw(int j, const DPState& state, const DPMixtureSpec& spec,
                      const RandomLedger& ledger, std::int64_t t) {
  int label = state.s[static_cast<std::size_t>(j)];
  int occurrences = 0;
  for (int lbl : state.s)
    if (lbl == label) ++occurrences;
  if (occurrences == 1) {
    return {state.mu_star[static_cast<std::size_t>(label)],
            state.lambda_star[static_cast<std::size_t>(label)]};
  }
  CellStream stream(ledger, t, VariableId{Var::Theta, j});
  AuxComponent aux;
  if (spec.has_known_lambda()) {
    aux.lambda = *spec.lambda_known;
  } else {
    aux.lambda = spec.truncated
                     ? truncated_gamma_from_stream(0.5 * spec.eta, 0.5 * spec.zeta,
                                                   spec.lambda_bounds, stream)
                     : gamma_from_stream(0.5 * spec.eta, 0.5 * spec.zeta, stream);
  }
  double sd = std::sqrt(spec.psi / aux.lambda);
  aux.mu = spec.truncated ? truncated_normal_from_stream(spec.mu0, sd, spec.mu_bounds, stream)
                          : spec.mu0 + sd * normal_from_uniform(stream.next());
  return aux;
}

std::pair<double, double> theta_star_draw(int l, const StarSummary& stars,
                                          const DPMixtureSpec& spec, const RandomLedger& ledger,
                                          std::int64_t t) {
  CellStream stream(ledger, t, VariableId{Var::ThetaStar, l});
  double lam;
  if (spec.has_known_lambda()) {
    lam = *spec.lambda_known;
  } else {
    lam = spec.truncated ? truncated_gamma_from_stream(stars.eta_star(l), stars.zeta_star(l),
                                                       spec.lambda_bounds, stream)
                         : gamma_from_stream(stars.eta_star(l), stars.zeta_star(l), stream);
  }
  double sd = std::sqrt(stars.psi_star(l) / lam);
  double mu = spec.truncated
                  ? truncated_normal_from_stream(stars.mu0_star(l), sd, spec.mu_bounds, stream)
                  : stars.mu0_star(l) + sd * normal_from_uniform(stream.next());
  return {mu, lam};
}

double alpha_draw(double alpha_current, int k, const DPMixtureSpec& spec,
                  const RandomLedger& ledger, std::int64_t t) {
  if (!spec.alpha_random) return spec.alpha;
  CellStream stream(ledger, t, VariableId{Var::Alpha, 0});
  // Beta(alpha+1, M) auxiliary variable, then a two-component gamma mixture.
  double g1 = gamma_from_stream(alpha_current + 1.0, 1.0, stream);
  double g2 = gamma_from_stream(static_cast<double>(spec.M), 1.0, stream);
  double eta_aux = g1 / (g1 + g2);
  double rate = spec.b_alpha - std::log(eta_aux);
  double odds = (spec.a_alpha + k - 1.0) / (spec.M * rate);
  double pick = stream.next();
  double shape = pick < odds / (1.0 + odds) ? spec.a_alpha + k : spec.a_alpha + k - 1.0;
  for (std::int64_t r = 0; r < kDefaultRejectionBudget; ++r) {
    double a = gamma_from_stream(shape, rate, stream);
    if (spec.alpha_bounds.contains(a)) return a;
  }
  throw sampler_stall_error("alpha draw: no acceptance inside the declared interval");
}

Relabeling relabel(std::span<const int> c, std::span<const double> mu_m,
                   std::span<const double> lambda_m) {
  if (c.size() != mu_m.size() || c.size() != lambda_m.size() || c.empty())
    throw usage_error("relabel: inputs must be equal-length and nonempty");
  // Compatibility: equal configuration entries carry equal parameters and
  // distinct entries carry distinct parameters.
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t b = a + 1; b < c.size(); ++b) {
      bool c_eq = c[a] == c[b];
      bool t_eq = mu_m[a] == mu_m[b] && lambda_m[a] == lambda_m[b];
      if (c_eq != t_eq)
        throw invariant_violation_error("relabel: configuration and parameters are incompatible");
    }
  Relabeling out;
  out.s.resize(c.size());
  for (std::size_t j = 0; j < c.size(); ++j) {
    int label = -1;
    for (std::size_t m = 0; m < j; ++m)
      if (c[m] == c[j]) {
        label = out.s[m];
        break;
      }
    if (label < 0) {
      label = static_cast<int>(out.mu_star.size());
      out.mu_star.push_back(mu_m[j]);
      out.lambda_star.push_back(lambda_m[j]);
    }
    out.s[j] = label;
  }
  out.k = static_cast<int>(out.mu_star.size());
  return out;
}

std::pair<std::vector<int>, int> apply_config_ops(std::span<const CfgOp> ops) {
  const int M = static_cast<int>(ops.size());
  if (M < 1) throw usage_error("apply_config_ops: empty operation list");
  // Start from an all-distinct symbolic sequence; class ids are arbitrary.
  std::vector<int> cls(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) cls[static_cast<std::size_t>(j)] = j;
  int fresh = M;
  for (int j = 0; j < M; ++j) {
    const CfgOp& op = ops[static_cast<std::size_t>(j)];
    switch (op.kind) {
      case CfgOp::Fresh:
        cls[static_cast<std::size_t>(j)] = fresh++;
        break;
      case CfgOp::JoinSlot:
        if (op.value < 0 || op.value >= M || op.value == j)
          throw usage_error("apply_config_ops: bad join slot");
        cls[static_cast<std::size_t>(j)] = cls[static_cast<std::size_t>(op.value)];
        break;
      case CfgOp::JoinIndex: {
        // Distinct classes of the other slots in first-appearance order.
        std::vector<int> order;
        for (int m = 0; m < M; ++m) {
          if (m == j) continue;
          int cm = cls[static_cast<std::size_t>(m)];
          if (std::find(order.begin(), order.end(), cm) == order.end()) order.push_back(cm);
        }
        if (op.value < 0 || op.value >= static_cast<int>(order.size()))
          throw usage_error("apply_config_ops: join index out of range");
        cls[static_cast<std::size_t>(j)] = order[static_cast<std::size_t>(op.value)];
        break;
      }
    }
  }
  // Canonical labels of the final classes.
  std::vector<int> s(static_cast<std::size_t>(M));
  std::vector<int> seen;
  for (int j = 0; j < M; ++j) {
    int cj = cls[static_cast<std::size_t>(j)];
    auto it = std::find(seen.begin(), seen.end(), cj);
    if (it == seen.end()) {
      s[static_cast<std::size_t>(j)] = static_cast<int>(seen.size());
      seen.push_back(cj);
    } else {
      s[static_cast<std::size_t>(j)] = static_cast<int>(it - seen.begin());
    }
  }
  return {s, static_cast<int>(seen.size())};
}

DPState dp_gibbs_sweep(const DPState& state, const Dataset& data, const DPMixtureSpec& spec,
                       const RandomLedger& ledger, std::int64_t t, bool conjugate,
                       bool freeze_z) {
  DPState next = state;
  if (!freeze_z) {
    for (int i = 0; i < data.n(); ++i) {
      SteppedCDF f = z_full_conditional_dp(i, next, data);
      next.z[static_cast<std::size_t>(i)] = f.invert(ledger.uniform(t, {Var::Z, i}, 0));
    }
  }
  AllocationSummary slots(data, next.z, spec.M);

  // Configuration sweep: auxiliary draw (non-conjugate), then c_j, then the
  // slot parameter, relabeling as we go.
  std::vector<double> mu_m(static_cast<std::size_t>(spec.M));
  std::vector<double> lam_m(static_cast<std::size_t>(spec.M));
  for (int j = 0; j < spec.M; ++j) {
    mu_m[static_cast<std::size_t>(j)] = next.theta_mu(j);
    lam_m[static_cast<std::size_t>(j)] = next.theta_lambda(j);
  }
  next.c_ops.assign(static_cast<std::size_t>(spec.M), 0);
  for (int j = 0; j < spec.M; ++j) {
    AuxComponent aux;
    SteppedCDF f;
    if (conjugate) {
      f = c_full_conditional(j, next, slots, data, spec);
    } else {
      aux = aux_draw(j, next, spec, ledger, t);
      f = c_full_conditional_aux(j, next, slots, aux, spec);
    }
    OthersView view = others_view(next.s, j);
    int op = f.invert(ledger.uniform(t, {Var::C, j}, 0));
    next.c_ops[static_cast<std::size_t>(j)] = op;
    if (op < view.k_j()) {
      int label = view.labels[static_cast<std::size_t>(op)];
      mu_m[static_cast<std::size_t>(j)] = next.mu_star[static_cast<std::size_t>(label)];
      lam_m[static_cast<std::size_t>(j)] = next.lambda_star[static_cast<std::size_t>(label)];
    } else if (conjugate) {
      // New component from the slot-j posterior base measure.
      CellStream stream(ledger, t, VariableId{Var::Theta, j});
      double lam;
      const double denom = slots.count(j) * spec.psi + 1.0;
      if (spec.has_known_lambda()) {
        lam = *spec.lambda_known;
      } else {
        double d = slots.mean(j) - spec.mu0;
        double rate = 0.5 * (spec.zeta + slots.count(j) * d * d / denom + slots.ss(j));
        lam = gamma_from_stream(0.5 * (spec.eta + slots.count(j)), rate, stream);
      }
      double mean = (slots.count(j) * slots.mean(j) * spec.psi + spec.mu0) / denom;
      double sd = std::sqrt(spec.psi / (lam * denom));
      mu_m[static_cast<std::size_t>(j)] = mean + sd * normal_from_uniform(stream.next());
      lam_m[static_cast<std::size_t>(j)] = lam;
    } else {
      mu_m[static_cast<std::size_t>(j)] = aux.mu;
      lam_m[static_cast<std::size_t>(j)] = aux.lambda;
    }
    // Rebuild canonical labels from the updated parameter sequence.
    std::vector<int> cfg(static_cast<std::size_t>(spec.M));
    for (int m = 0; m < spec.M; ++m) {
      cfg[static_cast<std::size_t>(m)] = m;
      for (int q = 0; q < m; ++q)
        if (mu_m[static_cast<std::size_t>(q)] == mu_m[static_cast<std::size_t>(m)] &&
            lam_m[static_cast<std::size_t>(q)] == lam_m[static_cast<std::size_t>(m)]) {
          cfg[static_cast<std::size_t>(m)] = cfg[static_cast<std::size_t>(q)];
          break;
        }
    }
    Relabeling rel = relabel(cfg, mu_m, lam_m);
    next.s = rel.s;
    next.k = rel.k;
    next.mu_star = rel.mu_star;
    next.lambda_star = rel.lambda_star;
  }

  // Distinct-parameter block.
  StarSummary stars(slots, next.s, next.k, spec);
  for (int l = 0; l < next.k; ++l) {
    auto [mu, lam] = theta_star_draw(l, stars, spec, ledger, t);
    next.mu_star[static_cast<std::size_t>(l)] = mu;
    next.lambda_star[static_cast<std::size_t>(l)] = lam;
  }
  next.alpha = alpha_draw(next.alpha, next.k, spec, ledger, t);
  return next;
}

}  // namespace cftpmix
