#include "cftpmix/cftp.hpp"

#include <algorithm>
#include <cmath>

namespace cftpmix {

namespace {

void ensure_epoch(RandomLedger& ledger, int j) {
  while (ledger.epoch() < j) ledger.extend_epoch(ledger.epoch() + 1);
}

std::int64_t epoch_start(int j) { return -(std::int64_t{1} << j) + 1; }

}  // namespace

double rejection_truncated(const TruncatedBase& base, Interval iv, CellStream& stream,
                           std::int64_t budget) {
  switch (base.form) {
    case BaseForm::NormalForm:
      return truncated_normal_from_stream(base.a, base.b, iv, stream, budget);
    case BaseForm::GammaForm:
      return truncated_gamma_from_stream(base.a, base.b, iv, stream, budget);
    case BaseForm::LogConcave:
      return adaptive_rejection_from_stream(base.density, iv, stream, budget);
  }
  throw usage_error("rejection_truncated: unknown base form");
}

// ---------------------------------------------------------------------------
// Known-p driver.
// ---------------------------------------------------------------------------

namespace {

FiniteMixtureState finite_initial_state(const FiniteMixtureSpec& spec, int n) {
  FiniteMixtureState st;
  st.z.assign(static_cast<std::size_t>(n), 0);
  st.pi.assign(static_cast<std::size_t>(spec.p), 1.0 / spec.p);
  st.mu.resize(static_cast<std::size_t>(spec.p));
  st.lambda.resize(static_cast<std::size_t>(spec.p));
  for (int j = 0; j < spec.p; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    st.mu[ju] = spec.bounded() ? spec.mu_bounds[ju].mid() : spec.xi[ju];
    st.lambda[ju] = spec.has_known_lambda()
                        ? spec.lambda_known[ju]
                        : (spec.bounded() ? spec.lambda_bounds[ju].mid() : spec.eta / spec.zeta);
  }
  return st;
}

FiniteMixtureState collapsed_sweep(FiniteMixtureState state, const Dataset& data,
                                   const FiniteMixtureSpec& spec, const RandomLedger& ledger,
                                   std::int64_t t) {
  AllocationSummary summary(data, state.z, spec.p);
  for (int i = 0; i < data.n(); ++i) {
    SteppedCDF f = z_collapsed_conditional(i, summary, data, spec);
    int zi = f.invert(ledger.uniform(t, {Var::Z, i}, 0));
    summary.set_allocation(i, zi);
  }
  state.z = summary.z();
  return state;
}

}  // namespace

FinitePerfectSample run_cftp_known(const Dataset& data, const FiniteMixtureSpec& spec,
                                   RandomLedger& ledger, const CftpOptions& options) {
  data.validate();
  spec.validate();
  ensure_epoch(ledger, 1);

  BoundContext ctx = options.bounds;
  if (options.tune_proposals && ctx.optimizer == OptimizerKind::Annealed && !options.collapsed)
    tune_steps(ctx, data, spec, ledger);

  // Envelopes are built once; the doubling loop only replays realizations.
  ZKnownBounds bounds(data, spec, ledger, ctx, options.collapsed);
  const int n = data.n();

  for (int j = 1; j <= options.epoch_cap; ++j) {
    ensure_epoch(ledger, j);
    const std::int64_t t0 = epoch_start(j);

    if (!bounds.exact()) {
      // The run-extension check covers every realization this epoch reads.
      auto realize = [&]() {
        std::vector<int> r;
        for (std::int64_t t = t0; t <= 0; ++t)
          for (int i = 0; i < n; ++i) {
            double u = ledger.uniform(t, {Var::Z, i}, 0);
            r.push_back(bounds.pair(i).invert_lower_realization(u));
            r.push_back(bounds.pair(i).invert_upper_realization(u));
          }
        return r;
      };
      stability_extend(ctx.schedule, realize, [&] { bounds.extend(); });
    }

    for (std::int64_t t = t0; t < 0; ++t) {
      bool agree = true;
      std::vector<int> z_star(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        double u = ledger.uniform(t, {Var::Z, i}, 0);
        int lo = bounds.pair(i).invert_lower_realization(u);
        int up = bounds.pair(i).invert_upper_realization(u);
        if (lo != up) {
          agree = false;
          break;
        }
        z_star[static_cast<std::size_t>(i)] = lo;
      }
      if (!agree) continue;

      // Coalesced at t; draw the continuous block and complete to time 0.
      FinitePerfectSample out;
      out.seed = ledger.seed();
      out.record = {j, t, -t, std::int64_t{1} << j, -t};
      FiniteMixtureState state = finite_initial_state(spec, n);
      state.z = z_star;
      if (options.collapsed) {
        for (std::int64_t tt = t + 1; tt <= 0; ++tt)
          state = collapsed_sweep(std::move(state), data, spec, ledger, tt);
        draw_continuous_given_z(state, data, spec, ledger, 0);
      } else {
        draw_continuous_given_z(state, data, spec, ledger, t);
        for (std::int64_t tt = t + 1; tt <= 0; ++tt)
          state = gibbs_sweep_finite(state, data, spec, ledger, tt);
      }
      state.validate(spec, n);
      out.state = std::move(state);
      return out;
    }
  }
  throw no_coalescence_error("known-p sampler: no coalescence within epoch cap " +
                             std::to_string(options.epoch_cap));
}

// ---------------------------------------------------------------------------
// Two-component driver.
// ---------------------------------------------------------------------------

namespace {

std::vector<double> pi_exponentials(const RandomLedger& ledger, std::int64_t t, int n) {
  std::vector<double> e(static_cast<std::size_t>(n) + 2);
  for (int k = 0; k < n + 2; ++k) e[static_cast<std::size_t>(k)] = ledger.exponential(t, {Var::Pi, 0}, k);
  return e;
}

int count_first_component(std::span<const int> z) {
  int c = 0;
  for (int v : z)
    if (v == 0) ++c;
  return c;
}

}  // namespace

FinitePerfectSample run_cftp_two_component(const Dataset& data, const FiniteMixtureSpec& spec,
                                           RandomLedger& ledger, const CftpOptions& options) {
  data.validate();
  spec.validate();
  if (spec.p != 2 || !spec.has_known_lambda())
    throw usage_error("two-component driver needs p=2 with known precisions");
  if (std::abs(spec.gamma[0] - 1.0) > 1e-12 || std::abs(spec.gamma[1] - 1.0) > 1e-12)
    throw usage_error("two-component driver assumes unit Dirichlet weights");
  ensure_epoch(ledger, 1);
  const int n = data.n();
  BoundContext ctx = options.bounds;

  for (int j = 1; j <= options.epoch_cap; ++j) {
    ensure_epoch(ledger, j);
    const std::int64_t t0 = epoch_start(j);
    int n_low = 0, n_up = n;
    for (std::int64_t t = t0; t <= 0; ++t) {
      std::vector<double> e = pi_exponentials(ledger, t, n);
      double pi_low = beta_from_exponentials(n_low, n, e);
      double pi_up = beta_from_exponentials(n_up, n, e);

      bool agree = true;
      std::vector<int> z_low(static_cast<std::size_t>(n)), z_up(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        auto build = make_z_two_component_bounds(i, data, spec, pi_low, pi_up, ledger, t, ctx);
        double u = ledger.uniform(t, {Var::Z, i}, 0);
        RealizedBound rb = realize_with_stability(*build, u, ctx.schedule);
        z_low[static_cast<std::size_t>(i)] = rb.low;
        z_up[static_cast<std::size_t>(i)] = rb.up;
        if (rb.low != rb.up) agree = false;
      }
      // The lower chain allocates at least as many points to the first
      // component as any true chain, the upper chain at most as many.
      n_up = count_first_component(z_low);
      n_low = count_first_component(z_up);

      if (agree && t < 0) {
        FinitePerfectSample out;
        out.seed = ledger.seed();
        out.record = {j, t, -t, std::int64_t{1} << j, -t};
        FiniteMixtureState state = finite_initial_state(spec, n);
        state.z = z_low;

        // Coalesced continuous block at t, then forward sweeps to 0.
        auto draw_pi_theta = [&](std::int64_t tt) {
          std::vector<double> ee = pi_exponentials(ledger, tt, n);
          int n1 = count_first_component(state.z);
          double pi1 = beta_from_exponentials(n1, n, ee);
          state.pi = {pi1, 1.0 - pi1};
          AllocationSummary summary(data, state.z, 2);
          for (int comp = 0; comp < 2; ++comp) {
            MuConditional mc = mu_conditional(spec, comp, summary.count(comp), summary.mean(comp));
            double sd = std::sqrt(mc.var_times_lambda / spec.lambda_known[static_cast<std::size_t>(comp)]);
            CellStream ms(ledger, tt, VariableId{Var::Theta, 2 * comp + 1});
            state.mu[static_cast<std::size_t>(comp)] =
                spec.bounded()
                    ? truncated_normal_from_stream(mc.mean, sd, spec.mu_bounds[static_cast<std::size_t>(comp)], ms)
                    : mc.mean + sd * normal_from_uniform(ms.next());
            state.lambda[static_cast<std::size_t>(comp)] = spec.lambda_known[static_cast<std::size_t>(comp)];
          }
        };
        draw_pi_theta(t);
        for (std::int64_t tt = t + 1; tt <= 0; ++tt) {
          for (int i = 0; i < n; ++i) {
            SteppedCDF f = z_full_conditional(i, state, data);
            state.z[static_cast<std::size_t>(i)] = f.invert(ledger.uniform(tt, {Var::Z, i}, 0));
          }
          draw_pi_theta(tt);
        }
        state.validate(spec, n);
        out.state = std::move(state);
        return out;
      }
    }
  }
  throw no_coalescence_error("two-component sampler: no coalescence within epoch cap " +
                             std::to_string(options.epoch_cap));
}

// ---------------------------------------------------------------------------
// Unknown-k driver.
// ---------------------------------------------------------------------------

DpPerfectSample run_cftp_dp(const Dataset& data, const DPMixtureSpec& spec, RandomLedger& ledger,
                            const CftpOptions& options) {
  data.validate();
  spec.validate();
  if (!spec.truncated) throw usage_error("unknown-k sampler requires truncated mode");
  ensure_epoch(ledger, 1);
  const int n = data.n();
  const int M = spec.M;

  BoundContext ctx = options.bounds;
  if (options.tune_proposals && ctx.optimizer == OptimizerKind::Annealed)
    tune_steps(ctx, data, spec, ledger);

  for (int j = 1; j <= options.epoch_cap; ++j) {
    ensure_epoch(ledger, j);
    const std::int64_t t0 = epoch_start(j);
    CoalescedSets frozen = CoalescedSets::none(n, M);

    for (std::int64_t t = t0; t <= 0; ++t) {
      // Allocation envelopes under the labels pinned at the previous step.
      CoalescedSets step = CoalescedSets::none(n, M);
      step.s = frozen.s;
      bool z_all = true;
      for (int i = 0; i < n; ++i) {
        auto build = make_z_dp_bounds(i, data, spec, step, ledger, t, ctx);
        double u = ledger.uniform(t, {Var::Z, i}, 0);
        RealizedBound rb = realize_with_stability(*build, u, ctx.schedule);
        if (rb.low == rb.up)
          step.z[static_cast<std::size_t>(i)] = rb.low;
        else
          z_all = false;
      }

      // Configuration envelopes with the current allocations pinned.
      bool c_all = true;
      for (int jj = 0; jj < M; ++jj) {
        CBoundInfo info;
        auto build = make_c_bounds(jj, data, spec, step, ledger, t, ctx, info);
        double u = ledger.uniform(t, {Var::C, jj}, 0);
        RealizedBound rb = realize_with_stability(*build, u, ctx.schedule);
        if (rb.low == rb.up) {
          step.c[static_cast<std::size_t>(jj)] = interpret_coalesced_c(rb.low, jj, M, info, step);
          if (!step.c[static_cast<std::size_t>(jj)].has_value()) c_all = false;
        } else {
          c_all = false;
        }
      }

      // Label ranges; pinned labels feed the next step's envelopes.
      CoalescedSets next = CoalescedSets::none(n, M);
      for (int jj = 0; jj < M; ++jj) {
        SBoundResult sb = bounds_s(jj, spec, step, ledger, t, ctx);
        if (sb.s_low == sb.s_up) next.s[static_cast<std::size_t>(jj)] = sb.s_low;
      }

      if (z_all && c_all && t < 0) {
        DpPerfectSample out;
        out.seed = ledger.seed();
        out.record = {j, t, -t, std::int64_t{1} << j, -t};

        // Assemble the coalesced state: labels from the pinned configuration
        // ops, then the distinct-parameter block and the concentration.
        std::vector<CfgOp> ops(static_cast<std::size_t>(M));
        for (int jj = 0; jj < M; ++jj) ops[static_cast<std::size_t>(jj)] = *step.c[static_cast<std::size_t>(jj)];
        auto [s_star, k_star] = apply_config_ops(ops);

        DPState state;
        state.z.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) state.z[static_cast<std::size_t>(i)] = *step.z[static_cast<std::size_t>(i)];
        state.s = s_star;
        state.k = k_star;
        state.c_ops.assign(static_cast<std::size_t>(M), 0);
        state.alpha = spec.alpha_random ? spec.alpha_bounds.mid() : spec.alpha;
        state.mu_star.resize(static_cast<std::size_t>(k_star));
        state.lambda_star.resize(static_cast<std::size_t>(k_star));
        AllocationSummary slots(data, state.z, M);
        StarSummary stars(slots, state.s, state.k, spec);
        for (int l = 0; l < k_star; ++l) {
          auto [mu, lam] = theta_star_draw(l, stars, spec, ledger, t);
          state.mu_star[static_cast<std::size_t>(l)] = mu;
          state.lambda_star[static_cast<std::size_t>(l)] = lam;
        }
        state.alpha = alpha_draw(state.alpha, state.k, spec, ledger, t);

        for (std::int64_t tt = t + 1; tt <= 0; ++tt)
          state = dp_gibbs_sweep(state, data, spec, ledger, tt, /*conjugate=*/false);
        state.validate(spec, n);
        out.state = std::move(state);
        return out;
      }
      frozen = next;
    }
  }
  throw no_coalescence_error("unknown-k sampler: no coalescence within epoch cap " +
                             std::to_string(options.epoch_cap));
}

}  // namespace cftpmix
