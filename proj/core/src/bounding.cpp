#include "cftpmix/bounding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cftpmix {

namespace {

bool canonical_valid(std::span<const int> s) {
  if (s.empty() || s[0] != 0) return false;
  int pm = 0;
  for (std::size_t j = 1; j < s.size(); ++j) {
    if (s[j] < 0 || s[j] > pm + 1) return false;
    pm = std::max(pm, s[j]);
  }
  return true;
}

double scaled_step(double explicit_step, double width, double scale) {
  return (explicit_step > 0.0 ? explicit_step : width / 20.0) * scale;
}

}  // namespace

CoalescedSets CoalescedSets::none(int n, int M) {
  CoalescedSets out;
  out.z.assign(static_cast<std::size_t>(n), std::nullopt);
  out.s.assign(static_cast<std::size_t>(M), std::nullopt);
  out.c.assign(static_cast<std::size_t>(M), std::nullopt);
  out.s[0] = 0;  // the first label is always 0
  return out;
}

int CoalescedSets::frozen_s_count() const {
  int count = 0;
  for (const auto& v : s)
    if (v.has_value()) ++count;
  return count;
}

RealizedBound realize_with_stability(BoundBuild& build, double u, const AnnealSchedule& schedule) {
  auto realize = [&]() {
    const BoundPair& p = build.pair();
    return std::vector<int>{p.invert_lower_realization(u), p.invert_upper_realization(u)};
  };
  std::vector<int> r = realize();
  if (!build.exact()) {
    stability_extend(schedule, realize, [&] { build.extend(); });
    r = realize();
  }
  return {r[0], r[1]};
}

// ---------------------------------------------------------------------------
// Known-p parameter space.
// ---------------------------------------------------------------------------

namespace {

class FiniteParamSpace final : public AnnealSpace {
 public:
  FiniteParamSpace(const Dataset& data, const FiniteMixtureSpec& spec, const BoundContext& ctx,
                   int i)
      : data_(&data), spec_(&spec), i_(i), p_(spec.p) {
    pi_.assign(static_cast<std::size_t>(p_), 1.0 / p_);
    mu_.resize(static_cast<std::size_t>(p_));
    lambda_.resize(static_cast<std::size_t>(p_));
    for (int j = 0; j < p_; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      mu_[ju] = spec.mu_bounds[ju].mid();
      lambda_[ju] = spec.has_known_lambda() ? spec.lambda_known[ju] : spec.lambda_bounds[ju].mid();
    }
    if (!spec.pi_bounds.empty()) {
      double total = 0.0;
      for (int j = 0; j < p_; ++j) total += spec.pi_bounds[static_cast<std::size_t>(j)].mid();
      for (int j = 0; j < p_; ++j)
        pi_[static_cast<std::size_t>(j)] = spec.pi_bounds[static_cast<std::size_t>(j)].mid() / total;
    }
    mu_step_ = scaled_step(ctx.mu_step, spec.mu_bounds[0].width(), ctx.step_scale);
    lambda_step_ = spec.has_known_lambda()
                       ? 0.0
                       : scaled_step(ctx.lambda_step, spec.lambda_bounds[0].width(), ctx.step_scale);
    pi_step_ = (ctx.pi_step > 0.0 ? ctx.pi_step : 0.05) * ctx.step_scale;
    cand_pi_ = pi_;
    cand_mu_ = mu_;
    cand_lambda_ = lambda_;
  }

  void set_cell(int ell) {
    ell_ = ell;
    cached_ = false;
  }
  void set_step_scale(double s) { scale_ = s; }

  bool propose(CellStream& stream) override {
    cand_pi_ = pi_;
    cand_mu_ = mu_;
    cand_lambda_ = lambda_;
    int kinds = spec_->has_known_lambda() ? 2 : 3;  // pi, mu, lambda
    int kind = static_cast<int>(stream.next() * kinds);
    if (kind == 0 && p_ >= 2) {
      int a = static_cast<int>(stream.next() * p_);
      int b = static_cast<int>(stream.next() * (p_ - 1));
      if (b >= a) ++b;
      double delta = pi_step_ * scale_ * normal_from_uniform(stream.next());
      double na = cand_pi_[static_cast<std::size_t>(a)] + delta;
      double nb = cand_pi_[static_cast<std::size_t>(b)] - delta;
      if (!pi_feasible(a, na) || !pi_feasible(b, nb)) return false;
      cand_pi_[static_cast<std::size_t>(a)] = na;
      cand_pi_[static_cast<std::size_t>(b)] = nb;
    } else if (kind <= 1) {
      int j = static_cast<int>(stream.next() * p_);
      double nm = cand_mu_[static_cast<std::size_t>(j)] +
                  mu_step_ * scale_ * normal_from_uniform(stream.next());
      if (!spec_->mu_bounds[static_cast<std::size_t>(j)].contains(nm)) return false;
      cand_mu_[static_cast<std::size_t>(j)] = nm;
    } else {
      int j = static_cast<int>(stream.next() * p_);
      double nl = cand_lambda_[static_cast<std::size_t>(j)] +
                  lambda_step_ * scale_ * normal_from_uniform(stream.next());
      if (!spec_->lambda_bounds[static_cast<std::size_t>(j)].contains(nl)) return false;
      cand_lambda_[static_cast<std::size_t>(j)] = nl;
    }
    return true;
  }

  double current_value() override {
    if (!cached_) {
      cur_val_ = evaluate(pi_, mu_, lambda_);
      cached_ = true;
    }
    return cur_val_;
  }
  double candidate_value() override { return evaluate(cand_pi_, cand_mu_, cand_lambda_); }
  void commit() override {
    pi_ = cand_pi_;
    mu_ = cand_mu_;
    lambda_ = cand_lambda_;
    cached_ = false;
  }
  void mark_best() override {}

 private:
  bool pi_feasible(int j, double v) const {
    if (!(v > 1e-9) || !(v < 1.0 - 1e-9)) return false;
    if (spec_->pi_bounds.empty()) return true;
    return spec_->pi_bounds[static_cast<std::size_t>(j)].contains(v);
  }

  double evaluate(const std::vector<double>& pi, const std::vector<double>& mu,
                  const std::vector<double>& lambda) const {
    const double yi = data_->y[static_cast<std::size_t>(i_)];
    double m = -1e308;
    std::vector<double> lw(static_cast<std::size_t>(p_));
    for (int j = 0; j < p_; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      lw[ju] = std::log(pi[ju]) + log_component_density(yi, mu[ju], lambda[ju]);
      m = std::max(m, lw[ju]);
    }
    double num = 0.0, den = 0.0;
    for (int j = 0; j < p_; ++j) {
      double w = std::exp(lw[static_cast<std::size_t>(j)] - m);
      den += w;
      if (j <= ell_) num += w;
    }
    return num / den;
  }

  const Dataset* data_;
  const FiniteMixtureSpec* spec_;
  int i_;
  int p_;
  int ell_ = 0;
  double mu_step_, lambda_step_, pi_step_, scale_ = 1.0;
  std::vector<double> pi_, mu_, lambda_;
  std::vector<double> cand_pi_, cand_mu_, cand_lambda_;
  bool cached_ = false;
  double cur_val_ = 0.0;
};

// Collapsed conditional over the other allocations.
class CollapsedZSpace final : public AnnealSpace {
 public:
  CollapsedZSpace(const Dataset& data, const FiniteMixtureSpec& spec, int i)
      : data_(&data), spec_(&spec), i_(i),
        summary_(data, std::vector<int>(static_cast<std::size_t>(data.n()), 0), spec.p) {}

  void set_cell(int ell) {
    ell_ = ell;
    cached_ = false;
  }

  bool propose(CellStream& stream) override {
    int pick = static_cast<int>(stream.next() * (data_->n() - 1));
    cand_i_ = pick >= i_ ? pick + 1 : pick;
    cand_to_ = static_cast<int>(stream.next() * spec_->p);
    return true;
  }

  double current_value() override {
    if (!cached_) {
      cur_val_ = evaluate();
      cached_ = true;
    }
    return cur_val_;
  }
  double candidate_value() override {
    int old = summary_.z()[static_cast<std::size_t>(cand_i_)];
    summary_.set_allocation(cand_i_, cand_to_);
    double v = evaluate();
    summary_.set_allocation(cand_i_, old);
    return v;
  }
  void commit() override {
    summary_.set_allocation(cand_i_, cand_to_);
    cached_ = false;
  }
  void mark_best() override {}

  void assign(std::span<const int> z) {
    for (int m = 0; m < data_->n(); ++m) summary_.set_allocation(m, z[static_cast<std::size_t>(m)]);
    cached_ = false;
  }

 private:
  double evaluate() {
    SteppedCDF f = z_collapsed_conditional(i_, summary_, *data_, *spec_);
    return f.at(ell_);
  }

  const Dataset* data_;
  const FiniteMixtureSpec* spec_;
  int i_;
  int ell_ = 0;
  AllocationSummary summary_;
  int cand_i_ = 0, cand_to_ = 0;
  bool cached_ = false;
  double cur_val_ = 0.0;
};

struct AnnealRun {
  std::unique_ptr<AnnealSpace> space;
  CellStream stream;
  int iters_done = 0;
  double best = 0.0;
  bool have_best = false;
  OptDirection dir = OptDirection::Minimize;
};

void advance(AnnealRun& run, const AnnealSchedule& schedule, int iters) {
  AnnealSchedule s = schedule;
  s.iters = iters;
  AnnealResult r = anneal_extremize(*run.space, run.dir, s, run.stream, run.iters_done, run.best,
                                    run.have_best);
  run.best = r.best_value;
  run.have_best = true;
  run.iters_done = r.iters_done;
}

}  // namespace

// ---------------------------------------------------------------------------
// ZKnownBounds
// ---------------------------------------------------------------------------

struct ZKnownBounds::Impl {
  const Dataset* data;
  const FiniteMixtureSpec* spec;
  const RandomLedger* ledger;
  BoundContext ctx;
  bool collapsed = false;
  bool exact = false;
  std::vector<BoundPair> pairs;
  // Annealed path: one run per (observation, cell, direction).
  std::vector<std::vector<AnnealRun>> lower_runs;  // [i][cell]
  std::vector<std::vector<AnnealRun>> upper_runs;

  void rebuild_pairs();
};

namespace {

// Exhaustive collapsed-envelope enumeration for small p^n.
bool collapsed_exhaustive(const Dataset& data, const FiniteMixtureSpec& spec,
                          std::vector<BoundPair>& pairs) {
  const int n = data.n(), p = spec.p;
  double states = std::pow(static_cast<double>(p), n - 1);
  if (states > 2048.0) return false;
  pairs.assign(static_cast<std::size_t>(n), {});
  std::vector<int> z(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> lo(static_cast<std::size_t>(p), 2.0);
    std::vector<double> hi(static_cast<std::size_t>(p), -1.0);
    std::fill(z.begin(), z.end(), 0);
    AllocationSummary summary(data, z, p);
    // Odometer over the other coordinates.
    std::vector<int> order;
    for (int m = 0; m < n; ++m)
      if (m != i) order.push_back(m);
    for (;;) {
      SteppedCDF f = z_collapsed_conditional(i, summary, data, spec);
      for (int k = 0; k < p; ++k) {
        lo[static_cast<std::size_t>(k)] = std::min(lo[static_cast<std::size_t>(k)], f.at(k));
        hi[static_cast<std::size_t>(k)] = std::max(hi[static_cast<std::size_t>(k)], f.at(k));
      }
      int pos = 0;
      while (pos < static_cast<int>(order.size())) {
        int m = order[static_cast<std::size_t>(pos)];
        int cur = summary.z()[static_cast<std::size_t>(m)];
        if (cur + 1 < p) {
          summary.set_allocation(m, cur + 1);
          break;
        }
        summary.set_allocation(m, 0);
        ++pos;
      }
      if (pos == static_cast<int>(order.size())) break;
    }
    repair_envelopes(lo, hi);
    pairs[static_cast<std::size_t>(i)] = {SteppedCDF{lo}, SteppedCDF{hi}};
    pairs[static_cast<std::size_t>(i)].check("collapsed z envelopes");
  }
  return true;
}

}  // namespace

ZKnownBounds::ZKnownBounds(const Dataset& data, const FiniteMixtureSpec& spec,
                           const RandomLedger& ledger, const BoundContext& ctx, bool collapsed)
    : impl_(std::make_unique<Impl>()) {
  impl_->data = &data;
  impl_->spec = &spec;
  impl_->ledger = &ledger;
  impl_->ctx = ctx;
  impl_->collapsed = collapsed;
  const int n = data.n(), p = spec.p;

  if (p == 1) {
    impl_->exact = true;
    impl_->pairs.assign(static_cast<std::size_t>(n),
                        BoundPair{SteppedCDF::point_mass(0, 1), SteppedCDF::point_mass(0, 1)});
    return;
  }

  if (collapsed) {
    if (spec.bounded() && !spec.has_known_lambda())
      throw usage_error("collapsed envelopes need the conjugate (untruncated) marginal");
    if (collapsed_exhaustive(data, spec, impl_->pairs)) {
      impl_->exact = true;
      return;
    }
  } else {
    if (!spec.bounded()) throw usage_error("bounds_z_known: bounded parameter mode required");
    if (p == 2 && ctx.optimizer == OptimizerKind::Exact2 && spec.has_known_lambda()) {
      // Exact corners; the conditional is monotone in the mixing weight.
      impl_->exact = true;
      double pi_lo = spec.pi_bounds.empty() ? 1e-6 : spec.pi_bounds[0].lo;
      double pi_hi = spec.pi_bounds.empty() ? 1.0 - 1e-6 : spec.pi_bounds[0].hi;
      impl_->pairs.reserve(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        impl_->pairs.push_back(bounds_z_two_component(i, data, spec, pi_lo, pi_hi));
      return;
    }
  }

  // General annealed path.
  impl_->lower_runs.resize(static_cast<std::size_t>(n));
  impl_->upper_runs.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int ell = 0; ell + 1 < p; ++ell) {
      for (int dir = 0; dir < 2; ++dir) {
        AnnealRun run{nullptr,
                      CellStream(ledger, 0, {Var::Anneal, anneal_slot(kAnnealZKnown, i, ell, dir)}),
                      0, 0.0, false,
                      dir == 0 ? OptDirection::Minimize : OptDirection::Maximize};
        if (collapsed) {
          auto sp = std::make_unique<CollapsedZSpace>(data, spec, i);
          sp->set_cell(ell);
          run.space = std::move(sp);
        } else {
          auto sp = std::make_unique<FiniteParamSpace>(data, spec, ctx, i);
          sp->set_cell(ell);
          run.space = std::move(sp);
        }
        advance(run, impl_->ctx.schedule, impl_->ctx.schedule.iters);
        (dir == 0 ? impl_->lower_runs : impl_->upper_runs)[static_cast<std::size_t>(i)].push_back(
            std::move(run));
      }
    }
  }
  impl_->rebuild_pairs();
}

void ZKnownBounds::Impl::rebuild_pairs() {
  const int n = data->n(), p = spec->p;
  pairs.assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    std::vector<double> lo(static_cast<std::size_t>(p), 1.0);
    std::vector<double> hi(static_cast<std::size_t>(p), 1.0);
    for (int ell = 0; ell + 1 < p; ++ell) {
      lo[static_cast<std::size_t>(ell)] =
          lower_runs[static_cast<std::size_t>(i)][static_cast<std::size_t>(ell)].best;
      hi[static_cast<std::size_t>(ell)] =
          upper_runs[static_cast<std::size_t>(i)][static_cast<std::size_t>(ell)].best;
    }
    repair_envelopes(lo, hi);
    pairs[static_cast<std::size_t>(i)] = {SteppedCDF{lo}, SteppedCDF{hi}};
    pairs[static_cast<std::size_t>(i)].check("z envelopes");
  }
}

ZKnownBounds::~ZKnownBounds() = default;

const BoundPair& ZKnownBounds::pair(int i) const {
  return impl_->pairs[static_cast<std::size_t>(i)];
}

bool ZKnownBounds::exact() const { return impl_->exact; }

void ZKnownBounds::extend() {
  if (impl_->exact) return;
  for (auto& runs : impl_->lower_runs)
    for (auto& run : runs) advance(run, impl_->ctx.schedule, impl_->ctx.schedule.extension);
  for (auto& runs : impl_->upper_runs)
    for (auto& run : runs) advance(run, impl_->ctx.schedule, impl_->ctx.schedule.extension);
  impl_->rebuild_pairs();
}

BoundPair bounds_z_two_component(int i, const Dataset& data, const FiniteMixtureSpec& spec,
                                 double pi_low, double pi_high) {
  if (spec.p != 2 || !spec.has_known_lambda())
    throw usage_error("bounds_z_two_component: needs p=2 with known precisions");
  if (!(pi_low > 0.0) || !(pi_low <= pi_high) || !(pi_high < 1.0))
    throw usage_error("bounds_z_two_component: bad mixing-weight range");
  const double yi = data.y[static_cast<std::size_t>(i)];
  auto value = [&](double mu1, double mu2, double pi) {
    double l1 = std::log(pi) + log_component_density(yi, mu1, spec.lambda_known[0]);
    double l2 = std::log1p(-pi) + log_component_density(yi, mu2, spec.lambda_known[1]);
    double m = std::max(l1, l2);
    double w1 = std::exp(l1 - m), w2 = std::exp(l2 - m);
    return w1 / (w1 + w2);
  };
  CornerResult at_low = corner_extremize([&](double a, double b) { return value(a, b, pi_low); },
                                         yi, spec.mu_bounds[0], yi, spec.mu_bounds[1]);
  CornerResult at_high = corner_extremize([&](double a, double b) { return value(a, b, pi_high); },
                                          yi, spec.mu_bounds[0], yi, spec.mu_bounds[1]);
  std::vector<double> lo{at_low.min_value, 1.0};
  std::vector<double> hi{at_high.max_value, 1.0};
  repair_envelopes(lo, hi);
  BoundPair pair{SteppedCDF{lo}, SteppedCDF{hi}};
  pair.check("two-component z envelopes");
  return pair;
}

namespace {

// Means-only walk at a fixed mixing weight; the binary conditional's value
// at its first cell is the objective.
class TwoCompMuSpace final : public AnnealSpace {
 public:
  TwoCompMuSpace(const Dataset& data, const FiniteMixtureSpec& spec, const BoundContext& ctx,
                 int i, double pi)
      : data_(&data), spec_(&spec), i_(i), pi_(pi) {
    mu_[0] = spec.mu_bounds[0].mid();
    mu_[1] = spec.mu_bounds[1].mid();
    step_[0] = scaled_step(ctx.mu_step, spec.mu_bounds[0].width(), ctx.step_scale);
    step_[1] = scaled_step(ctx.mu_step, spec.mu_bounds[1].width(), ctx.step_scale);
  }

  bool propose(CellStream& stream) override {
    cand_j_ = stream.next() < 0.5 ? 0 : 1;
    cand_val_ = mu_[cand_j_] + step_[cand_j_] * normal_from_uniform(stream.next());
    return spec_->mu_bounds[static_cast<std::size_t>(cand_j_)].contains(cand_val_);
  }
  double current_value() override { return evaluate(mu_[0], mu_[1]); }
  double candidate_value() override {
    double m0 = cand_j_ == 0 ? cand_val_ : mu_[0];
    double m1 = cand_j_ == 1 ? cand_val_ : mu_[1];
    return evaluate(m0, m1);
  }
  void commit() override { mu_[cand_j_] = cand_val_; }
  void mark_best() override {}

 private:
  double evaluate(double m0, double m1) const {
    const double yi = data_->y[static_cast<std::size_t>(i_)];
    double l1 = std::log(pi_) + log_component_density(yi, m0, spec_->lambda_known[0]);
    double l2 = std::log1p(-pi_) + log_component_density(yi, m1, spec_->lambda_known[1]);
    double m = std::max(l1, l2);
    double w1 = std::exp(l1 - m), w2 = std::exp(l2 - m);
    return w1 / (w1 + w2);
  }

  const Dataset* data_;
  const FiniteMixtureSpec* spec_;
  int i_;
  double pi_;
  double mu_[2];
  double step_[2];
  int cand_j_ = 0;
  double cand_val_ = 0.0;
};

}  // namespace

// ---------------------------------------------------------------------------
// DP allocation envelopes.
// ---------------------------------------------------------------------------

namespace {

std::vector<int> canonical_fill(const CoalescedSets& frozen, int M) {
  std::vector<int> s(static_cast<std::size_t>(M));
  int pm = -1;
  for (int j = 0; j < M; ++j) {
    const auto& fv = frozen.s[static_cast<std::size_t>(j)];
    s[static_cast<std::size_t>(j)] = fv.has_value() ? *fv : pm + 1;
    pm = std::max(pm, s[static_cast<std::size_t>(j)]);
  }
  if (!canonical_valid(s)) throw invariant_violation_error("frozen labels are not canonical");
  return s;
}

class DpZSpace final : public AnnealSpace {
 public:
  DpZSpace(const Dataset& data, const DPMixtureSpec& spec, const CoalescedSets& frozen,
           const BoundContext& ctx, int i)
      : data_(&data), spec_(&spec), i_(i), M_(spec.M) {
    s_ = canonical_fill(frozen, M_);
    for (int j = 0; j < M_; ++j)
      free_s_.push_back(frozen.s[static_cast<std::size_t>(j)].has_value() ? 0 : 1);
    mu_.assign(static_cast<std::size_t>(M_), spec.mu_bounds.mid());
    lam_.assign(static_cast<std::size_t>(M_),
                spec.has_known_lambda() ? *spec.lambda_known : spec.lambda_bounds.mid());
    mu_step_ = scaled_step(ctx.mu_step, spec.mu_bounds.width(), ctx.step_scale);
    lam_step_ = spec.has_known_lambda()
                    ? 0.0
                    : scaled_step(ctx.lambda_step, spec.lambda_bounds.width(), ctx.step_scale);
    cand_s_ = s_;
    cand_mu_ = mu_;
    cand_lam_ = lam_;
  }

  void set_cell(int ell) {
    ell_ = ell;
    cached_ = false;
  }
  void set_step_scale(double v) { scale_ = v; }

  void adopt_state(const DpZSpace& other) {
    s_ = other.s_;
    mu_ = other.mu_;
    lam_ = other.lam_;
    cached_ = false;
  }

  bool propose(CellStream& stream) override {
    cand_s_ = s_;
    cand_mu_ = mu_;
    cand_lam_ = lam_;
    int kinds = spec_->has_known_lambda() ? 2 : 3;
    int kind = static_cast<int>(stream.next() * kinds);
    if (kind == 0 && has_free_s()) {
      int j = pick_free_s(stream);
      int pm = 0;
      for (int m = 0; m < j; ++m) pm = std::max(pm, cand_s_[static_cast<std::size_t>(m)]);
      int label = static_cast<int>(stream.next() * (pm + 2));
      cand_s_[static_cast<std::size_t>(j)] = label;
      if (!canonical_valid(cand_s_)) return false;
    } else if (kind <= 1) {
      int l = static_cast<int>(stream.next() * M_);
      double nm = cand_mu_[static_cast<std::size_t>(l)] +
                  mu_step_ * scale_ * normal_from_uniform(stream.next());
      if (!spec_->mu_bounds.contains(nm)) return false;
      cand_mu_[static_cast<std::size_t>(l)] = nm;
    } else {
      int l = static_cast<int>(stream.next() * M_);
      double nl = cand_lam_[static_cast<std::size_t>(l)] +
                  lam_step_ * scale_ * normal_from_uniform(stream.next());
      if (!spec_->lambda_bounds.contains(nl)) return false;
      cand_lam_[static_cast<std::size_t>(l)] = nl;
    }
    return true;
  }

  double current_value() override {
    if (!cached_) {
      cur_ = evaluate(s_, mu_, lam_);
      cached_ = true;
    }
    return cur_;
  }
  double candidate_value() override { return evaluate(cand_s_, cand_mu_, cand_lam_); }
  void commit() override {
    s_ = cand_s_;
    mu_ = cand_mu_;
    lam_ = cand_lam_;
    cached_ = false;
  }
  void mark_best() override {}

 private:
  bool has_free_s() const {
    for (int v : free_s_)
      if (v) return true;
    return false;
  }
  int pick_free_s(CellStream& stream) const {
    std::vector<int> idx;
    for (int j = 0; j < M_; ++j)
      if (free_s_[static_cast<std::size_t>(j)]) idx.push_back(j);
    return idx[static_cast<std::size_t>(stream.next() * idx.size())];
  }

  double evaluate(const std::vector<int>& s, const std::vector<double>& mu,
                  const std::vector<double>& lam) const {
    const double yi = data_->y[static_cast<std::size_t>(i_)];
    double m = -1e308;
    std::vector<double> lw(static_cast<std::size_t>(M_));
    for (int j = 0; j < M_; ++j) {
      int l = s[static_cast<std::size_t>(j)];
      lw[static_cast<std::size_t>(j)] = log_component_density(
          yi, mu[static_cast<std::size_t>(l)], lam[static_cast<std::size_t>(l)]);
      m = std::max(m, lw[static_cast<std::size_t>(j)]);
    }
    double num = 0.0, den = 0.0;
    for (int j = 0; j < M_; ++j) {
      double w = std::exp(lw[static_cast<std::size_t>(j)] - m);
      den += w;
      if (j <= ell_) num += w;
    }
    return num / den;
  }

  const Dataset* data_;
  const DPMixtureSpec* spec_;
  int i_, M_, ell_ = 0;
  std::vector<int> s_, cand_s_, free_s_;
  std::vector<double> mu_, lam_, cand_mu_, cand_lam_;
  double mu_step_, lam_step_, scale_ = 1.0;
  bool cached_ = false;
  double cur_ = 0.0;
};

class AnnealedBuild final : public BoundBuild {
 public:
  AnnealedBuild(int support, AnnealSchedule schedule) : support_(support), schedule_(schedule) {}

  std::vector<AnnealRun> lower, upper;

  const BoundPair& pair() const override { return pair_; }
  bool exact() const override { return false; }
  void extend() override {
    for (auto& run : lower) advance(run, schedule_, schedule_.extension);
    for (auto& run : upper) advance(run, schedule_, schedule_.extension);
    rebuild();
  }
  void rebuild() {
    std::vector<double> lo(static_cast<std::size_t>(support_), 1.0);
    std::vector<double> hi(static_cast<std::size_t>(support_), 1.0);
    for (std::size_t ell = 0; ell < lower.size(); ++ell) {
      lo[ell] = lower[ell].best;
      hi[ell] = upper[ell].best;
    }
    repair_envelopes(lo, hi);
    pair_ = {SteppedCDF{lo}, SteppedCDF{hi}};
    pair_.check("annealed envelopes");
  }

 private:
  int support_;
  AnnealSchedule schedule_;
  BoundPair pair_;
};

class ExactBuild final : public BoundBuild {
 public:
  explicit ExactBuild(BoundPair pair) : pair_(std::move(pair)) {}
  const BoundPair& pair() const override { return pair_; }
  bool exact() const override { return true; }
  void extend() override {}

 private:
  BoundPair pair_;
};

// Exhaustive two-component allocation envelopes (known precision).
BoundPair z_dp_exact2(int i, const Dataset& data, const DPMixtureSpec& spec,
                      const CoalescedSets& frozen) {
  const double yi = data.y[static_cast<std::size_t>(i)];
  const double lam = *spec.lambda_known;
  auto g = [&](double mu) { return std::exp(-0.5 * lam * (yi - mu) * (yi - mu)); };
  double lo = 2.0, hi = -1.0;
  const auto& s1 = frozen.s[1];
  bool allow_tied = !s1.has_value() || *s1 == 0;
  bool allow_split = !s1.has_value() || *s1 == 1;
  if (allow_tied) {
    lo = std::min(lo, 0.5);
    hi = std::max(hi, 0.5);
  }
  if (allow_split) {
    CornerResult r = corner_extremize(
        [&](double a, double b) { return g(a) / (g(a) + g(b)); }, yi, spec.mu_bounds, yi,
        spec.mu_bounds);
    lo = std::min(lo, r.min_value);
    hi = std::max(hi, r.max_value);
  }
  std::vector<double> l{lo, 1.0}, h{hi, 1.0};
  repair_envelopes(l, h);
  BoundPair pair{SteppedCDF{l}, SteppedCDF{h}};
  pair.check("exact2 z envelopes");
  return pair;
}

}  // namespace

std::unique_ptr<BoundBuild> make_z_dp_bounds(int i, const Dataset& data, const DPMixtureSpec& spec,
                                             const CoalescedSets& frozen, const RandomLedger& ledger,
                                             std::int64_t t, const BoundContext& ctx) {
  if (!spec.truncated) throw usage_error("make_z_dp_bounds: truncated mode required");
  const int M = spec.M;
  if (M == 1)
    return std::make_unique<ExactBuild>(
        BoundPair{SteppedCDF::point_mass(0, 1), SteppedCDF::point_mass(0, 1)});
  if (ctx.optimizer == OptimizerKind::Exact2) {
    if (M != 2 || !spec.has_known_lambda())
      throw usage_error("exact2 optimizer covers two components with known precision");
    return std::make_unique<ExactBuild>(z_dp_exact2(i, data, spec, frozen));
  }
  auto build = std::make_unique<AnnealedBuild>(M, ctx.schedule);
  const DpZSpace* prev[2] = {nullptr, nullptr};
  for (int ell = 0; ell + 1 < M; ++ell) {
    for (int dir = 0; dir < 2; ++dir) {
      AnnealRun run{nullptr, CellStream(ledger, t, {Var::Anneal, anneal_slot(kAnnealZDp, i, ell, dir)}),
                    0, 0.0, false, dir == 0 ? OptDirection::Minimize : OptDirection::Maximize};
      auto sp = std::make_unique<DpZSpace>(data, spec, frozen, ctx, i);
      if (prev[dir]) sp->adopt_state(*prev[dir]);
      sp->set_cell(ell);
      DpZSpace* raw = sp.get();
      run.space = std::move(sp);
      advance(run, ctx.schedule, ctx.schedule.iters);
      prev[dir] = raw;
      (dir == 0 ? build->lower : build->upper).push_back(std::move(run));
    }
  }
  build->rebuild();
  return build;
}

std::unique_ptr<BoundBuild> make_z_two_component_bounds(int i, const Dataset& data,
                                                        const FiniteMixtureSpec& spec,
                                                        double pi_low, double pi_high,
                                                        const RandomLedger& ledger, std::int64_t t,
                                                        const BoundContext& ctx) {
  if (spec.p != 2 || !spec.has_known_lambda())
    throw usage_error("make_z_two_component_bounds: needs p=2 with known precisions");
  if (ctx.optimizer == OptimizerKind::Exact2)
    return std::make_unique<ExactBuild>(bounds_z_two_component(i, data, spec, pi_low, pi_high));

  auto build = std::make_unique<AnnealedBuild>(2, ctx.schedule);
  for (int dir = 0; dir < 2; ++dir) {
    AnnealRun run{nullptr,
                  CellStream(ledger, t, {Var::Anneal, anneal_slot(kAnnealZKnown, i, 0, dir)}),
                  0, 0.0, false, dir == 0 ? OptDirection::Minimize : OptDirection::Maximize};
    run.space = std::make_unique<TwoCompMuSpace>(data, spec, ctx, i, dir == 0 ? pi_low : pi_high);
    advance(run, ctx.schedule, ctx.schedule.iters);
    (dir == 0 ? build->lower : build->upper).push_back(std::move(run));
  }
  build->rebuild();
  return build;
}

// ---------------------------------------------------------------------------
// Configuration envelopes.
// ---------------------------------------------------------------------------

namespace {

struct CStructure {
  // Component layout on this case's own grid, in label order: multiplicity
  // contributed by frozen slots, plus where the free mass sits.
  std::vector<int> base_mult;  // per existing component
  int free_others = 0;         // free slots of S_{-j}
  bool sup_case = false;       // free mass joins one target component
  std::vector<int> frozen_labels;
};

// Frozen labels usable while bounding slot j: slot 0 plus slots after j
// (earlier slots were already refreshed inside the sweep); slot j itself is
// excluded.
std::vector<std::pair<int, int>> applicable_frozen(const CoalescedSets& frozen, int j) {
  std::vector<std::pair<int, int>> out;  // (slot, label)
  const int M = static_cast<int>(frozen.s.size());
  for (int m = 0; m < M; ++m) {
    if (m == j) continue;
    if (m != 0 && m < j) continue;
    if (frozen.s[static_cast<std::size_t>(m)].has_value())
      out.emplace_back(m, *frozen.s[static_cast<std::size_t>(m)]);
  }
  return out;
}

CStructure c_structure(const CoalescedSets& frozen, int j, int M, bool sup_case) {
  auto fr = applicable_frozen(frozen, j);
  std::vector<int> labels;
  for (auto& [slot, label] : fr)
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
  std::sort(labels.begin(), labels.end());
  std::vector<int> frozen_mult(labels.size(), 0);
  for (auto& [slot, label] : fr) {
    auto it = std::find(labels.begin(), labels.end(), label);
    ++frozen_mult[static_cast<std::size_t>(it - labels.begin())];
  }
  int free_others = (M - 1) - static_cast<int>(fr.size());

  CStructure st;
  st.sup_case = sup_case;
  st.free_others = free_others;
  st.frozen_labels = labels;
  if (sup_case) {
    st.base_mult = frozen_mult;
    if (st.base_mult.empty()) st.base_mult.push_back(0);  // one shared free component
  } else {
    // Free slots count as singleton components; interleave them into the
    // label gaps left by the frozen labels, earliest first, which keeps
    // every prefix mass as small as any admissible ordering allows.
    const int total = static_cast<int>(labels.size()) + free_others;
    int singles = free_others;
    std::size_t fi = 0;
    int label = 0;
    while (static_cast<int>(st.base_mult.size()) < total) {
      if (fi < labels.size() && labels[fi] == label) {
        st.base_mult.push_back(frozen_mult[fi]);
        ++fi;
      } else if (singles > 0) {
        st.base_mult.push_back(1);
        --singles;
      } else if (fi < labels.size()) {
        st.base_mult.push_back(frozen_mult[fi]);
        ++fi;
      }
      ++label;
    }
  }
  return st;
}

class DpCSpace final : public AnnealSpace {
 public:
  DpCSpace(const Dataset& data, const DPMixtureSpec& spec, const CoalescedSets& frozen,
           const BoundContext& ctx, int j, CStructure structure)
      : data_(&data), spec_(&spec), j_(j), st_(std::move(structure)),
        slots_(data, initial_z(frozen, data.n(), spec.M), spec.M) {
    for (int i = 0; i < data.n(); ++i)
      if (!frozen.z[static_cast<std::size_t>(i)].has_value()) free_z_.push_back(i);
    const int k = static_cast<int>(st_.base_mult.size());
    mu_.assign(static_cast<std::size_t>(k), spec.mu_bounds.mid());
    lam_.assign(static_cast<std::size_t>(k),
                spec.has_known_lambda() ? *spec.lambda_known : spec.lambda_bounds.mid());
    aux_mu_ = spec.mu_bounds.mid();
    aux_lam_ = spec.has_known_lambda() ? *spec.lambda_known : spec.lambda_bounds.mid();
    alpha_ = spec.alpha_random ? spec.alpha_bounds.mid() : spec.alpha;
    mu_step_ = scaled_step(ctx.mu_step, spec.mu_bounds.width(), ctx.step_scale);
    lam_step_ = spec.has_known_lambda()
                    ? 0.0
                    : scaled_step(ctx.lambda_step, spec.lambda_bounds.width(), ctx.step_scale);
    alpha_step_ =
        spec.alpha_random ? scaled_step(ctx.alpha_step, spec.alpha_bounds.width(), ctx.step_scale) : 0.0;
  }

  void set_cell(int ell) {
    ell_ = ell;
    cached_ = false;
  }
  void set_step_scale(double v) { scale_ = v; }

  bool propose(CellStream& stream) override {
    kind_ = -1;
    double u = stream.next();
    int kinds = 2;  // theta coords, aux
    if (!free_z_.empty()) ++kinds;
    if (spec_->alpha_random) ++kinds;
    if (st_.sup_case && st_.base_mult.size() > 1) ++kinds;
    int pick = static_cast<int>(u * kinds);
    int cursor = 0;
    if (pick == cursor++) {  // component parameter walk
      cand_l_ = static_cast<int>(stream.next() * mu_.size());
      bool move_mu = spec_->has_known_lambda() || stream.next() < 0.5;
      if (move_mu) {
        cand_val_ = mu_[static_cast<std::size_t>(cand_l_)] +
                    mu_step_ * scale_ * normal_from_uniform(stream.next());
        if (!spec_->mu_bounds.contains(cand_val_)) return false;
        kind_ = 0;
      } else {
        cand_val_ = lam_[static_cast<std::size_t>(cand_l_)] +
                    lam_step_ * scale_ * normal_from_uniform(stream.next());
        if (!spec_->lambda_bounds.contains(cand_val_)) return false;
        kind_ = 1;
      }
      return true;
    }
    if (pick == cursor++) {  // auxiliary parameter walk
      bool move_mu = spec_->has_known_lambda() || stream.next() < 0.5;
      if (move_mu) {
        cand_val_ = aux_mu_ + mu_step_ * scale_ * normal_from_uniform(stream.next());
        if (!spec_->mu_bounds.contains(cand_val_)) return false;
        kind_ = 2;
      } else {
        cand_val_ = aux_lam_ + lam_step_ * scale_ * normal_from_uniform(stream.next());
        if (!spec_->lambda_bounds.contains(cand_val_)) return false;
        kind_ = 3;
      }
      return true;
    }
    if (!free_z_.empty() && pick == cursor++) {
      cand_i_ = free_z_[static_cast<std::size_t>(stream.next() * free_z_.size())];
      cand_slot_ = static_cast<int>(stream.next() * spec_->M);
      kind_ = 4;
      return true;
    }
    if (spec_->alpha_random && pick == cursor++) {
      cand_val_ = alpha_ + alpha_step_ * scale_ * normal_from_uniform(stream.next());
      if (!spec_->alpha_bounds.contains(cand_val_)) return false;
      kind_ = 5;
      return true;
    }
    // join-target move (sup case)
    cand_l_ = static_cast<int>(stream.next() * st_.base_mult.size());
    kind_ = 6;
    return true;
  }

  double current_value() override {
    if (!cached_) {
      cur_ = evaluate();
      cached_ = true;
    }
    return cur_;
  }

  double candidate_value() override {
    switch (kind_) {
      case 0: {
        double old = mu_[static_cast<std::size_t>(cand_l_)];
        mu_[static_cast<std::size_t>(cand_l_)] = cand_val_;
        double v = evaluate();
        mu_[static_cast<std::size_t>(cand_l_)] = old;
        return v;
      }
      case 1: {
        double old = lam_[static_cast<std::size_t>(cand_l_)];
        lam_[static_cast<std::size_t>(cand_l_)] = cand_val_;
        double v = evaluate();
        lam_[static_cast<std::size_t>(cand_l_)] = old;
        return v;
      }
      case 2: {
        double old = aux_mu_;
        aux_mu_ = cand_val_;
        double v = evaluate();
        aux_mu_ = old;
        return v;
      }
      case 3: {
        double old = aux_lam_;
        aux_lam_ = cand_val_;
        double v = evaluate();
        aux_lam_ = old;
        return v;
      }
      case 4: {
        int old = slots_.z()[static_cast<std::size_t>(cand_i_)];
        slots_.set_allocation(cand_i_, cand_slot_);
        double v = evaluate();
        slots_.set_allocation(cand_i_, old);
        return v;
      }
      case 5: {
        double old = alpha_;
        alpha_ = cand_val_;
        double v = evaluate();
        alpha_ = old;
        return v;
      }
      default: {
        int old = join_target_;
        join_target_ = cand_l_;
        double v = evaluate();
        join_target_ = old;
        return v;
      }
    }
  }

  void commit() override {
    switch (kind_) {
      case 0: mu_[static_cast<std::size_t>(cand_l_)] = cand_val_; break;
      case 1: lam_[static_cast<std::size_t>(cand_l_)] = cand_val_; break;
      case 2: aux_mu_ = cand_val_; break;
      case 3: aux_lam_ = cand_val_; break;
      case 4: slots_.set_allocation(cand_i_, cand_slot_); break;
      case 5: alpha_ = cand_val_; break;
      default: join_target_ = cand_l_; break;
    }
    cached_ = false;
  }
  void mark_best() override {}

 private:
  static std::vector<int> initial_z(const CoalescedSets& frozen, int n, int M) {
    std::vector<int> z(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
      if (frozen.z[static_cast<std::size_t>(i)].has_value())
        z[static_cast<std::size_t>(i)] = std::min(M - 1, *frozen.z[static_cast<std::size_t>(i)]);
    return z;
  }

  double evaluate() {
    const int n_j = slots_.count(j_);
    const double ybar = slots_.mean(j_);
    const double ss = slots_.ss(j_);
    const int k = static_cast<int>(st_.base_mult.size());
    std::vector<double> lw(static_cast<std::size_t>(k) + 1);
    double m = -1e308;
    for (int l = 0; l < k; ++l) {
      int mult = st_.base_mult[static_cast<std::size_t>(l)];
      if (st_.sup_case && l == join_target_) mult += st_.free_others;
      if (mult == 0) {
        lw[static_cast<std::size_t>(l)] = -1e308;
        continue;
      }
      lw[static_cast<std::size_t>(l)] =
          std::log(static_cast<double>(mult)) +
          log_occurrence_weight(n_j, ybar, ss, mu_[static_cast<std::size_t>(l)],
                                lam_[static_cast<std::size_t>(l)]);
      m = std::max(m, lw[static_cast<std::size_t>(l)]);
    }
    lw[static_cast<std::size_t>(k)] =
        std::log(alpha_) + log_occurrence_weight(n_j, ybar, ss, aux_mu_, aux_lam_);
    m = std::max(m, lw[static_cast<std::size_t>(k)]);
    double num = 0.0, den = 0.0;
    for (int l = 0; l <= k; ++l) {
      double w = std::exp(lw[static_cast<std::size_t>(l)] - m);
      den += w;
      if (l <= ell_) num += w;
    }
    return num / den;
  }

  const Dataset* data_;
  const DPMixtureSpec* spec_;
  int j_;
  CStructure st_;
  AllocationSummary slots_;
  std::vector<int> free_z_;
  std::vector<double> mu_, lam_;
  double aux_mu_, aux_lam_, alpha_;
  int join_target_ = 0;
  int ell_ = 0;
  double mu_step_, lam_step_, alpha_step_, scale_ = 1.0;
  int kind_ = -1, cand_l_ = 0, cand_i_ = 0, cand_slot_ = 0;
  double cand_val_ = 0.0;
  bool cached_ = false;
  double cur_ = 0.0;
};

// Embeds a CDF whose new-component cell is its last one onto the common
// grid, aligning the new-component cells.
std::vector<double> embed_on_grid(std::span<const double> own, int grid) {
  const int own_k = static_cast<int>(own.size()) - 1;
  std::vector<double> out(static_cast<std::size_t>(grid), 1.0);
  for (int m = 0; m + 1 < grid; ++m)
    out[static_cast<std::size_t>(m)] = m < own_k ? own[static_cast<std::size_t>(m)]
                                                 : own[static_cast<std::size_t>(own_k - 1)];
  return out;
}

// Exhaustive two-component configuration envelopes (known precision):
// all free-allocation vectors x parameter corners.
BoundPair c_exact2(int j, const Dataset& data, const DPMixtureSpec& spec,
                   const CoalescedSets& frozen) {
  const double lam = *spec.lambda_known;
  const int n = data.n();
  std::vector<int> free_idx;
  std::vector<int> z(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    if (frozen.z[static_cast<std::size_t>(i)].has_value())
      z[static_cast<std::size_t>(i)] = *frozen.z[static_cast<std::size_t>(i)];
    else
      free_idx.push_back(i);
  }
  double alpha_lo = spec.alpha_random ? spec.alpha_bounds.lo : spec.alpha;
  double alpha_hi = spec.alpha_random ? spec.alpha_bounds.hi : spec.alpha;
  double lo = 2.0, hi = -1.0;
  AllocationSummary slots(data, z, spec.M);
  const std::size_t combos = std::size_t{1} << free_idx.size();
  for (std::size_t mask = 0; mask < combos; ++mask) {
    for (std::size_t b = 0; b < free_idx.size(); ++b)
      slots.set_allocation(free_idx[b], (mask >> b) & 1 ? 1 : 0);
    const int n_j = slots.count(j);
    const double ybar = slots.mean(j);
    const double ss = slots.ss(j);
    const double anchor = ybar;
    const double cand[3] = {spec.mu_bounds.clamp(anchor), spec.mu_bounds.lo, spec.mu_bounds.hi};
    for (double mu_exist : cand)
      for (double mu_new : cand)
        for (double a : {alpha_lo, alpha_hi}) {
          double lq = log_occurrence_weight(n_j, ybar, ss, mu_exist, lam);
          double lqa = std::log(a) + log_occurrence_weight(n_j, ybar, ss, mu_new, lam);
          double m = std::max(lq, lqa);
          double v = std::exp(lq - m) / (std::exp(lq - m) + std::exp(lqa - m));
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
  }
  std::vector<double> l{lo, 1.0}, h{hi, 1.0};
  repair_envelopes(l, h);
  BoundPair pair{SteppedCDF{l}, SteppedCDF{h}};
  pair.check("exact2 c envelopes");
  return pair;
}

}  // namespace

std::unique_ptr<BoundBuild> make_c_bounds(int j, const Dataset& data, const DPMixtureSpec& spec,
                                          const CoalescedSets& frozen, const RandomLedger& ledger,
                                          std::int64_t t, const BoundContext& ctx, CBoundInfo& info) {
  if (!spec.truncated) throw usage_error("make_c_bounds: truncated mode required");
  const int M = spec.M;
  CStructure sup = c_structure(frozen, j, M, true);
  CStructure inf = c_structure(frozen, j, M, false);
  info.k_sup = static_cast<int>(sup.base_mult.size());
  info.k_inf = static_cast<int>(inf.base_mult.size());
  info.grid = info.k_inf + 1;
  info.frozen_labels = inf.frozen_labels;

  if (M == 1) {
    // Single slot: only the new-component cell exists.
    return std::make_unique<ExactBuild>(
        BoundPair{SteppedCDF::point_mass(0, 1), SteppedCDF::point_mass(0, 1)});
  }

  if (ctx.optimizer == OptimizerKind::Exact2) {
    if (M != 2 || !spec.has_known_lambda())
      throw usage_error("exact2 optimizer covers two components with known precision");
    return std::make_unique<ExactBuild>(c_exact2(j, data, spec, frozen));
  }

  // Annealed: optimize each own-grid cell, then embed on the common grid.
  class CBuild final : public BoundBuild {
   public:
    CBuild(int grid, int k_sup, AnnealSchedule schedule)
        : grid_(grid), k_sup_(k_sup), schedule_(schedule) {}
    std::vector<AnnealRun> lower, upper;

    const BoundPair& pair() const override { return pair_; }
    bool exact() const override { return false; }
    void extend() override {
      for (auto& run : lower) advance(run, schedule_, schedule_.extension);
      for (auto& run : upper) advance(run, schedule_, schedule_.extension);
      rebuild();
    }
    void rebuild() {
      std::vector<double> sup_own(static_cast<std::size_t>(k_sup_) + 1, 1.0);
      for (std::size_t ell = 0; ell < upper.size(); ++ell) sup_own[ell] = upper[ell].best;
      std::vector<double> lo(static_cast<std::size_t>(grid_), 1.0);
      for (std::size_t ell = 0; ell < lower.size(); ++ell) lo[ell] = lower[ell].best;
      std::vector<double> hi = embed_on_grid(sup_own, grid_);
      repair_envelopes(lo, hi);
      pair_ = {SteppedCDF{lo}, SteppedCDF{hi}};
      pair_.check("c envelopes");
    }

   private:
    int grid_, k_sup_;
    AnnealSchedule schedule_;
    BoundPair pair_;
  };

  auto build = std::make_unique<CBuild>(info.grid, info.k_sup, ctx.schedule);
  for (int ell = 0; ell < info.k_inf; ++ell) {
    AnnealRun run{nullptr, CellStream(ledger, t, {Var::Anneal, anneal_slot(kAnnealC, j, ell, 0)}),
                  0, 0.0, false, OptDirection::Minimize};
    auto sp = std::make_unique<DpCSpace>(data, spec, frozen, ctx, j, inf);
    sp->set_cell(ell);
    run.space = std::move(sp);
    advance(run, ctx.schedule, ctx.schedule.iters);
    build->lower.push_back(std::move(run));
  }
  for (int ell = 0; ell < info.k_sup; ++ell) {
    AnnealRun run{nullptr, CellStream(ledger, t, {Var::Anneal, anneal_slot(kAnnealC, j, ell, 1)}),
                  0, 0.0, false, OptDirection::Maximize};
    auto sp = std::make_unique<DpCSpace>(data, spec, frozen, ctx, j, sup);
    sp->set_cell(ell);
    run.space = std::move(sp);
    advance(run, ctx.schedule, ctx.schedule.iters);
    build->upper.push_back(std::move(run));
  }
  build->rebuild();
  return build;
}

std::optional<CfgOp> interpret_coalesced_c(int value, int j, int M, const CBoundInfo& info,
                                           const CoalescedSets& frozen) {
  if (value == info.grid - 1) return CfgOp{CfgOp::Fresh, 0};
  auto fr = applicable_frozen(frozen, j);
  // All other slots pinned: the index picks among the frozen labels directly.
  if (static_cast<int>(fr.size()) == M - 1) {
    if (value >= static_cast<int>(info.frozen_labels.size())) return std::nullopt;
    int label = info.frozen_labels[static_cast<std::size_t>(value)];
    for (auto& [slot, lab] : fr)
      if (lab == label) return CfgOp{CfgOp::JoinSlot, slot};
    return std::nullopt;
  }
  // Labels 0..value all pinned by frozen slots: the referenced component is
  // the class of the frozen slot labeled `value`.
  bool prefix_ok = true;
  for (int u = 0; u <= value; ++u) {
    bool found = false;
    for (auto& [slot, lab] : fr)
      if (lab == u) found = true;
    if (!found) {
      prefix_ok = false;
      break;
    }
  }
  if (prefix_ok) {
    for (auto& [slot, lab] : fr)
      if (lab == value) return CfgOp{CfgOp::JoinSlot, slot};
  }
  if (M == 2 && value == 0) return CfgOp{CfgOp::JoinSlot, 1 - j};
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Label envelopes.
// ---------------------------------------------------------------------------

namespace {

// Equality structure over slots induced by pinned and proposed
// configuration operations: free slots pick an atom, pinned fresh slots own
// a dedicated atom, pinned joins union with their anchor's class.
class SLabelStructure {
 public:
  SLabelStructure(const CoalescedSets& frozen, int j, int M) : M_(M) {
    for (int m = 0; m < M; ++m) {
      const auto& op = frozen.c[static_cast<std::size_t>(m)];
      if (op.has_value()) {
        ops_.push_back(*op);
        if (op->kind == CfgOp::Fresh) fresh_slots_.push_back(m);
      } else {
        ops_.push_back(CfgOp{CfgOp::JoinIndex, -1});  // marks a free slot
        free_slots_.push_back(m);
      }
    }
    (void)j;
    atoms_ = M;
    atom_of_free_.assign(free_slots_.size(), 0);
    for (std::size_t f = 0; f < free_slots_.size(); ++f)
      atom_of_free_[f] = free_slots_[f];  // start all distinct
  }

  int free_count() const { return static_cast<int>(free_slots_.size()); }
  int atom_universe() const { return atoms_ + static_cast<int>(fresh_slots_.size()); }

  void set_atom(int f, int atom) { atom_of_free_[static_cast<std::size_t>(f)] = atom; }
  int atom(int f) const { return atom_of_free_[static_cast<std::size_t>(f)]; }

  // Canonical label of `slot`, or -1 if the assignment violates a pinned
  // fresh op (its class may not contain an earlier slot).
  int label_of(int slot) const {
    std::vector<int> parent(static_cast<std::size_t>(M_));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
      while (parent[static_cast<std::size_t>(x)] != x) {
        parent[static_cast<std::size_t>(x)] =
            parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        x = parent[static_cast<std::size_t>(x)];
      }
      return x;
    };
    auto unite = [&](int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); };

    // Atom grouping: free slots sharing an atom tie; a free slot sharing a
    // pinned fresh slot's dedicated atom ties with it.
    std::vector<int> atom_owner(static_cast<std::size_t>(atom_universe()), -1);
    for (std::size_t idx = 0; idx < fresh_slots_.size(); ++idx)
      atom_owner[static_cast<std::size_t>(atoms_) + idx] = fresh_slots_[idx];
    for (int f = 0; f < free_count(); ++f) {
      int a = atom_of_free_[static_cast<std::size_t>(f)];
      int& owner = atom_owner[static_cast<std::size_t>(a)];
      if (owner < 0)
        owner = free_slots_[static_cast<std::size_t>(f)];
      else
        unite(free_slots_[static_cast<std::size_t>(f)], owner);
    }
    for (int m = 0; m < M_; ++m) {
      const CfgOp& op = ops_[static_cast<std::size_t>(m)];
      if (op.kind == CfgOp::JoinSlot) unite(m, op.value);
    }
    // Pinned fresh slots must not share a class with any earlier slot.
    for (int fs : fresh_slots_) {
      int root = find(fs);
      for (int m = 0; m < fs; ++m)
        if (find(m) == root) return -1;
    }
    // First-appearance label of `slot`.
    std::vector<int> seen;
    for (int m = 0; m <= slot; ++m) {
      int root = find(m);
      auto it = std::find(seen.begin(), seen.end(), root);
      if (it == seen.end()) {
        seen.push_back(root);
        if (m == slot) return static_cast<int>(seen.size()) - 1;
      } else if (m == slot) {
        return static_cast<int>(it - seen.begin());
      }
    }
    return 0;
  }

 private:
  int M_;
  int atoms_;
  std::vector<CfgOp> ops_;
  std::vector<int> free_slots_;
  std::vector<int> fresh_slots_;
  std::vector<int> atom_of_free_;
};

class SLabelSpaceImpl final : public LabelStateSpace {
 public:
  SLabelSpaceImpl(SLabelStructure structure, int target_slot)
      : st_(std::move(structure)), slot_(target_slot) {}

  bool propose(CellStream& stream) override {
    if (st_.free_count() == 0) return false;
    cand_f_ = static_cast<int>(stream.next() * st_.free_count());
    cand_atom_ = static_cast<int>(stream.next() * st_.atom_universe());
    int old = st_.atom(cand_f_);
    st_.set_atom(cand_f_, cand_atom_);
    cand_label_ = st_.label_of(slot_);
    st_.set_atom(cand_f_, old);
    return cand_label_ >= 0;
  }
  void commit() override { st_.set_atom(cand_f_, cand_atom_); }
  int label_current() const override { return st_.label_of(slot_); }
  int label_candidate() const override { return cand_label_; }

  SLabelStructure& structure() { return st_; }

 private:
  SLabelStructure st_;
  int slot_;
  int cand_f_ = 0, cand_atom_ = 0, cand_label_ = 0;
};

// Exhaustive min/max label over all feasible atom assignments.
std::pair<int, int> s_range_exhaustive(SLabelStructure st, int slot) {
  const int f = st.free_count();
  const int atoms = st.atom_universe();
  int lo = 1 << 20, hi = -1;
  std::vector<int> assign(static_cast<std::size_t>(std::max(f, 1)), 0);
  for (;;) {
    for (int q = 0; q < f; ++q) st.set_atom(q, assign[static_cast<std::size_t>(q)]);
    int label = st.label_of(slot);
    if (label >= 0) {
      lo = std::min(lo, label);
      hi = std::max(hi, label);
    }
    int pos = 0;
    while (pos < f && ++assign[static_cast<std::size_t>(pos)] == atoms) {
      assign[static_cast<std::size_t>(pos)] = 0;
      ++pos;
    }
    if (pos >= f) break;
  }
  if (hi < 0) throw invariant_violation_error("label bounds: no feasible configuration");
  return {lo, hi};
}

}  // namespace

SBoundResult bounds_s(int j, const DPMixtureSpec& spec, const CoalescedSets& frozen,
                      const RandomLedger& ledger, std::int64_t t, const BoundContext& ctx) {
  const int M = spec.M;
  SLabelStructure st(frozen, j, M);
  SBoundResult out;

  const double combos = std::pow(static_cast<double>(st.atom_universe()), st.free_count());
  if (ctx.optimizer == OptimizerKind::Exact2 || combos <= 4096.0) {
    auto [lo, hi] = s_range_exhaustive(st, j);
    out.s_low = lo;
    out.s_up = hi;
  } else {
    // Annealed 0/1 envelopes through the smooth surrogate, one run per
    // (cell, direction), continued under the stability protocol.
    struct SurrogateRun {
      std::unique_ptr<SLabelSpaceImpl> space;
      CellStream stream;
      int iters = 0;
      int extremal = -1;
      OptDirection dir;
    };
    std::vector<SurrogateRun> runs;
    for (int dir = 0; dir < 2; ++dir)
      for (int k = 0; k < M; ++k)
        runs.push_back({std::make_unique<SLabelSpaceImpl>(st, j),
                        CellStream(ledger, t, {Var::Anneal, anneal_slot(kAnnealS, j, k, dir)}), 0,
                        -1, dir == 1 ? OptDirection::Maximize : OptDirection::Minimize});
    auto run_all = [&](int iters) {
      AnnealSchedule sched = ctx.schedule;
      sched.iters = iters;
      for (std::size_t r = 0; r < runs.size(); ++r) {
        int k = static_cast<int>(r) % M;
        runs[r].extremal = h_surrogate_extremize(k, M, *runs[r].space, runs[r].dir, sched,
                                                 runs[r].stream, {}, runs[r].iters,
                                                 runs[r].extremal);
        runs[r].iters += iters;
      }
    };
    auto assemble = [&]() {
      std::vector<double> lowerF(static_cast<std::size_t>(M), 0.0);
      std::vector<double> upperF(static_cast<std::size_t>(M), 0.0);
      for (int k = 0; k < M; ++k) {
        lowerF[static_cast<std::size_t>(k)] = runs[static_cast<std::size_t>(k)].extremal;
        upperF[static_cast<std::size_t>(k)] = runs[static_cast<std::size_t>(M + k)].extremal;
      }
      repair_envelopes(lowerF, upperF);
      return BoundPair{SteppedCDF{lowerF}, SteppedCDF{upperF}};
    };
    run_all(ctx.schedule.iters);
    auto realize = [&]() {
      BoundPair pair = assemble();
      return std::vector<int>{pair.upper.invert(0.5), pair.lower.invert(0.5)};
    };
    stability_extend(ctx.schedule, realize, [&] { run_all(ctx.schedule.extension); });
    out.envelopes = assemble();
    out.envelopes.check("label envelopes");
    out.s_low = out.envelopes.upper.invert(0.5);
    out.s_up = out.envelopes.lower.invert(0.5);
    return out;
  }
  std::vector<double> upperF(static_cast<std::size_t>(M), 0.0);
  std::vector<double> lowerF(static_cast<std::size_t>(M), 0.0);
  for (int k = 0; k < M; ++k) {
    upperF[static_cast<std::size_t>(k)] = k >= out.s_low ? 1.0 : 0.0;
    lowerF[static_cast<std::size_t>(k)] = k >= out.s_up ? 1.0 : 0.0;
  }
  out.envelopes = {SteppedCDF{lowerF}, SteppedCDF{upperF}};
  out.envelopes.check("label envelopes");
  return out;
}

// ---------------------------------------------------------------------------
// Proposal-step calibration.
// ---------------------------------------------------------------------------

namespace {

template <typename SpaceT>
void tune_with(BoundContext& ctx, SpaceT make_space, const RandomLedger& ledger) {
  double scale = 1.0;
  for (int round = 0; round < 6; ++round) {
    auto space = make_space();
    space->set_step_scale(scale);
    CellStream stream(ledger, 0, {Var::Anneal, anneal_slot(kAnnealPilot, round, 0, 0)});
    int accepted = 0, proposed = 0;
    double temp = ctx.schedule.temp_scale;
    for (int it = 1; it <= 80; ++it) {
      double cur = space->current_value();
      if (!space->propose(stream)) continue;
      ++proposed;
      double cand = space->candidate_value();
      if (cand <= cur || stream.next() < std::exp(-(cand - cur) / temp)) {
        space->commit();
        ++accepted;
      }
    }
    double rate = proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;
    if (rate > 0.15 && rate < 0.40) break;
    scale *= rate >= 0.40 ? 1.7 : 0.6;
  }
  ctx.step_scale = scale;
}

}  // namespace

void tune_steps(BoundContext& ctx, const Dataset& data, const DPMixtureSpec& spec,
                const RandomLedger& ledger) {
  if (ctx.optimizer == OptimizerKind::Exact2 || spec.M < 2) return;
  CoalescedSets frozen = CoalescedSets::none(data.n(), spec.M);
  tune_with(ctx,
            [&] {
              auto sp = std::make_unique<DpZSpace>(data, spec, frozen, ctx, 0);
              sp->set_cell(0);
              return sp;
            },
            ledger);
}

void tune_steps(BoundContext& ctx, const Dataset& data, const FiniteMixtureSpec& spec,
                const RandomLedger& ledger) {
  if (ctx.optimizer == OptimizerKind::Exact2 || spec.p < 2 || !spec.bounded()) return;
  tune_with(ctx,
            [&] {
              auto sp = std::make_unique<FiniteParamSpace>(data, spec, ctx, 0);
              sp->set_cell(0);
              return sp;
            },
            ledger);
}

}  // namespace cftpmix
