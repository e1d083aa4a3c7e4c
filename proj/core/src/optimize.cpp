#include "cftpmix/optimize.hpp"

#include <algorithm>
#include <cmath>

#include "cftpmix/errors.hpp"

namespace cftpmix {

AnnealResult anneal_extremize(AnnealSpace& space, OptDirection direction,
                              const AnnealSchedule& schedule, CellStream& stream,
                              int start_iter, double best_so_far, bool have_best) {
  if (schedule.iters < 1 || !(schedule.temp_scale > 0.0))
    throw usage_error("anneal_extremize: bad schedule");
  const double sign = direction == OptDirection::Maximize ? -1.0 : 1.0;

  double best = have_best ? best_so_far : space.current_value();
  if (!have_best) space.mark_best();

  for (int iter = start_iter + 1; iter <= start_iter + schedule.iters; ++iter) {
    space.begin_iteration(iter, stream);
    double cur = space.current_value();
    // Time-varying objectives can improve the best without a move.
    if (sign * (cur - best) < 0.0) {
      best = cur;
      space.mark_best();
    }
    if (!space.propose(stream)) continue;
    double cand = space.candidate_value();
    double delta = sign * (cand - cur);
    if (delta <= 0.0 || stream.next() < std::exp(-delta / schedule.temperature(iter))) {
      space.commit();
      if (sign * (cand - best) < 0.0) {
        best = cand;
        space.mark_best();
      }
    }
  }
  return {best, start_iter + schedule.iters};
}

CornerResult corner_extremize(const std::function<double(double, double)>& objective,
                              double anchor_a, Interval box_a, double anchor_b, Interval box_b) {
  if (!(box_a.lo < box_a.hi) || !(box_b.lo < box_b.hi))
    throw usage_error("corner_extremize: empty box");
  const double cand_a[3] = {box_a.clamp(anchor_a), box_a.lo, box_a.hi};
  const double cand_b[3] = {box_b.clamp(anchor_b), box_b.lo, box_b.hi};
  CornerResult out;
  bool first = true;
  for (double a : cand_a)
    for (double b : cand_b) {
      double v = objective(a, b);
      if (first || v < out.min_value) {
        out.min_value = v;
        out.argmin = {a, b};
      }
      if (first || v > out.max_value) {
        out.max_value = v;
        out.argmax = {a, b};
      }
      first = false;
    }
  return out;
}

StabilityResult stability_extend(const AnnealSchedule& schedule,
                                 const std::function<std::vector<int>()>& realization,
                                 const std::function<void()>& extend_once) {
  std::vector<int> prev = realization();
  for (int e = 1; e <= schedule.max_extensions; ++e) {
    extend_once();
    std::vector<int> cur = realization();
    if (cur == prev) return {e};
    prev = std::move(cur);
  }
  throw instability_error("annealed bounds: realizations did not stabilize within " +
                          std::to_string(schedule.max_extensions) + " extensions");
}

namespace {

double h_objective(int label, int target_k, int support, double n_target,
                   const std::vector<double>& n_other) {
  // w_i = n_i / sum; F(i) = 1{label <= i}.
  double total = n_target;
  for (double v : n_other) total += v;
  double h = 0.0;
  int oi = 0;
  for (int i = 0; i < support; ++i) {
    double ni = i == target_k ? n_target : n_other[static_cast<std::size_t>(oi++)];
    double w = ni / total;
    double F = label <= i ? 1.0 : 0.0;
    h += w * std::sqrt((F + w) / (1.0 + w));
  }
  return h;
}

}  // namespace

int h_surrogate_extremize(int target_k, int support, LabelStateSpace& space,
                          OptDirection direction, const AnnealSchedule& schedule,
                          CellStream& stream, const HSurrogateParams& params,
                          int start_iter, int extremal_so_far) {
  if (target_k < 0 || target_k >= support) throw usage_error("h_surrogate_extremize: bad target");
  const double sign = direction == OptDirection::Maximize ? -1.0 : 1.0;

  auto f_of = [&](int label) { return label <= target_k ? 1 : 0; };
  int extremal = extremal_so_far >= 0 ? extremal_so_far : f_of(space.label_current());
  auto track = [&](int label) {
    int F = f_of(label);
    if (direction == OptDirection::Maximize)
      extremal = std::max(extremal, F);
    else
      extremal = std::min(extremal, F);
  };
  track(space.label_current());

  std::vector<double> n_other(static_cast<std::size_t>(support - 1));
  for (int iter = start_iter + 1; iter <= start_iter + schedule.iters; ++iter) {
    double n_target = 1.0 + params.kappa * std::log1p(static_cast<double>(iter));
    for (double& v : n_other) v = params.other_n.lo + params.other_n.width() * stream.next();

    double cur = h_objective(space.label_current(), target_k, support, n_target, n_other);
    if (!space.propose(stream)) continue;
    double cand = h_objective(space.label_candidate(), target_k, support, n_target, n_other);
    track(space.label_candidate());
    double delta = sign * (cand - cur);
    if (delta <= 0.0 || stream.next() < std::exp(-delta / schedule.temperature(iter))) {
      space.commit();
    }
  }
  return extremal;
}

std::int64_t anneal_slot(int purpose, int coord, int cell, int direction) {
  return (static_cast<std::int64_t>(purpose) << 40) | (static_cast<std::int64_t>(coord) << 16) |
         (static_cast<std::int64_t>(cell) << 2) | static_cast<std::int64_t>(direction);
}

}  // namespace cftpmix
