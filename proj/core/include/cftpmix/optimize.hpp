#ifndef CFTPMIX_OPTIMIZE_HPP
#define CFTPMIX_OPTIMIZE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cftpmix/dist.hpp"
#include "cftpmix/rng.hpp"

namespace cftpmix {

// Logarithmic cooling, T(t) = temp_scale / log(1 + t).
struct AnnealSchedule {
  double temp_scale = 1.0;
  int iters = 500;
  int extension = 500;
  int max_extensions = 5;

  double temperature(int iter) const { return temp_scale / std::log1p(static_cast<double>(iter)); }
};

enum class OptDirection { Minimize, Maximize };

// Walkable state for the annealer. The space owns current/candidate/best
// points; the annealer only sequences proposals, Metropolis acceptance, and
// best tracking. All randomness flows through the caller's stream.
class AnnealSpace {
 public:
  virtual ~AnnealSpace() = default;

  // Called once per iteration before proposing (time-varying objectives).
  virtual void begin_iteration(int iter, CellStream& stream) { (void)iter; (void)stream; }

  // Stage a candidate move; false means infeasible (stay put).
  virtual bool propose(CellStream& stream) = 0;

  virtual double current_value() = 0;
  virtual double candidate_value() = 0;
  virtual void commit() = 0;     // candidate becomes current
  virtual void mark_best() = 0;  // current becomes best
};

struct AnnealResult {
  double best_value = 0.0;
  int iters_done = 0;  // cumulative, including earlier runs
};

// Anneals `schedule.iters` further iterations starting at iteration index
// `start_iter` (0 for a fresh run; pass the previous result's iters_done to
// extend). Returns the best value seen across the whole run so far when
// `best_so_far` carries it in.
AnnealResult anneal_extremize(AnnealSpace& space, OptDirection direction,
                              const AnnealSchedule& schedule, CellStream& stream,
                              int start_iter = 0, double best_so_far = 0.0,
                              bool have_best = false);

// Exact extremum of a two-component objective over the candidate grid
// {anchor clamped, lo, hi} x {anchor clamped, lo, hi} (the anchor is y_i for
// allocation bounds and the slot mean for configuration bounds).
struct CornerResult {
  double min_value = 0.0;
  double max_value = 0.0;
  std::array<double, 2> argmin{};
  std::array<double, 2> argmax{};
};
CornerResult corner_extremize(const std::function<double(double, double)>& objective,
                              double anchor_a, Interval box_a, double anchor_b, Interval box_b);

// Run-extension adequacy protocol: after a base run, keep annealing in
// increments of schedule.extension and declare the result stable once the
// realizations induced by the fixed ledger uniforms are unchanged across two
// consecutive runs. Throws instability_error when max_extensions runs out.
struct StabilityResult {
  int extensions_used = 0;
};
StabilityResult stability_extend(const AnnealSchedule& schedule,
                                 const std::function<std::vector<int>()>& realization,
                                 const std::function<void()>& extend_once);

// Discrete state whose slot label feeds the degenerate distribution function
// F(k) = 1{label <= k}.
class LabelStateSpace {
 public:
  virtual ~LabelStateSpace() = default;
  virtual bool propose(CellStream& stream) = 0;
  virtual void commit() = 0;
  virtual int label_current() const = 0;
  virtual int label_candidate() const = 0;
};

struct HSurrogateParams {
  double kappa = 5.0;           // target weight grows as 1 + kappa log(1+t)
  Interval other_n{1.0, 10.0};  // remaining weights drawn uniformly here
};

// Embeds the 0/1-valued coordinate F(k) in the smooth weighted objective
// h(W,F) = sum_i w_i sqrt((F(i)+w_i)/(1+w_i)) and anneals it, letting the
// target weight dominate with the iteration count. Returns the extremal
// F(k) value reached (0 or 1).
int h_surrogate_extremize(int target_k, int support, LabelStateSpace& space,
                          OptDirection direction, const AnnealSchedule& schedule,
                          CellStream& stream, const HSurrogateParams& params = {},
                          int start_iter = 0, int extremal_so_far = -1);

// Packs an annealing consumer into a ledger variable index so concurrent
// optimizations own disjoint columns.
std::int64_t anneal_slot(int purpose, int coord, int cell, int direction);

}  // namespace cftpmix

#endif  // CFTPMIX_OPTIMIZE_HPP
