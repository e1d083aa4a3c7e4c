#ifndef CFTPMIX_BOUNDING_HPP
#define CFTPMIX_BOUNDING_HPP

#include <memory>
#include <optional>
#include <vector>

#include "cftpmix/model_dp.hpp"
#include "cftpmix/model_finite.hpp"
#include "cftpmix/optimize.hpp"
#include "cftpmix/stepped_cdf.hpp"

namespace cftpmix {

// How envelope extrema are computed. Exact2 enumerates structures and
// corner parameters exhaustively and is available for two-component
// families; Annealed is the general path.
enum class OptimizerKind { Annealed, Exact2 };

struct BoundContext {
  OptimizerKind optimizer = OptimizerKind::Annealed;
  AnnealSchedule schedule;
  // Random-walk step sizes; zero means box width / 20 times step_scale.
  // tune_steps() runs the one-off pilot that calibrates step_scale toward
  // ~25% acceptance.
  double mu_step = 0.0;
  double lambda_step = 0.0;
  double pi_step = 0.0;
  double alpha_step = 0.0;
  double step_scale = 1.0;
};

// Ledger column purposes for annealing draws.
inline constexpr int kAnnealZKnown = 0;
inline constexpr int kAnnealZDp = 1;
inline constexpr int kAnnealC = 2;
inline constexpr int kAnnealS = 3;
inline constexpr int kAnnealPilot = 4;
inline constexpr int kAnnealGeneric = 5;

// Frozen (coalesced) coordinates carried between time steps. Slot 0's label
// is 0 by construction and always counts as frozen.
struct CoalescedSets {
  std::vector<std::optional<int>> z;    // per observation: pinned slot
  std::vector<std::optional<int>> s;    // per slot: pinned canonical label
  std::vector<std::optional<CfgOp>> c;  // per slot: pinned configuration op

  static CoalescedSets none(int n, int M);
  int frozen_s_count() const;
};

// One envelope construction whose annealing runs can be continued for the
// run-extension stability protocol. Exact constructions report exact() and
// ignore extend().
class BoundBuild {
 public:
  virtual ~BoundBuild() = default;
  virtual const BoundPair& pair() const = 0;
  virtual void extend() = 0;
  virtual bool exact() const = 0;
};

// Inverts one build at the variable's fixed uniform under the stability
// protocol: extend until the realized pair stops changing.
struct RealizedBound {
  int low = 0;  // from inverting the upper envelope
  int up = 0;   // from inverting the lower envelope
};
RealizedBound realize_with_stability(BoundBuild& build, double u, const AnnealSchedule& schedule);

// ---------------------------------------------------------------------------
// Known-p envelopes (static per run).
// ---------------------------------------------------------------------------

// Envelopes of the allocation conditionals over the declared (Pi, Theta)
// box, one pair per observation; collapsed mode integrates (Pi, Theta)
// analytically and optimizes over the other allocations instead.
class ZKnownBounds {
 public:
  ZKnownBounds(const Dataset& data, const FiniteMixtureSpec& spec, const RandomLedger& ledger,
               const BoundContext& ctx, bool collapsed);
  ~ZKnownBounds();

  const BoundPair& pair(int i) const;
  void extend();
  bool exact() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Two-component shortcut: exact corner extrema of the binary allocation
// conditional with the mixing weight held at its monotone envelope value.
BoundPair bounds_z_two_component(int i, const Dataset& data, const FiniteMixtureSpec& spec,
                                 double pi_low, double pi_high);

// Same envelopes through the chosen optimizer (annealed runs can be extended
// for the stability protocol; Exact2 yields the corner result).
std::unique_ptr<BoundBuild> make_z_two_component_bounds(int i, const Dataset& data,
                                                        const FiniteMixtureSpec& spec,
                                                        double pi_low, double pi_high,
                                                        const RandomLedger& ledger, std::int64_t t,
                                                        const BoundContext& ctx);

// ---------------------------------------------------------------------------
// Per-time-step envelopes for the unknown-k sampler.
// ---------------------------------------------------------------------------

std::unique_ptr<BoundBuild> make_z_dp_bounds(int i, const Dataset& data, const DPMixtureSpec& spec,
                                             const CoalescedSets& frozen, const RandomLedger& ledger,
                                             std::int64_t t, const BoundContext& ctx);

// Configuration envelopes live on a common grid of size k_inf + 1 aligned at
// the new-component cell; the sup-side support is embedded by mapping its
// new-component cell to the last grid cell.
struct CBoundInfo {
  int grid = 2;                   // k_inf + 1
  int k_sup = 1;
  int k_inf = 1;
  std::vector<int> frozen_labels;  // ascending labels pinned in S_{-j}
};
std::unique_ptr<BoundBuild> make_c_bounds(int j, const Dataset& data, const DPMixtureSpec& spec,
                                          const CoalescedSets& frozen, const RandomLedger& ledger,
                                          std::int64_t t, const BoundContext& ctx, CBoundInfo& info);

// Interprets a coalesced configuration index as a chain-independent
// operation, or nullopt when the referenced component is not pinned by the
// frozen structure.
std::optional<CfgOp> interpret_coalesced_c(int value, int j, int M, const CBoundInfo& info,
                                           const CoalescedSets& frozen);

// Degenerate label envelopes: the achievable range [s_low, s_up] of slot j's
// canonical label over configurations compatible with the pinned ops.
struct SBoundResult {
  int s_low = 0;
  int s_up = 0;
  BoundPair envelopes;  // 0/1-valued stepped CDFs over {0..M-1}
};
SBoundResult bounds_s(int j, const DPMixtureSpec& spec, const CoalescedSets& frozen,
                      const RandomLedger& ledger, std::int64_t t, const BoundContext& ctx);

// One-off proposal-step calibration: short fixed-temperature pilot walks of
// the continuous coordinates aimed at ~25% acceptance. Mutates ctx.
void tune_steps(BoundContext& ctx, const Dataset& data, const DPMixtureSpec& spec,
                const RandomLedger& ledger);
void tune_steps(BoundContext& ctx, const Dataset& data, const FiniteMixtureSpec& spec,
                const RandomLedger& ledger);

}  // namespace cftpmix

#endif  // CFTPMIX_BOUNDING_HPP
