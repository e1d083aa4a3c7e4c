#ifndef CFTPMIX_CFTP_HPP
#define CFTPMIX_CFTP_HPP

#include <cstdint>

#include "cftpmix/bounding.hpp"
#include "cftpmix/model_dp.hpp"
#include "cftpmix/model_finite.hpp"

namespace cftpmix {

struct CoalescenceRecord {
  int epoch = 0;                       // doubling index reached
  std::int64_t t_star = 0;             // first full-agreement time, < 0
  std::int64_t steps_to_zero = 0;      // -t_star
  std::int64_t backward_steps = 0;     // 2^epoch
  std::int64_t forward_sweeps = 0;     // kernel applications after t_star
};

struct CftpOptions {
  int epoch_cap = 16;
  BoundContext bounds;
  bool collapsed = false;      // known-p: integrate (Pi, Theta) analytically
  bool tune_proposals = true;  // one-off proposal-step pilot
};

struct FinitePerfectSample {
  FiniteMixtureState state;
  CoalescenceRecord record;
  std::uint64_t seed = 0;
};

struct DpPerfectSample {
  DPState state;
  CoalescenceRecord record;
  std::uint64_t seed = 0;
};

// Known-p sampler: envelopes are computed once, the doubling loop replays
// fixed draws until every allocation's lower and upper realizations agree at
// some t* < 0, and the chain is completed forward to time 0.
FinitePerfectSample run_cftp_known(const Dataset& data, const FiniteMixtureSpec& spec,
                                   RandomLedger& ledger, const CftpOptions& options);

// Two-component specialization with the monotone mixing-weight coupling: the
// weight envelopes come from shared exponential variates at the running
// allocation-count bounds, so no weight truncation is needed.
FinitePerfectSample run_cftp_two_component(const Dataset& data, const FiniteMixtureSpec& spec,
                                           RandomLedger& ledger, const CftpOptions& options);

// Unknown-k sampler: per backward step, envelopes for Z (conditioning on
// coalesced labels), then C (also on coalesced allocations), then the label
// range; coalescence requires full agreement of Z and C.
DpPerfectSample run_cftp_dp(const Dataset& data, const DPMixtureSpec& spec, RandomLedger& ledger,
                            const CftpOptions& options);

// Truncated draws for the forward completion, dispatching on the base
// density family; LogConcave uses adaptive rejection.
enum class BaseForm { GammaForm, NormalForm, LogConcave };
struct TruncatedBase {
  BaseForm form = BaseForm::NormalForm;
  double a = 0.0;  // mean (normal) or shape (gamma)
  double b = 1.0;  // sd (normal) or rate (gamma)
  LogConcaveDensity density{};  // LogConcave only
};
double rejection_truncated(const TruncatedBase& base, Interval iv, CellStream& stream,
                           std::int64_t budget = kDefaultRejectionBudget);

}  // namespace cftpmix

#endif  // CFTPMIX_CFTP_HPP
