#ifndef CFTPMIX_ERRORS_HPP
#define CFTPMIX_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cftpmix {

// Caller misuse: bad arguments, out-of-contract access, malformed config.
struct usage_error : std::invalid_argument {
  explicit usage_error(const std::string& what) : std::invalid_argument(what) {}
};

// Internal state failed a structural invariant.
struct invariant_violation_error : std::logic_error {
  explicit invariant_violation_error(const std::string& what) : std::logic_error(what) {}
};

// All weights underflowed or a computation lost all mass.
struct numerical_degeneracy_error : std::runtime_error {
  explicit numerical_degeneracy_error(const std::string& what) : std::runtime_error(what) {}
};

// A rejection sampler exhausted its proposal budget.
struct sampler_stall_error : std::runtime_error {
  explicit sampler_stall_error(const std::string& what) : std::runtime_error(what) {}
};

// The bounding chains did not coalesce within the epoch cap.
struct no_coalescence_error : std::runtime_error {
  explicit no_coalescence_error(const std::string& what) : std::runtime_error(what) {}
};

// Annealed optimum failed to produce stable realizations within the
// extension budget.
struct instability_error : std::runtime_error {
  explicit instability_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cftpmix

#endif  // CFTPMIX_ERRORS_HPP
