#ifndef CFTPMIX_RNG_HPP
#define CFTPMIX_RNG_HPP

#include <cstdint>
#include <string>

#include "cftpmix/errors.hpp"

namespace cftpmix {

// Which model variable a random-number cell feeds.
enum class Var : std::int32_t {
  Z = 0,          // allocation draws, index = observation
  C = 1,          // configuration draws, index = slot
  S = 2,          // reserved for canonical labels (degenerate; unused draws)
  Pi = 3,         // mixing-weight draws, index = component
  Theta = 4,      // per-component parameter draws / auxiliary components
  ThetaStar = 5,  // distinct-component draws, index = label
  Alpha = 6,      // concentration-parameter draws
  Anneal = 7,     // annealing proposals/acceptances, index = packed id
  Rejection = 8,  // dedicated repair/rejection streams
};

struct VariableId {
  Var kind;
  std::int64_t index = 0;
};

// Immutable, replayable store of Uniform(0,1) draws for coupling from the
// past. A cell is addressed by (time t <= 0, variable, draw index); its value
// is a pure function of (seed, t, kind, index, draw index), so replays and
// out-of-order materialization are bit-identical. Epochs only gate access:
// after extend_epoch(j) the times {-2^j+1, ..., 0} are readable.
//
// Cell value: four chained splitmix64 finalizer rounds over the address,
//   h0 = mix(seed)
//   h1 = mix(h0 ^ mix(t))
//   h2 = mix(h1 ^ mix(kind * 2^56 + index))
//   h3 = mix(h2 ^ mix(draw index))
// mapped to the open interval via ((h3 >> 11) + 0.5) * 2^-53.
class RandomLedger {
 public:
  explicit RandomLedger(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  int epoch() const { return epoch_; }

  // Oldest readable time, -2^epoch + 1. Nothing is readable before the first
  // extension.
  std::int64_t oldest_time() const;

  // Makes times {-2^j+1, ..., -2^(j-1)} readable; j must be epoch()+1.
  void extend_epoch(int j);

  double uniform(std::int64_t t, VariableId var, std::int64_t idx) const;

  // Exp(1) transform of the cell, -log(u).
  double exponential(std::int64_t t, VariableId var, std::int64_t idx) const;

 private:
  std::uint64_t seed_;
  int epoch_ = 0;
};

// Sequential reader over the draw-index dimension of one (t, var) cell
// column. Rejection-style consumers advance it as far as they need; the
// column is unbounded.
class CellStream {
 public:
  CellStream(const RandomLedger& ledger, std::int64_t t, VariableId var)
      : ledger_(&ledger), t_(t), var_(var) {}

  double next() { return ledger_->uniform(t_, var_, idx_++); }
  double next_exponential() { return ledger_->exponential(t_, var_, idx_++); }
  std::int64_t consumed() const { return idx_; }

 private:
  const RandomLedger* ledger_;
  std::int64_t t_;
  VariableId var_;
  std::int64_t idx_ = 0;
};

std::string to_string(Var v);

}  // namespace cftpmix

#endif  // CFTPMIX_RNG_HPP
