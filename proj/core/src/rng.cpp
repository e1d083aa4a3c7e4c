#include "cftpmix/rng.hpp"

#include <cmath>

namespace cftpmix {

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::int64_t RandomLedger::oldest_time() const {
  if (epoch_ == 0) return 1;  // empty range: oldest > newest
  return -(std::int64_t{1} << epoch_) + 1;
}

void RandomLedger::extend_epoch(int j) {
  if (j != epoch_ + 1) {
    throw usage_error("extend_epoch: expected j=" + std::to_string(epoch_ + 1) +
                      ", got j=" + std::to_string(j));
  }
  if (j > 62) throw usage_error("extend_epoch: epoch index too large");
  epoch_ = j;
}

double RandomLedger::uniform(std::int64_t t, VariableId var, std::int64_t idx) const {
  if (t > 0 || t < oldest_time()) {
    throw usage_error("ledger access at t=" + std::to_string(t) +
                      " outside materialized epochs (oldest " +
                      std::to_string(oldest_time()) + ")");
  }
  if (idx < 0) throw usage_error("ledger draw index must be nonnegative");
  std::uint64_t h = mix64(seed_);
  h = mix64(h ^ mix64(static_cast<std::uint64_t>(t)));
  h = mix64(h ^ mix64((static_cast<std::uint64_t>(var.kind) << 56) ^
                      static_cast<std::uint64_t>(var.index)));
  h = mix64(h ^ mix64(static_cast<std::uint64_t>(idx)));
  return (static_cast<double>(h >> 11) + 0.5) * 0x1p-53;
}

double RandomLedger::exponential(std::int64_t t, VariableId var, std::int64_t idx) const {
  return -std::log(uniform(t, var, idx));
}

std::string to_string(Var v) {
  switch (v) {
    case Var::Z: return "Z";
    case Var::C: return "C";
    case Var::S: return "S";
    case Var::Pi: return "Pi";
    case Var::Theta: return "Theta";
    case Var::ThetaStar: return "ThetaStar";
    case Var::Alpha: return "Alpha";
    case Var::Anneal: return "Anneal";
    case Var::Rejection: return "Rejection";
  }
  return "?";
}

}  // namespace cftpmix
