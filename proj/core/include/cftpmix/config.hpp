#ifndef CFTPMIX_CONFIG_HPP
#define CFTPMIX_CONFIG_HPP

#include <string>

#include "cftpmix/cftp.hpp"
#include "cftpmix/harness.hpp"

namespace cftpmix {

enum class ModelKind { Finite, FiniteTwoComp, Dp };

// Flat key-value run description; one `key = value` per line, lists
// space-separated, '#' comments. Unknown keys are errors.
struct RunConfig {
  ModelKind model = ModelKind::Finite;
  std::string dataset_path;
  std::string output_dir = ".";

  FiniteMixtureSpec finite;
  DPMixtureSpec dp;

  std::uint64_t seed = 1;
  int replicates = 1;
  int workers = 1;
  CftpOptions cftp;

  // Baseline options.
  std::int64_t burnin = 10000;
  std::int64_t keep = 1;
  std::int64_t thin = 1;
  bool independent_replicates = true;
  bool gibbs_bounded = true;

  // Pilot options.
  std::int64_t pilot_sweeps = 5000;
  bool pilot_refine = false;

  // Reporting.
  bool predictive_chain_mode = false;  // one perfect sample + forward draws
  std::int64_t forward_draws = 15000;

  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

// Canonical serialization; parsing it back reproduces the config.
std::string serialize_config(const RunConfig& config);

}  // namespace cftpmix

#endif  // CFTPMIX_CONFIG_HPP
