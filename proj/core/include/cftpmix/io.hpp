#ifndef CFTPMIX_IO_HPP
#define CFTPMIX_IO_HPP

#include <string>
#include <vector>

#include "cftpmix/config.hpp"

namespace cftpmix {

// One observation per line (or single-column CSV); blank lines ignored.
Dataset read_dataset(const std::string& path);

// Everything a `perfect` run materializes on disk.
struct RunOutputs {
  std::vector<FinitePerfectSample> finite_samples;
  std::vector<DpPerfectSample> dp_samples;
};

// Writes samples.csv, coalescence.csv, and config.replay into dir.
void write_run_outputs(const RunConfig& config, const RunOutputs& outputs, const std::string& dir);

// Derived tables: density_<param>.csv (KDE on the comparison grid),
// predictive.csv, and kdist.csv for unknown-k runs.
void write_density_table(const std::string& path, const GridDensity& density);
void write_predictive_table(const std::string& path, const std::vector<double>& x,
                            const std::vector<double>& density);
void write_kdist_table(const std::string& path, const std::vector<double>& k_probs);

// samples.csv serialization used by write_run_outputs; exposed so `report`
// can reread a finished run.
std::string finite_samples_csv(const RunConfig& config, const std::vector<FinitePerfectSample>& s);
std::string dp_samples_csv(const RunConfig& config, const std::vector<DpPerfectSample>& s);
RunOutputs read_samples_csv(const RunConfig& config, const std::string& path);

}  // namespace cftpmix

#endif  // CFTPMIX_IO_HPP
