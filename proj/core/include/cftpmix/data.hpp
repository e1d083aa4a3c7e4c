#ifndef CFTPMIX_DATA_HPP
#define CFTPMIX_DATA_HPP

#include <vector>

#include "cftpmix/errors.hpp"

namespace cftpmix {

struct Dataset {
  std::vector<double> y;

  int n() const { return static_cast<int>(y.size()); }
  void validate() const;
};

}  // namespace cftpmix

#endif  // CFTPMIX_DATA_HPP
