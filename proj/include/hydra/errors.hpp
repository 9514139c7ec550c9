#pragma once

#include <stdexcept>
#include <string>

namespace hydra {

// Malformed scenario, catalog or CLI input. Raised before any simulation work.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A plan references servers or accelerators that do not exist.
class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No accelerator in the cluster could ever hold a single full worker.
class PlacementImpossible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Placement would be possible on an emptier cluster; retry later.
class NoCapacity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hydra
