#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "hydra/cluster_model.hpp"

namespace hydra {

inline constexpr double kNoDeadline = std::numeric_limits<double>::infinity();

struct ContentionRecord {
  WorkerId worker_id = 0;
  double pending_gbit = 0.0;
  // Absolute virtual time. kNoDeadline marks background traffic, which
  // takes its equal share of the link but never fails an admission check.
  double deadline_s = kNoDeadline;
  double demand_gbit = 0.0;
};

/// Equal-share fluid model of one server's NIC, used both for admission of
/// new cold-start fetches and as the simulator's network model.
class ContentionRegistry {
 public:
  explicit ContentionRegistry(double bandwidth_gbps);

  double bandwidth_gbps() const { return bandwidth_; }
  double last_change_s() const { return last_change_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<ContentionRecord>& records() const { return records_; }
  std::optional<double> pending(WorkerId worker) const;

  // Admission check against a registry already settled to now_s. On
  // acceptance the candidate is appended. Throws std::logic_error if the
  // registry is non-empty and was not settled to now_s.
  bool admit(WorkerId worker, double pending_gbit, double deadline_s, double now_s);

  // Same check as admit() on a settled copy; never mutates.
  bool would_admit(double pending_gbit, double deadline_s, double now_s) const;

  // Unconditional append (background or baseline traffic). Settles first.
  std::vector<WorkerId> add(WorkerId worker, double pending_gbit, double deadline_s, double now_s);

  // Drains B/N * (now - last_change) from every listed fetch and drops the
  // ones that reach zero. Returns the dropped workers in list order.
  std::vector<WorkerId> settle(double now_s);

  // settle(now_s), then removes the worker if still listed.
  std::vector<WorkerId> on_fetch_complete(WorkerId worker, double now_s);

  // Virtual time at which the smallest pending fetch drains, if any.
  std::optional<double> next_completion_s() const;

  // Total gigabits drained by settle() since construction.
  double total_drained_gbit() const { return drained_; }
  // Total seconds during which at least one fetch was listed.
  double busy_time_s() const { return busy_; }

 private:
  bool check(double pending_gbit, double deadline_s, double now_s) const;

  double bandwidth_;
  double last_change_ = 0.0;
  double drained_ = 0.0;
  double busy_ = 0.0;
  std::vector<ContentionRecord> records_;
};

}  // namespace hydra
