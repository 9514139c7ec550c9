#include "hydra/contention.hpp"

#include <algorithm>
#include <stdexcept>

#include "hydra/errors.hpp"

namespace hydra {

namespace {

// Residue left by rounding when a fetch is drained exactly at its
// completion time.
constexpr double kDrainTolerance = 1e-9;

bool drained(const ContentionRecord& r) {
  return r.pending_gbit <= kDrainTolerance * std::max(1.0, r.demand_gbit);
}

}  // namespace

ContentionRegistry::ContentionRegistry(double bandwidth_gbps) : bandwidth_(bandwidth_gbps) {
  if (!(bandwidth_gbps > 0)) throw ValidationError("registry bandwidth must be > 0");
}

std::optional<double> ContentionRegistry::pending(WorkerId worker) const {
  for (const auto& r : records_) {
    if (r.worker_id == worker) return r.pending_gbit;
  }
  return std::nullopt;
}

bool ContentionRegistry::check(double pending_gbit, double deadline_s, double now_s) const {
  const double share = bandwidth_ / static_cast<double>(records_.size() + 1);
  for (const auto& r : records_) {
    if (!(r.pending_gbit <= share * (r.deadline_s - now_s))) return false;
  }
  return pending_gbit <= share * (deadline_s - now_s);
}

bool ContentionRegistry::admit(WorkerId worker, double pending_gbit, double deadline_s,
                               double now_s) {
  if (!records_.empty() && now_s != last_change_) {
    throw std::logic_error("admit() on a registry not settled to the current time");
  }
  if (!check(pending_gbit, deadline_s, now_s)) return false;
  records_.push_back({worker, pending_gbit, deadline_s, pending_gbit});
  last_change_ = now_s;
  return true;
}

bool ContentionRegistry::would_admit(double pending_gbit, double deadline_s, double now_s) const {
  ContentionRegistry copy = *this;
  copy.settle(now_s);
  return copy.check(pending_gbit, deadline_s, now_s);
}

std::vector<WorkerId> ContentionRegistry::add(WorkerId worker, double pending_gbit,
                                              double deadline_s, double now_s) {
  auto done = settle(now_s);
  records_.push_back({worker, pending_gbit, deadline_s, pending_gbit});
  return done;
}

std::vector<WorkerId> ContentionRegistry::settle(double now_s) {
  std::vector<WorkerId> done;
  if (records_.empty()) {
    last_change_ = std::max(last_change_, now_s);
    return done;
  }
  if (now_s < last_change_) throw std::logic_error("settle() moving backwards in time");
  const double elapsed = now_s - last_change_;
  if (elapsed > 0) {
    const double per_worker = bandwidth_ / static_cast<double>(records_.size()) * elapsed;
    for (auto& r : records_) r.pending_gbit -= per_worker;
    drained_ += per_worker * static_cast<double>(records_.size());
    busy_ += elapsed;
  }
  last_change_ = now_s;
  auto it = std::stable_partition(records_.begin(), records_.end(),
                                  [](const ContentionRecord& r) { return !drained(r); });
  for (auto j = it; j != records_.end(); ++j) done.push_back(j->worker_id);
  records_.erase(it, records_.end());
  return done;
}

std::vector<WorkerId> ContentionRegistry::on_fetch_complete(WorkerId worker, double now_s) {
  auto done = settle(now_s);
  auto it = std::find_if(records_.begin(), records_.end(),
                         [&](const ContentionRecord& r) { return r.worker_id == worker; });
  if (it != records_.end()) records_.erase(it);
  return done;
}

std::optional<double> ContentionRegistry::next_completion_s() const {
  if (records_.empty()) return std::nullopt;
  double smallest = records_.front().pending_gbit;
  for (const auto& r : records_) smallest = std::min(smallest, r.pending_gbit);
  smallest = std::max(smallest, 0.0);
  return last_change_ + smallest * static_cast<double>(records_.size()) / bandwidth_;
}

}  // namespace hydra
