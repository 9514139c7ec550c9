#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hydra/cluster_model.hpp"
#include "hydra/predictor.hpp"

namespace hydra {

enum class TtftModel { Basic, Overlapped };

// Budget attached to the single-worker fallback: it is placed even when the
// SLO cannot be met, so its fetch never blocks later admissions.
inline constexpr double kFallbackBudget = std::numeric_limits<double>::infinity();

struct AllocatorOptions {
  TtftModel ttft_model = TtftModel::Overlapped;
  MemoryPolicy memory;
  int min_pipeline = 1;
  int max_pipeline = 4;
};

/// Contention admission hook: may a fetch of `pending_gbit` that must finish
/// within `budget_s` seconds from now start on `server_id`?
using AdmissionCheck =
    std::function<bool(const std::string& server_id, double pending_gbit, double budget_s)>;

struct AllocationChoice {
  DeploymentPlan plan;
  double ttft_pred_s = 0.0;
  double tpot_pred_s = 0.0;
  // Seconds after placement by which each stage's fetch must be done for
  // the TTFT SLO to hold. Used as the contention deadline.
  double fetch_budget_s = 0.0;
  // True for the single-worker placement used when no choice meets the SLOs.
  bool fallback = false;
};

/// Per-role server candidates for a given reservation: on each server the
/// least-occupied accelerator with enough free memory (lowest index on ties).
std::vector<ServerCandidate> capable_servers(const ClusterSnapshot& snap, double reservation_gb);

/// Fetch deadline budget for stage fetches of a (s, w) choice.
double fetch_budget(const ModelProfile& profile, const SloSpec& slos, const StageTimings& timings,
                    int s, int w, TtftModel model, const std::vector<ServerCandidate>& chosen);

/// Every (s, w, g) whose predicted TTFT and TPOT meet the SLOs, in
/// enumeration order (s ascending, then w ascending).
std::vector<AllocationChoice> enumerate_choices(const ModelProfile& profile, const SloSpec& slos,
                                                const StageTimings& timings,
                                                const ClusterSnapshot& snap,
                                                const AllocatorOptions& opts = {},
                                                const AdmissionCheck& admission = {});

/// Already-present workers on each plan accelerator, plus one per pair of
/// plan workers sharing an accelerator.
int sharing_score(const DeploymentPlan& plan, const ClusterSnapshot& snap);

/// Picks the feasible choice with the lowest sharing score (ties: smaller s,
/// larger w, lexicographic server list). With no feasible choice, falls back
/// to a single full-memory worker on the best full-capable server.
/// Throws PlacementImpossible if no accelerator could ever hold the model,
/// NoCapacity if none can right now.
AllocationChoice allocate(const ModelProfile& profile, const SloSpec& slos,
                          const StageTimings& timings, const ClusterSnapshot& snap,
                          const AllocatorOptions& opts = {}, const AdmissionCheck& admission = {});

/// Plan for a fixed (s, w) on the current snapshot, bypassing the SLO test.
/// Returns nullopt if the servers do not exist right now.
std::optional<AllocationChoice> plan_for(const ModelProfile& profile, const SloSpec& slos,
                                         const StageTimings& timings, const ClusterSnapshot& snap,
                                         int s, int w, const AllocatorOptions& opts = {},
                                         const AdmissionCheck& admission = {});

}  // namespace hydra
