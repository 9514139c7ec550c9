#pragma once

#include <string_view>
#include <vector>

#include "hydra/cluster_model.hpp"

namespace hydra {

enum class StageKind { ContainerCreate, CudaInit, LibraryLoad, Fetch, Load, Prefill };

std::string_view to_string(StageKind kind);

enum class StartupMode { Sequential, Overlapped };

/// One node of a worker's cold-start DAG.
///
/// Fetch stages have no fixed duration: their length comes from the NIC
/// share at run time. A Load with `streams_from` set consumes bytes of that
/// fetch as they arrive, so it cannot end before the fetch does. Prefill is
/// a zero-length gate marking that the worker can join its first forward
/// pass; the prefill computation itself is charged per request.
struct Stage {
  StageKind kind = StageKind::ContainerCreate;
  int part = 0;
  double size_gbit = 0.0;
  double duration_s = 0.0;
  std::vector<int> preds;
  int streams_from = -1;
  // Part-2 stages of a worker that is consolidating after the cold start.
  bool background = false;
};

struct StagePlan {
  std::vector<Stage> stages;
  int prefill_stage = -1;
  // Index of the last background Load, or -1 without consolidation.
  int background_done_stage = -1;

  /// Throws std::logic_error on a cycle or a dangling predecessor.
  std::vector<int> topological_order() const;
};

/// Builds the cold-start DAG of one pipeline stage. With `consolidate`, the
/// worker also fetches and loads the rest of the model after its own part.
StagePlan build_stage_plan(const ModelProfile& profile, const StageTimings& timings,
                           const DeploymentPlan& plan, int worker_index, StartupMode mode,
                           double pcie_gbps, bool consolidate = false);

struct StageTimes {
  std::vector<double> start;
  std::vector<double> end;
};

/// Static schedule of a plan when every fetch of this worker runs alone on
/// a link of `nic_gbps` (sequential fetches of one worker never overlap).
StageTimes resolve_schedule(const StagePlan& plan, double nic_gbps);

}  // namespace hydra
