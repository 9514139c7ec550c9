#include "hydra/stage_plan.hpp"

#include <algorithm>
#include <stdexcept>

namespace hydra {

std::string_view to_string(StageKind kind) {
  switch (kind) {
    case StageKind::ContainerCreate: return "ContainerCreate";
    case StageKind::CudaInit: return "CudaInit";
    case StageKind::LibraryLoad: return "LibraryLoad";
    case StageKind::Fetch: return "Fetch";
    case StageKind::Load: return "Load";
    case StageKind::Prefill: return "Prefill";
  }
  return "?";
}

namespace {

int push(StagePlan& plan, Stage stage) {
  plan.stages.push_back(std::move(stage));
  return static_cast<int>(plan.stages.size()) - 1;
}

}  // namespace

StagePlan build_stage_plan(const ModelProfile& profile, const StageTimings& timings,
                           const DeploymentPlan& plan, int worker_index, StartupMode mode,
                           double pcie_gbps, bool consolidate) {
  const int s = plan.pipeline_size;
  if (worker_index < 0 || worker_index >= s) throw std::out_of_range("worker_index >= s");
  const double part = profile.size_gbit / s;
  const double rest = profile.size_gbit - part;

  StagePlan out;
  int fetch1 = -1;
  int load1 = -1;
  if (mode == StartupMode::Sequential) {
    // The lumped runtime cost is split so that the chain sums to runtime_total_s.
    const double runtime = timings.runtime_total_s - timings.container_create_s;
    const double cuda = std::min(timings.cuda_init_s, runtime);
    int cc = push(out, {StageKind::ContainerCreate, 0, 0, timings.container_create_s, {}, -1});
    int cu = push(out, {StageKind::CudaInit, 0, 0, cuda, {cc}, -1});
    int lib = push(out, {StageKind::LibraryLoad, 0, 0, runtime - cuda, {cu}, -1});
    fetch1 = push(out, {StageKind::Fetch, 1, part, 0, {lib}, -1});
    load1 = push(out, {StageKind::Load, 1, part, part / pcie_gbps, {fetch1}, -1});
    out.prefill_stage = push(out, {StageKind::Prefill, 0, 0, 0, {load1}, -1});
  } else {
    fetch1 = push(out, {StageKind::Fetch, 1, part, 0, {}, -1});
    int cc = push(out, {StageKind::ContainerCreate, 0, 0, timings.container_create_s, {}, -1});
    int cu = push(out, {StageKind::CudaInit, 0, 0, timings.cuda_init_s, {cc}, -1});
    int lib = push(out, {StageKind::LibraryLoad, 0, 0, timings.library_load_s, {cu}, -1});
    load1 = push(out, {StageKind::Load, 1, part, part / pcie_gbps, {cu}, fetch1});
    out.prefill_stage = push(out, {StageKind::Prefill, 0, 0, 0, {load1, lib}, -1});
  }

  if (consolidate && rest > 0) {
    int fetch2 = push(out, {StageKind::Fetch, 2, rest, 0, {fetch1}, -1, true});
    out.background_done_stage =
        push(out, {StageKind::Load, 2, rest, rest / pcie_gbps, {load1}, fetch2, true});
  }
  return out;
}

std::vector<int> StagePlan::topological_order() const {
  const int n = static_cast<int>(stages.size());
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<int>> succ(n);
  for (int i = 0; i < n; ++i) {
    auto deps = stages[i].preds;
    if (stages[i].streams_from >= 0) deps.push_back(stages[i].streams_from);
    for (int p : deps) {
      if (p < 0 || p >= n) throw std::logic_error("stage predecessor out of range");
      succ[p].push_back(i);
      ++indeg[i];
    }
  }
  std::vector<int> order;
  for (int i = 0; i < n; ++i) {
    if (indeg[i] == 0) order.push_back(i);
  }
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (int j : succ[order[k]]) {
      if (--indeg[j] == 0) order.push_back(j);
    }
  }
  if (static_cast<int>(order.size()) != n) throw std::logic_error("stage plan has a cycle");
  return order;
}

StageTimes resolve_schedule(const StagePlan& plan, double nic_gbps) {
  const auto order = plan.topological_order();
  const std::size_t n = plan.stages.size();
  StageTimes t{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (int i : order) {
    const auto& st = plan.stages[i];
    double start = 0.0;
    for (int p : st.preds) start = std::max(start, t.end[p]);
    t.start[i] = start;
    if (st.kind == StageKind::Fetch) {
      t.end[i] = start + st.size_gbit / nic_gbps;
    } else {
      t.end[i] = start + st.duration_s;
      if (st.streams_from >= 0) t.end[i] = std::max(t.end[i], t.end[st.streams_from]);
    }
  }
  return t;
}

}  // namespace hydra
