#include "hydra/allocator.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "hydra/errors.hpp"

namespace hydra {

std::vector<ServerCandidate> capable_servers(const ClusterSnapshot& snap, double reservation_gb) {
  std::vector<ServerCandidate> out;
  for (const auto& server : snap.servers()) {
    std::optional<ServerCandidate> best;
    for (int g = 0; g < server.gpu_count; ++g) {
      GpuId id{server.server_id, g};
      if (snap.free_mem_gb(id) < reservation_gb) continue;
      int occ = static_cast<int>(snap.workers_on(id).size());
      if (!best || occ < best->occupancy) {
        best = ServerCandidate{server.server_id, g, server.nic_gbps, server.pcie_gbps, occ};
      }
    }
    if (best) out.push_back(*best);
  }
  return out;
}

double fetch_budget(const ModelProfile& profile, const SloSpec& slos, const StageTimings& timings,
                    int s, int w, TtftModel model, const std::vector<ServerCandidate>& chosen) {
  double budget = slos.ttft_slo_s - profile.prefill_time_s * pipeline_work_factor(s, w) -
                  timings.net_hop_s * s;
  if (model == TtftModel::Basic) {
    double load = 0.0;
    for (const auto& c : chosen) load = std::max(load, profile.size_gbit / s / c.pcie_gbps);
    budget -= timings.runtime_total_s + load;
  }
  return budget;
}

namespace {

std::optional<AllocationChoice> evaluate(const ModelProfile& profile, const SloSpec& slos,
                                         const StageTimings& timings,
                                         const ClusterSnapshot& snap, int s, int w,
                                         const AllocatorOptions& opts,
                                         const AdmissionCheck& admission) {
  const double full_gb = opts.memory.full_reservation_gb(profile);
  const double low_gb = opts.memory.low_reservation_gb(profile, s);
  auto full = capable_servers(snap, full_gb);
  auto low = capable_servers(snap, low_gb);

  const double part = profile.size_gbit / s;
  // The budget does not depend on which servers get picked in overlapped
  // mode, so candidates can be filtered before selection. In basic mode it
  // depends on PCIe; filter with each candidate's own load time.
  if (admission) {
    auto keep = [&](const ServerCandidate& c) {
      double budget = fetch_budget(profile, slos, timings, s, w, opts.ttft_model, {c});
      return admission(c.server_id, part, budget);
    };
    std::erase_if(full, [&](const ServerCandidate& c) { return !keep(c); });
    std::erase_if(low, [&](const ServerCandidate& c) { return !keep(c); });
  }

  auto g = select_servers(full, low, s, w);
  if (!g) return std::nullopt;

  AllocationChoice choice;
  choice.plan.pipeline_size = s;
  choice.plan.full_mem_workers = w;
  PredictionInput in{profile, timings, s, w, {}};
  for (int i = 0; i < s; ++i) {
    const auto& c = (*g)[i];
    choice.plan.servers.push_back({c.server_id, c.gpu_index, i < w ? full_gb : low_gb});
    in.chosen.push_back({c.nic_gbps, c.pcie_gbps});
  }
  choice.ttft_pred_s = opts.ttft_model == TtftModel::Overlapped ? predict_ttft_overlapped(in)
                                                                : predict_ttft_basic(in);
  choice.tpot_pred_s = predict_tpot(profile, timings, s, w);
  choice.fetch_budget_s = fetch_budget(profile, slos, timings, s, w, opts.ttft_model, *g);
  return choice;
}

}  // namespace

std::vector<AllocationChoice> enumerate_choices(const ModelProfile& profile, const SloSpec& slos,
                                                const StageTimings& timings,
                                                const ClusterSnapshot& snap,
                                                const AllocatorOptions& opts,
                                                const AdmissionCheck& admission) {
  std::vector<AllocationChoice> out;
  const int lo = std::max(1, opts.min_pipeline);
  const int hi = std::min(4, opts.max_pipeline);
  for (int s = lo; s <= hi; ++s) {
    for (int w = 0; w <= s; ++w) {
      auto choice = evaluate(profile, slos, timings, snap, s, w, opts, admission);
      if (!choice) continue;
      if (choice->ttft_pred_s <= slos.ttft_slo_s && choice->tpot_pred_s <= slos.tpot_slo_s) {
        out.push_back(std::move(*choice));
      }
    }
  }
  return out;
}

int sharing_score(const DeploymentPlan& plan, const ClusterSnapshot& snap) {
  std::map<GpuId, int> placed;
  int score = 0;
  for (const auto& slot : plan.servers) {
    auto gpu = slot.gpu();
    score += static_cast<int>(snap.workers_on(gpu).size());
    score += placed[gpu]++;
  }
  return score;
}

namespace {

auto slot_key(const DeploymentPlan& plan) {
  std::vector<std::pair<std::string, int>> key;
  for (const auto& s : plan.servers) key.emplace_back(s.server_id, s.gpu_index);
  return key;
}

}  // namespace

AllocationChoice allocate(const ModelProfile& profile, const SloSpec& slos,
                          const StageTimings& timings, const ClusterSnapshot& snap,
                          const AllocatorOptions& opts, const AdmissionCheck& admission) {
  auto choices = enumerate_choices(profile, slos, timings, snap, opts, admission);
  if (!choices.empty()) {
    auto better = [&](const AllocationChoice& a, const AllocationChoice& b) {
      auto ka = std::make_tuple(sharing_score(a.plan, snap), a.plan.pipeline_size,
                                -a.plan.full_mem_workers, slot_key(a.plan));
      auto kb = std::make_tuple(sharing_score(b.plan, snap), b.plan.pipeline_size,
                                -b.plan.full_mem_workers, slot_key(b.plan));
      return ka < kb;
    };
    return *std::min_element(choices.begin(), choices.end(), better);
  }

  const double full_gb = opts.memory.full_reservation_gb(profile);
  auto full = capable_servers(snap, full_gb);
  if (full.empty()) {
    bool ever = std::any_of(snap.servers().begin(), snap.servers().end(),
                            [&](const ServerSpec& s) { return s.gpu_mem_gb >= full_gb; });
    if (!ever) {
      throw PlacementImpossible("no accelerator can hold " + profile.model_id + " (" +
                                std::to_string(full_gb) + " GB)");
    }
    throw NoCapacity("no free accelerator for " + profile.model_id);
  }
  std::stable_sort(full.begin(), full.end(), candidate_less);
  const auto& first = full.front();
  AllocationChoice fallback;
  fallback.plan = {1, 1, {{first.server_id, first.gpu_index, full_gb}}};
  PredictionInput in{profile, timings, 1, 1, {{first.nic_gbps, first.pcie_gbps}}};
  fallback.ttft_pred_s = opts.ttft_model == TtftModel::Overlapped ? predict_ttft_overlapped(in)
                                                                  : predict_ttft_basic(in);
  fallback.tpot_pred_s = predict_tpot(profile, timings, 1, 1);
  fallback.fetch_budget_s = kFallbackBudget;
  fallback.fallback = true;
  return fallback;
}

std::optional<AllocationChoice> plan_for(const ModelProfile& profile, const SloSpec& slos,
                                         const StageTimings& timings, const ClusterSnapshot& snap,
                                         int s, int w, const AllocatorOptions& opts,
                                         const AdmissionCheck& admission) {
  return evaluate(profile, slos, timings, snap, s, w, opts, admission);
}

}  // namespace hydra
