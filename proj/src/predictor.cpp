#include "hydra/predictor.hpp"

#include <algorithm>
#include <set>

#include "hydra/errors.hpp"

namespace hydra {

void PredictionInput::validate() const {
  if (s < 1) throw ValidationError("pipeline size must be >= 1");
  if (w < 0 || w > s) throw ValidationError("full-memory count must be in [0,s]");
  if (static_cast<int>(chosen.size()) != s) {
    throw ValidationError("prediction needs exactly s server bandwidths");
  }
  for (const auto& bw : chosen) {
    if (!(bw.nic_gbps > 0) || !(bw.pcie_gbps > 0)) {
      throw ValidationError("bandwidths must be > 0");
    }
  }
}

double pipeline_work_factor(int s, int w) {
  return static_cast<double>(s - w) + static_cast<double>(w) / static_cast<double>(s);
}

namespace {

double inference_tail(double per_worker_s, const StageTimings& t, int s, int w) {
  return per_worker_s * pipeline_work_factor(s, w) + t.net_hop_s * s;
}

}  // namespace

double predict_ttft_basic(const PredictionInput& in) {
  in.validate();
  double max_ratio = 0.0;
  for (const auto& bw : in.chosen) {
    max_ratio = std::max(max_ratio, 1.0 / bw.nic_gbps + 1.0 / bw.pcie_gbps);
  }
  const double part = in.profile.size_gbit / in.s;
  return in.timings.runtime_total_s + part * max_ratio +
         inference_tail(in.profile.prefill_time_s, in.timings, in.s, in.w);
}

double predict_ttft_overlapped(const PredictionInput& in) {
  in.validate();
  const auto& t = in.timings;
  const double part = in.profile.size_gbit / in.s;
  double ready = 0.0;
  for (const auto& bw : in.chosen) {
    double runtime_path = t.container_create_s + t.cuda_init_s +
                          std::max(part / bw.pcie_gbps, t.library_load_s);
    double fetch_path = part / bw.nic_gbps;
    ready = std::max(ready, std::max(runtime_path, fetch_path));
  }
  return ready + inference_tail(in.profile.prefill_time_s, t, in.s, in.w);
}

double predict_tpot(const ModelProfile& profile, const StageTimings& timings, int s, int w) {
  if (s < 1 || w < 0 || w > s) throw ValidationError("invalid (s, w) for TPOT prediction");
  return inference_tail(profile.decode_time_s, timings, s, w);
}

bool candidate_less(const ServerCandidate& a, const ServerCandidate& b) {
  const double ra = a.ratio();
  const double rb = b.ratio();
  if (ra != rb) return ra < rb;
  if (a.occupancy != b.occupancy) return a.occupancy < b.occupancy;
  if (a.server_id != b.server_id) return a.server_id < b.server_id;
  return a.gpu_index < b.gpu_index;
}

std::optional<std::vector<ServerCandidate>> select_servers(
    std::span<const ServerCandidate> full_capable, std::span<const ServerCandidate> low_capable,
    int s, int w) {
  if (s < 1 || w < 0 || w > s) return std::nullopt;

  std::vector<ServerCandidate> full(full_capable.begin(), full_capable.end());
  std::stable_sort(full.begin(), full.end(), candidate_less);
  if (static_cast<int>(full.size()) < w) return std::nullopt;

  std::vector<ServerCandidate> out(full.begin(), full.begin() + w);
  std::set<std::string> used;
  for (const auto& c : out) used.insert(c.server_id);

  std::vector<ServerCandidate> merged;
  std::set<std::string> in_low;
  for (const auto& c : low_capable) {
    if (used.contains(c.server_id) || in_low.contains(c.server_id)) continue;
    in_low.insert(c.server_id);
    merged.push_back(c);
  }
  for (auto it = full.begin() + w; it != full.end(); ++it) {
    if (used.contains(it->server_id) || in_low.contains(it->server_id)) continue;
    merged.push_back(*it);
  }
  std::stable_sort(merged.begin(), merged.end(), candidate_less);
  if (static_cast<int>(merged.size()) < s - w) return std::nullopt;
  out.insert(out.end(), merged.begin(), merged.begin() + (s - w));
  return out;
}

}  // namespace hydra
