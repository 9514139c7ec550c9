#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hydra/cluster_model.hpp"

namespace hydra {

struct BandwidthPair {
  double nic_gbps = 0.0;
  double pcie_gbps = 0.0;
};

/// Inputs to the closed-form TTFT/TPOT predictors. `chosen` holds the
/// bandwidths of the s selected servers in stage order.
struct PredictionInput {
  ModelProfile profile;
  StageTimings timings;
  int s = 1;
  int w = 1;
  std::vector<BandwidthPair> chosen;

  void validate() const;
};

/// s - w + w/s: a low-memory stage costs a full single-worker step, a
/// full-memory stage costs 1/s of it.
double pipeline_work_factor(int s, int w);

/// Sequential cold start: runtime init, then fetch and load of M/s on the
/// slowest server, then a pipelined prefill.
double predict_ttft_basic(const PredictionInput& in);

/// Overlapped cold start: fetch starts with container creation, and
/// host-to-GPU loading runs alongside library loading.
double predict_ttft_overlapped(const PredictionInput& in);

double predict_tpot(const ModelProfile& profile, const StageTimings& timings, int s, int w);

/// One server considered for a pipeline slot. `gpu_index` and `occupancy`
/// describe the accelerator picked on that server for the slot's role.
struct ServerCandidate {
  std::string server_id;
  int gpu_index = 0;
  double nic_gbps = 0.0;
  double pcie_gbps = 0.0;
  int occupancy = 0;

  double ratio() const { return 1.0 / nic_gbps + 1.0 / pcie_gbps; }
};

/// Ranking used by select_servers: ratio, then occupancy, then ids.
bool candidate_less(const ServerCandidate& a, const ServerCandidate& b);

/// Picks the w best full-capable servers, then the s - w best of the
/// low-capable servers merged with the leftover full-capable ones. A server
/// appearing in both lists is used at most once; its low-list entry applies
/// in the merged pool. Returns nullopt when there are not enough servers.
std::optional<std::vector<ServerCandidate>> select_servers(
    std::span<const ServerCandidate> full_capable, std::span<const ServerCandidate> low_capable,
    int s, int w);

}  // namespace hydra
