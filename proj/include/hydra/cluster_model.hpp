#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace hydra {

using WorkerId = std::uint64_t;

/// Per-model size and measured single-worker timings. Sizes are gigabits.
struct ModelProfile {
  std::string model_id;
  double size_gbit = 0.0;
  double prefill_time_s = 0.0;
  double decode_time_s = 0.0;
  double kv_bytes_per_token = 0.0;

  void validate() const;
};

/// Cold-start stage costs. `runtime_total_s` is the lumped container plus
/// runtime initialization cost used by the sequential predictor; the three
/// component stages are used by the overlapped predictor. The two views are
/// configured independently.
struct StageTimings {
  double container_create_s = 0.0;
  double cuda_init_s = 0.0;
  double library_load_s = 0.0;
  double runtime_total_s = 0.0;
  double net_hop_s = 0.0;

  void validate() const;
};

struct ServerSpec {
  std::string server_id;
  double nic_gbps = 0.0;
  double pcie_gbps = 0.0;
  int gpu_count = 1;
  double gpu_mem_gb = 0.0;

  // Fetch-plus-load seconds per gigabit; smaller is better.
  double ratio() const { return 1.0 / nic_gbps + 1.0 / pcie_gbps; }
  void validate() const;
};

struct SloSpec {
  double ttft_slo_s = 0.0;
  double tpot_slo_s = 0.0;

  void validate() const;
};

struct GpuId {
  std::string server_id;
  int gpu_index = 0;

  auto operator<=>(const GpuId&) const = default;
};

struct WorkerSlot {
  std::string server_id;
  int gpu_index = 0;
  double mem_reserved_gb = 0.0;

  GpuId gpu() const { return {server_id, gpu_index}; }
  bool operator==(const WorkerSlot&) const = default;
};

/// Pipeline size s, full-memory worker count w, and stage-ordered slots.
/// The first w slots are the full-memory workers.
struct DeploymentPlan {
  int pipeline_size = 1;
  int full_mem_workers = 1;
  std::vector<WorkerSlot> servers;

  void validate() const;
  bool operator==(const DeploymentPlan&) const = default;
};

/// Memory sizing rules shared by the allocator and the simulator.
struct MemoryPolicy {
  double quantum_gb = 0.5;
  // Activation and KV headroom on top of the weights, as a fraction.
  double headroom = 0.10;
  double weight_overhead = 1.0;

  double quantize(double gb) const;
  double model_mem_gb(const ModelProfile& profile) const;
  double full_reservation_gb(const ModelProfile& profile) const;
  double low_reservation_gb(const ModelProfile& profile, int pipeline_size) const;
  void validate() const;
};

struct ActiveWorker {
  WorkerId worker_id = 0;
  std::string model_id;
  double mem_reserved_gb = 0.0;
  bool running = false;
};

/// Accelerator memory and occupancy. All mutation goes through reserve,
/// resize and release so that free + reserved == capacity holds exactly.
class ClusterSnapshot {
 public:
  ClusterSnapshot() = default;
  explicit ClusterSnapshot(std::vector<ServerSpec> servers);

  const std::vector<ServerSpec>& servers() const { return servers_; }
  const ServerSpec* find_server(const std::string& server_id) const;
  const ServerSpec& server(const std::string& server_id) const;

  double free_mem_gb(const GpuId& gpu) const;
  double capacity_gb(const GpuId& gpu) const;
  const std::vector<ActiveWorker>& workers_on(const GpuId& gpu) const;
  const std::map<GpuId, double>& free_mem() const { return free_mem_gb_; }
  const std::map<GpuId, std::vector<ActiveWorker>>& active_workers() const {
    return active_workers_;
  }

  void reserve(const GpuId& gpu, ActiveWorker worker);
  void resize(const GpuId& gpu, WorkerId worker_id, double new_gb);
  void release(const GpuId& gpu, WorkerId worker_id);
  void set_running(const GpuId& gpu, WorkerId worker_id, bool running);

  // Throws std::logic_error when the accounting invariant is broken.
  void check_invariants() const;

 private:
  std::vector<ServerSpec> servers_;
  std::map<GpuId, double> free_mem_gb_;
  std::map<GpuId, std::vector<ActiveWorker>> active_workers_;
};

/// True iff every plan slot fits, counting repeated accelerators cumulatively.
/// Throws PlanError on unknown servers or accelerators.
bool fits(const DeploymentPlan& plan, const ClusterSnapshot& snap);

}  // namespace hydra
