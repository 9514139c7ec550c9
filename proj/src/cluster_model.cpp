#include "hydra/cluster_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hydra/errors.hpp"

namespace hydra {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

void ModelProfile::validate() const {
  require(!model_id.empty(), "model_id must not be empty");
  require(size_gbit > 0, "model " + model_id + ": size_gbit must be > 0");
  require(prefill_time_s > 0, "model " + model_id + ": prefill_time_s must be > 0");
  require(decode_time_s > 0, "model " + model_id + ": decode_time_s must be > 0");
  require(kv_bytes_per_token >= 0, "model " + model_id + ": kv_bytes_per_token must be >= 0");
}

void StageTimings::validate() const {
  require(container_create_s >= 0 && cuda_init_s >= 0 && library_load_s >= 0 &&
              runtime_total_s >= 0 && net_hop_s >= 0,
          "stage timings must be >= 0");
  require(runtime_total_s >= container_create_s,
          "runtime_total_s must be >= container_create_s");
}

void ServerSpec::validate() const {
  require(!server_id.empty(), "server_id must not be empty");
  require(nic_gbps > 0, "server " + server_id + ": nic_gbps must be > 0");
  require(pcie_gbps > 0, "server " + server_id + ": pcie_gbps must be > 0");
  require(gpu_count >= 1, "server " + server_id + ": gpu_count must be >= 1");
  require(gpu_mem_gb > 0, "server " + server_id + ": gpu_mem_gb must be > 0");
}

void SloSpec::validate() const {
  require(ttft_slo_s > 0 && tpot_slo_s > 0, "SLOs must be > 0");
}

void DeploymentPlan::validate() const {
  const int s = pipeline_size;
  const int w = full_mem_workers;
  if (s < 1 || s > 4) throw PlanError("pipeline_size must be in [1,4]");
  if (w < 0 || w > s) throw PlanError("full_mem_workers must be in [0,s]");
  if (static_cast<int>(servers.size()) != s) {
    throw PlanError("plan must list exactly pipeline_size servers");
  }
  for (const auto& slot : servers) {
    if (slot.mem_reserved_gb <= 0) throw PlanError("reservations must be positive");
  }
}

double MemoryPolicy::quantize(double gb) const {
  // The small slack keeps exact multiples from rounding up a whole quantum.
  return std::ceil(gb / quantum_gb - 1e-9) * quantum_gb;
}

double MemoryPolicy::model_mem_gb(const ModelProfile& profile) const {
  return profile.size_gbit / 8.0 * weight_overhead;
}

double MemoryPolicy::full_reservation_gb(const ModelProfile& profile) const {
  return quantize(model_mem_gb(profile) * (1.0 + headroom));
}

double MemoryPolicy::low_reservation_gb(const ModelProfile& profile, int pipeline_size) const {
  return quantize(model_mem_gb(profile) * (1.0 + headroom) / pipeline_size);
}

void MemoryPolicy::validate() const {
  require(quantum_gb > 0, "memory quantum must be > 0");
  require(headroom >= 0, "memory headroom must be >= 0");
  require(weight_overhead > 0, "weight overhead must be > 0");
}

ClusterSnapshot::ClusterSnapshot(std::vector<ServerSpec> servers) : servers_(std::move(servers)) {
  for (const auto& s : servers_) {
    s.validate();
    for (int g = 0; g < s.gpu_count; ++g) {
      GpuId id{s.server_id, g};
      if (free_mem_gb_.contains(id)) throw ValidationError("duplicate server_id " + s.server_id);
      free_mem_gb_[id] = s.gpu_mem_gb;
      active_workers_[id];
    }
  }
}

const ServerSpec* ClusterSnapshot::find_server(const std::string& server_id) const {
  auto it = std::find_if(servers_.begin(), servers_.end(),
                         [&](const ServerSpec& s) { return s.server_id == server_id; });
  return it == servers_.end() ? nullptr : &*it;
}

const ServerSpec& ClusterSnapshot::server(const std::string& server_id) const {
  const auto* s = find_server(server_id);
  if (!s) throw PlanError("unknown server_id " + server_id);
  return *s;
}

double ClusterSnapshot::free_mem_gb(const GpuId& gpu) const {
  auto it = free_mem_gb_.find(gpu);
  if (it == free_mem_gb_.end()) {
    throw PlanError("unknown accelerator " + gpu.server_id + "/" + std::to_string(gpu.gpu_index));
  }
  return it->second;
}

double ClusterSnapshot::capacity_gb(const GpuId& gpu) const {
  return server(gpu.server_id).gpu_mem_gb;
}

const std::vector<ActiveWorker>& ClusterSnapshot::workers_on(const GpuId& gpu) const {
  auto it = active_workers_.find(gpu);
  if (it == active_workers_.end()) {
    throw PlanError("unknown accelerator " + gpu.server_id + "/" + std::to_string(gpu.gpu_index));
  }
  return it->second;
}

void ClusterSnapshot::reserve(const GpuId& gpu, ActiveWorker worker) {
  double free = free_mem_gb(gpu);
  if (worker.mem_reserved_gb > free) {
    throw std::logic_error("reservation exceeds free memory on " + gpu.server_id);
  }
  free_mem_gb_[gpu] = free - worker.mem_reserved_gb;
  active_workers_[gpu].push_back(std::move(worker));
}

void ClusterSnapshot::resize(const GpuId& gpu, WorkerId worker_id, double new_gb) {
  auto& list = active_workers_.at(gpu);
  auto it = std::find_if(list.begin(), list.end(),
                         [&](const ActiveWorker& w) { return w.worker_id == worker_id; });
  if (it == list.end()) throw std::logic_error("resize of unknown worker");
  double delta = new_gb - it->mem_reserved_gb;
  if (delta > free_mem_gb_.at(gpu)) throw std::logic_error("resize exceeds free memory");
  free_mem_gb_[gpu] -= delta;
  it->mem_reserved_gb = new_gb;
}

void ClusterSnapshot::release(const GpuId& gpu, WorkerId worker_id) {
  auto& list = active_workers_.at(gpu);
  auto it = std::find_if(list.begin(), list.end(),
                         [&](const ActiveWorker& w) { return w.worker_id == worker_id; });
  if (it == list.end()) throw std::logic_error("release of unknown worker");
  free_mem_gb_[gpu] += it->mem_reserved_gb;
  list.erase(it);
}

void ClusterSnapshot::set_running(const GpuId& gpu, WorkerId worker_id, bool running) {
  for (auto& w : active_workers_.at(gpu)) {
    if (w.worker_id == worker_id) {
      w.running = running;
      return;
    }
  }
  throw std::logic_error("set_running on unknown worker");
}

void ClusterSnapshot::check_invariants() const {
  for (const auto& [gpu, free] : free_mem_gb_) {
    double reserved = 0.0;
    for (const auto& w : active_workers_.at(gpu)) reserved += w.mem_reserved_gb;
    double cap = capacity_gb(gpu);
    if (free < -1e-9) throw std::logic_error("negative free memory on " + gpu.server_id);
    if (std::abs(free + reserved - cap) > 1e-9 * std::max(1.0, cap)) {
      throw std::logic_error("memory accounting broken on " + gpu.server_id);
    }
  }
}

bool fits(const DeploymentPlan& plan, const ClusterSnapshot& snap) {
  std::map<GpuId, double> demand;
  for (const auto& slot : plan.servers) {
    snap.server(slot.server_id);
    demand[slot.gpu()] += slot.mem_reserved_gb;
  }
  for (const auto& [gpu, need] : demand) {
    if (snap.free_mem_gb(gpu) < need) return false;
  }
  return true;
}

}  // namespace hydra
