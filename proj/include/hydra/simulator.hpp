#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/allocator.hpp"
#include "hydra/autoscaler.hpp"
#include "hydra/cluster_model.hpp"
#include "hydra/stage_plan.hpp"

namespace hydra {

/// Cold-start policies compared by the runner.
///  - SequentialBaseline: one worker, stages run back to back, first-fit placement.
///  - OverlappedSingle: one worker with overlapped stages, first-fit placement.
///  - HydraServe: SLO-driven pipeline groups, contention-aware placement,
///    overlapped stages and pipeline consolidation.
enum class Policy { SequentialBaseline, OverlappedSingle, HydraServe };

std::string_view to_string(Policy policy);
Policy parse_policy(std::string_view name);

enum class ConsolidationMode { Auto, None };

enum class WorkerPhase {
  Starting,
  PipelineServing,
  BackgroundLoading,
  Standalone,
  Draining,
  Terminated
};

std::string_view to_string(WorkerPhase phase);
bool legal_transition(WorkerPhase from, WorkerPhase to);

enum class EventKind {
  Arrival,
  StageComplete,
  FetchRateChange,
  TokenEmitted,
  MigrationDone,
  KeepAliveExpire,
  WindowTick,
  ScaleCheck
};

std::string_view to_string(EventKind kind);

struct FixedPlan {
  int s = 1;
  int w = 1;
};

struct SimConfig {
  Policy policy = Policy::HydraServe;
  MemoryPolicy memory;
  TtftModel allocator_ttft = TtftModel::Overlapped;
  ConsolidationMode consolidation = ConsolidationMode::Auto;
  // Forces every HydraServe group to this (s, w) instead of running the allocator.
  std::optional<FixedPlan> fixed_plan;
  // Overrides the policy's stage scheduling (sequential for the baseline,
  // overlapped otherwise).
  std::optional<StartupMode> startup;
  int batch_capacity = 8;
  double window_s = 10.0;
  int window_ring = 3;
  double keep_alive_s = 60.0;
  bool background_competes = true;
  // Queued requests still unserved this long after the last arrival are rejected.
  double drain_timeout_s = 3600.0;

  bool record_trace = false;
  bool record_contention = false;
  bool record_tokens = false;
  bool check_invariants = true;

  void validate() const;
};

struct ModelEntry {
  ModelProfile profile;
  StageTimings timings;
  SloSpec slo;
  std::string app;
};

struct RequestSpec {
  std::string model_id;
  double arrival_s = 0.0;
  int input_tokens = 0;
  int output_tokens = 1;
};

struct Scenario {
  SimConfig config;
  std::vector<ServerSpec> servers;
  std::vector<ModelEntry> models;
  std::vector<RequestSpec> requests;

  void validate() const;
};

struct RequestRecord {
  std::string model_id;
  double arrival_s = 0.0;
  int input_tokens = 0;
  int output_tokens = 1;
  double first_token_s = 0.0;
  double completion_s = 0.0;
  double ttft_s = 0.0;
  // Defined only for outputs of two or more tokens.
  std::optional<double> tpot_s;
  bool cold_start = false;
  bool rejected = false;
  double ttft_slo_s = 0.0;
  double tpot_slo_s = 0.0;
  std::vector<double> token_times;
};

struct ReservationInterval {
  WorkerId worker = 0;
  std::string model_id;
  GpuId gpu;
  double gb = 0.0;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct UtilizationSample {
  double time_s = 0.0;
  GpuId gpu;
  double reserved_gb = 0.0;
  int workers = 0;
  int running = 0;
};

struct PhaseChange {
  double time_s = 0.0;
  WorkerId worker = 0;
  WorkerPhase from = WorkerPhase::Starting;
  WorkerPhase to = WorkerPhase::Starting;
};

struct MigrationRecord {
  std::string model_id;
  double start_s = 0.0;
  double drain_s = 0.0;
  double transfer_s = 0.0;
  double transfer_gbit = 0.0;
  int survivors = 0;
  int live_requests = 0;
};

struct ColdStartRecord {
  std::string model_id;
  double start_s = 0.0;
  double ready_s = -1.0;
  DeploymentPlan plan;
  int endpoints = 1;
  Consolidation consolidation = Consolidation::None;
};

struct ContentionSample {
  double time_s = 0.0;
  std::string server_id;
  WorkerId worker = 0;
  double pending_gbit = 0.0;
  double deadline_s = 0.0;
};

struct FetchRecord {
  WorkerId worker = 0;
  std::string server_id;
  int part = 1;
  double demand_gbit = 0.0;
  double start_s = 0.0;
  double end_s = 0.0;
};

struct SimResult {
  std::vector<RequestRecord> records;
  std::vector<ReservationInterval> reservations;
  std::vector<UtilizationSample> utilization;
  std::vector<PhaseChange> phases;
  std::vector<MigrationRecord> migrations;
  std::vector<ColdStartRecord> cold_starts;
  std::vector<FetchRecord> fetches;
  std::vector<ContentionSample> contention;
  std::vector<std::string> trace;
  double end_time_s = 0.0;
  std::uint64_t events = 0;
  // HydraServe cold starts postponed because every plan was refused admission.
  std::uint64_t deferred_cold_starts = 0;
};

/// Runs a validated scenario to completion. Deterministic: the same
/// scenario yields identical results and traces.
SimResult run(const Scenario& scenario);

/// Compute load of one pipeline stage on its accelerator.
struct StageLoad {
  bool full_memory = true;
  double own_reserved_gb = 0.0;
  // Reserved memory of all workers currently computing on the accelerator,
  // including this one.
  double active_reserved_gb = 0.0;
};

/// Compute is split in proportion to reserved memory among active workers.
double stage_share_factor(const StageLoad& load);

/// Time per output token. A pipeline stage costs t_d/s when it holds a
/// full-memory reservation and t_d otherwise, scaled by its share factor,
/// plus one network hop per stage. A standalone worker costs t_d scaled by
/// its share factor, with no network hop.
double decode_step_time(const ModelProfile& profile, const StageTimings& timings,
                        std::span<const StageLoad> stages, bool standalone);

/// First-token compute with the same cost model, using t_p.
double prefill_step_time(const ModelProfile& profile, const StageTimings& timings,
                         std::span<const StageLoad> stages, bool standalone);

struct MigrationCost {
  double pause_s = 0.0;
  double transfer_s = 0.0;
  double transfer_gbit = 0.0;
};

/// Pause for gathering the KV cache of live requests onto the consolidated
/// worker: drain plus transfer of the (s-1)/s share held by other stages.
MigrationCost migrate_kv(double drain_s, std::span<const int> live_tokens,
                         double kv_bytes_per_token, int s, double min_share_gbps);

}  // namespace hydra
