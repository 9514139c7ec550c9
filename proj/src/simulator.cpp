#include "hydra/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <stdexcept>

#include "hydra/contention.hpp"
#include "hydra/errors.hpp"

namespace hydra {

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::SequentialBaseline: return "sequential-baseline";
    case Policy::OverlappedSingle: return "overlapped-single";
    case Policy::HydraServe: return "hydraserve";
  }
  return "?";
}

Policy parse_policy(std::string_view name) {
  if (name == "sequential-baseline") return Policy::SequentialBaseline;
  if (name == "overlapped-single") return Policy::OverlappedSingle;
  if (name == "hydraserve") return Policy::HydraServe;
  throw ValidationError("unknown policy '" + std::string(name) + "'");
}

std::string_view to_string(WorkerPhase phase) {
  switch (phase) {
    case WorkerPhase::Starting: return "Starting";
    case WorkerPhase::PipelineServing: return "PipelineServing";
    case WorkerPhase::BackgroundLoading: return "BackgroundLoading";
    case WorkerPhase::Standalone: return "Standalone";
    case WorkerPhase::Draining: return "Draining";
    case WorkerPhase::Terminated: return "Terminated";
  }
  return "?";
}

bool legal_transition(WorkerPhase from, WorkerPhase to) {
  using P = WorkerPhase;
  switch (from) {
    case P::Starting: return to == P::PipelineServing;
    case P::PipelineServing:
      return to == P::BackgroundLoading || to == P::Draining || to == P::Terminated;
    case P::BackgroundLoading: return to == P::Standalone || to == P::Draining;
    case P::Draining: return to == P::Terminated;
    case P::Standalone: return to == P::Terminated;
    case P::Terminated: return false;
  }
  return false;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Arrival: return "Arrival";
    case EventKind::StageComplete: return "StageComplete";
    case EventKind::FetchRateChange: return "FetchRateChange";
    case EventKind::TokenEmitted: return "TokenEmitted";
    case EventKind::MigrationDone: return "MigrationDone";
    case EventKind::KeepAliveExpire: return "KeepAliveExpire";
    case EventKind::WindowTick: return "WindowTick";
    case EventKind::ScaleCheck: return "ScaleCheck";
  }
  return "?";
}

void SimConfig::validate() const {
  memory.validate();
  if (batch_capacity < 1) throw ValidationError("batch_capacity must be >= 1");
  if (!(window_s > 0)) throw ValidationError("window_s must be > 0");
  if (window_ring < 1) throw ValidationError("window_ring must be >= 1");
  if (keep_alive_s < 0) throw ValidationError("keep_alive_s must be >= 0");
  if (!(drain_timeout_s > 0)) throw ValidationError("drain_timeout_s must be > 0");
  if (fixed_plan) {
    if (fixed_plan->s < 1 || fixed_plan->s > 4) throw ValidationError("fixed_plan.s must be in [1,4]");
    if (fixed_plan->w < 0 || fixed_plan->w > fixed_plan->s) {
      throw ValidationError("fixed_plan.w must be in [0,s]");
    }
  }
}

void Scenario::validate() const {
  config.validate();
  if (servers.empty()) throw ValidationError("scenario has no servers");
  std::set<std::string> ids;
  for (const auto& s : servers) {
    s.validate();
    if (!ids.insert(s.server_id).second) throw ValidationError("duplicate server " + s.server_id);
  }
  std::set<std::string> models_seen;
  for (const auto& m : models) {
    m.profile.validate();
    m.timings.validate();
    m.slo.validate();
    if (!models_seen.insert(m.profile.model_id).second) {
      throw ValidationError("duplicate model " + m.profile.model_id);
    }
  }
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& r = requests[i];
    auto where = "request " + std::to_string(i) + ": ";
    if (!models_seen.contains(r.model_id)) throw ValidationError(where + "unknown model " + r.model_id);
    if (!(r.arrival_s >= 0) || !std::isfinite(r.arrival_s)) throw ValidationError(where + "bad arrival time");
    if (r.output_tokens < 1) throw ValidationError(where + "output_tokens must be >= 1");
    if (r.input_tokens < 0) throw ValidationError(where + "input_tokens must be >= 0");
  }
}

double stage_share_factor(const StageLoad& load) {
  if (!(load.own_reserved_gb > 0)) return 1.0;
  return std::max(1.0, load.active_reserved_gb / load.own_reserved_gb);
}

namespace {

double step_time(double per_worker_s, const StageTimings& timings,
                 std::span<const StageLoad> stages, bool standalone) {
  if (stages.empty()) throw std::invalid_argument("endpoint without stages");
  if (standalone) return per_worker_s * stage_share_factor(stages.front());
  const double s = static_cast<double>(stages.size());
  double total = 0.0;
  for (const auto& st : stages) {
    double base = st.full_memory ? per_worker_s / s : per_worker_s;
    total += base * stage_share_factor(st);
  }
  return total + timings.net_hop_s * s;
}

}  // namespace

double decode_step_time(const ModelProfile& profile, const StageTimings& timings,
                        std::span<const StageLoad> stages, bool standalone) {
  return step_time(profile.decode_time_s, timings, stages, standalone);
}

double prefill_step_time(const ModelProfile& profile, const StageTimings& timings,
                         std::span<const StageLoad> stages, bool standalone) {
  return step_time(profile.prefill_time_s, timings, stages, standalone);
}

MigrationCost migrate_kv(double drain_s, std::span<const int> live_tokens,
                         double kv_bytes_per_token, int s, double min_share_gbps) {
  MigrationCost cost;
  double tokens = 0.0;
  for (int t : live_tokens) tokens += t;
  if (s > 1 && kv_bytes_per_token > 0 && tokens > 0) {
    cost.transfer_gbit = tokens * kv_bytes_per_token * 8.0 / 1e9 *
                         (static_cast<double>(s - 1) / static_cast<double>(s));
    cost.transfer_s = cost.transfer_gbit / min_share_gbps;
  }
  cost.pause_s = drain_s + cost.transfer_s;
  return cost;
}

namespace {

struct Event {
  double time;
  std::uint64_t seq;
  EventKind kind;
  std::int64_t a;
  std::int64_t b;
};

struct EventLater {
  bool operator()(const Event& x, const Event& y) const {
    if (x.time != y.time) return x.time > y.time;
    return x.seq > y.seq;
  }
};

enum class StageStatus { Pending, Running, Done, Skipped };

struct StageRun {
  StageStatus status = StageStatus::Pending;
  bool timer_done = false;
  double start = 0.0;
};

struct Worker {
  WorkerId id = 0;
  int model = 0;
  int endpoint = 0;
  int stage_index = 0;
  int server = 0;
  GpuId gpu;
  bool full_memory = true;
  double reserved_gb = 0.0;
  double interval_start = 0.0;
  WorkerPhase phase = WorkerPhase::Starting;
  StagePlan plan;
  std::vector<StageRun> runs;
  bool consolidating = false;
  bool bg_done = false;
  bool ready = false;
  int active_fetch = -1;
  double fetch_deadline = kNoDeadline;
  std::size_t fetch_record = 0;
};

struct Endpoint {
  int id = 0;
  int model = 0;
  std::vector<WorkerId> workers;
  int s = 1;
  bool standalone = false;
  int endpoints = 1;
  Consolidation consolidation = Consolidation::None;
  bool alive = true;
  bool ready = false;
  bool migrating = false;
  std::vector<int> live;
  std::uint64_t keepalive_gen = 0;
  int cold_start = -1;
};

struct Request {
  int model = 0;
  int endpoint = -1;
  int emitted = 0;
  bool blocked = false;
  bool done = false;
  RequestRecord rec;
};

struct ModelState {
  ModelEntry entry;
  ModelDemandState demand;
  std::deque<int> queue;
  std::vector<int> endpoints;
  bool impossible = false;
  bool scale_check_pending = false;
};

class Engine {
 public:
  explicit Engine(const Scenario& sc) : cfg_(sc.config), snap_(sc.servers) {
    for (std::size_t i = 0; i < sc.servers.size(); ++i) {
      server_index_[sc.servers[i].server_id] = static_cast<int>(i);
      registries_.emplace_back(sc.servers[i].nic_gbps);
      server_gen_.push_back(0);
    }
    for (std::size_t i = 0; i < sc.models.size(); ++i) {
      ModelState m;
      m.entry = sc.models[i];
      m.demand = ModelDemandState(cfg_.window_s, cfg_.window_ring);
      model_index_[m.entry.profile.model_id] = static_cast<int>(i);
      models_.push_back(std::move(m));
    }
    std::vector<int> order(sc.requests.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      return sc.requests[x].arrival_s < sc.requests[y].arrival_s;
    });
    for (const auto& spec : sc.requests) {
      Request r;
      r.model = model_index_.at(spec.model_id);
      const auto& slo = models_[r.model].entry.slo;
      r.rec.model_id = spec.model_id;
      r.rec.arrival_s = spec.arrival_s;
      r.rec.input_tokens = spec.input_tokens;
      r.rec.output_tokens = spec.output_tokens;
      r.rec.ttft_slo_s = slo.ttft_slo_s;
      r.rec.tpot_slo_s = slo.tpot_slo_s;
      requests_.push_back(std::move(r));
    }
    for (int i : order) {
      push(sc.requests[i].arrival_s, EventKind::Arrival, i);
      last_arrival_ = std::max(last_arrival_, sc.requests[i].arrival_s);
    }
    pending_arrivals_ = static_cast<int>(sc.requests.size());
    if (!sc.requests.empty()) push(cfg_.window_s, EventKind::WindowTick);
  }

  SimResult run() {
    while (!events_.empty()) {
      Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      ++result_.events;
      handle(ev);
      if (cfg_.record_trace) trace(ev);
      if (cfg_.record_contention) dump_contention();
      if (cfg_.check_invariants) snap_.check_invariants();
    }
    finish();
    return std::move(result_);
  }

 private:
  // ---- event plumbing -------------------------------------------------

  void push(double t, EventKind kind, std::int64_t a = 0, std::int64_t b = 0) {
    events_.push({t, seq_++, kind, a, b});
  }

  void handle(const Event& ev) {
    switch (ev.kind) {
      case EventKind::Arrival: on_arrival(static_cast<int>(ev.a)); break;
      case EventKind::StageComplete:
        on_stage_timer(static_cast<WorkerId>(ev.a), static_cast<int>(ev.b));
        break;
      case EventKind::FetchRateChange:
        on_rate_change(static_cast<int>(ev.a), static_cast<std::uint64_t>(ev.b));
        break;
      case EventKind::TokenEmitted: on_token(static_cast<int>(ev.a)); break;
      case EventKind::MigrationDone: on_migration_done(static_cast<int>(ev.a)); break;
      case EventKind::KeepAliveExpire:
        on_keepalive(static_cast<int>(ev.a), static_cast<std::uint64_t>(ev.b));
        break;
      case EventKind::WindowTick: on_window_tick(); break;
      case EventKind::ScaleCheck:
        models_[ev.a].scale_check_pending = false;
        autoscale(static_cast<int>(ev.a));
        break;
    }
  }

  void trace(const Event& ev) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%.9f,%llu,%s,%lld,%lld", ev.time,
                  static_cast<unsigned long long>(ev.seq), std::string(to_string(ev.kind)).c_str(),
                  static_cast<long long>(ev.a), static_cast<long long>(ev.b));
    result_.trace.emplace_back(buf);
  }

  void dump_contention() {
    for (std::size_t i = 0; i < registries_.size(); ++i) {
      for (const auto& r : registries_[i].records()) {
        result_.contention.push_back(
            {now_, snap_.servers()[i].server_id, r.worker_id, r.pending_gbit, r.deadline_s});
      }
    }
  }

  void schedule_scale_check(int m) {
    if (models_[m].scale_check_pending) return;
    models_[m].scale_check_pending = true;
    push(now_, EventKind::ScaleCheck, m);
  }

  // ---- requests -------------------------------------------------------

  void on_arrival(int r) {
    --pending_arrivals_;
    auto& req = requests_[r];
    auto& m = models_[req.model];
    m.demand.record_arrival();
    if (m.impossible) {
      reject(r);
      return;
    }
    m.queue.push_back(r);
    dispatch(req.model);
    if (req.endpoint < 0) {
      req.rec.cold_start = true;
      schedule_scale_check(req.model);
    }
  }

  void reject(int r) {
    auto& req = requests_[r];
    req.rec.rejected = true;
    req.rec.ttft_s = std::numeric_limits<double>::infinity();
    req.done = true;
  }

  int capacity(const Endpoint& ep) const { return ep.endpoints * cfg_.batch_capacity; }

  bool accepting(const Endpoint& ep) const {
    return ep.alive && ep.ready && !ep.migrating &&
           static_cast<int>(ep.live.size()) < capacity(ep);
  }

  void dispatch(int m) {
    auto& model = models_[m];
    while (!model.queue.empty()) {
      int target = -1;
      for (int e : model.endpoints) {
        if (accepting(endpoints_[e])) {
          target = e;
          break;
        }
      }
      if (target < 0) break;
      int r = model.queue.front();
      model.queue.pop_front();
      assign(r, target);
    }
  }

  void assign(int r, int e) {
    auto& req = requests_[r];
    req.endpoint = e;
    endpoints_[e].live.push_back(r);
    ++endpoints_[e].keepalive_gen;
    refresh_running(e);
    push(now_ + prefill_time(e), EventKind::TokenEmitted, r);
  }

  void on_token(int r) {
    auto& req = requests_[r];
    ++req.emitted;
    if (cfg_.record_tokens) req.rec.token_times.push_back(now_);
    if (req.emitted == 1) {
      req.rec.first_token_s = now_;
      req.rec.ttft_s = now_ - req.rec.arrival_s;
    }
    const int e = req.endpoint;
    if (req.emitted >= req.rec.output_tokens) {
      req.rec.completion_s = now_;
      if (req.rec.output_tokens >= 2) {
        req.rec.tpot_s = (now_ - req.rec.first_token_s) / (req.rec.output_tokens - 1);
      }
      req.done = true;
      auto& live = endpoints_[e].live;
      live.erase(std::find(live.begin(), live.end(), r));
      refresh_running(e);
      dispatch(endpoints_[e].model);
      maybe_keepalive(e);
      return;
    }
    if (endpoints_[e].migrating) {
      req.blocked = true;
      return;
    }
    push(now_ + token_time(e), EventKind::TokenEmitted, r);
  }

  // ---- compute model --------------------------------------------------

  std::vector<StageLoad> loads(int e) const {
    std::vector<StageLoad> out;
    for (WorkerId id : endpoints_[e].workers) {
      const auto& w = workers_[id];
      double active = 0.0;
      for (const auto& other : snap_.workers_on(w.gpu)) {
        if (other.running || other.worker_id == id) active += other.mem_reserved_gb;
      }
      out.push_back({w.full_memory, w.reserved_gb, active});
    }
    return out;
  }

  double token_time(int e) const {
    const auto& ep = endpoints_[e];
    const auto& m = models_[ep.model].entry;
    auto l = loads(e);
    return decode_step_time(m.profile, m.timings, l, ep.standalone);
  }

  double prefill_time(int e) const {
    const auto& ep = endpoints_[e];
    const auto& m = models_[ep.model].entry;
    auto l = loads(e);
    return prefill_step_time(m.profile, m.timings, l, ep.standalone);
  }

  void refresh_running(int e) {
    const auto& ep = endpoints_[e];
    const bool running = ep.alive && !ep.live.empty();
    for (WorkerId id : ep.workers) {
      const auto& w = workers_[id];
      if (w.phase == WorkerPhase::Terminated) continue;
      snap_.set_running(w.gpu, id, running);
    }
  }

  // ---- autoscaling ----------------------------------------------------

  int standalone_equivalents(int m) const {
    int have = 0;
    for (int e : models_[m].endpoints) have += endpoints_[e].endpoints;
    return have;
  }

  int desired(int m) {
    auto& model = models_[m];
    model.demand.waiting_queue_len = static_cast<int>(model.queue.size());
    return desired_workers(model.demand, cfg_.batch_capacity);
  }

  void reject_queue(int m) {
    auto& model = models_[m];
    while (!model.queue.empty()) {
      reject(model.queue.front());
      model.queue.pop_front();
    }
  }

  void autoscale(int m) {
    auto& model = models_[m];
    if (model.impossible) {
      reject_queue(m);
      return;
    }
    const int deficit = desired(m) - standalone_equivalents(m);
    if (deficit <= 0) return;
    try {
      if (cfg_.policy == Policy::HydraServe) {
        plan_cold_start(deficit, [&](int min_s) { return create_hydra_group(m, min_s); });
      } else {
        for (int i = 0; i < deficit; ++i) {
          if (!create_first_fit(m)) break;
        }
      }
    } catch (const PlacementImpossible&) {
      models_[m].impossible = true;
      reject_queue(m);
    }
  }

  bool create_first_fit(int m) {
    const auto& profile = models_[m].entry.profile;
    const double gb = cfg_.memory.full_reservation_gb(profile);
    bool ever = false;
    for (const auto& server : snap_.servers()) {
      if (server.gpu_mem_gb >= gb) ever = true;
      for (int g = 0; g < server.gpu_count; ++g) {
        GpuId id{server.server_id, g};
        if (snap_.free_mem_gb(id) >= gb) {
          DeploymentPlan plan{1, 1, {{server.server_id, g, gb}}};
          create_endpoint(m, plan, 1, Consolidation::None, kNoDeadline);
          return true;
        }
      }
    }
    if (!ever) {
      throw PlacementImpossible("no accelerator can hold " + profile.model_id);
    }
    return false;
  }

  std::optional<int> create_hydra_group(int m, int min_s) {
    const auto& entry = models_[m].entry;
    AllocatorOptions opts;
    opts.ttft_model = cfg_.allocator_ttft;
    opts.memory = cfg_.memory;
    opts.min_pipeline = min_s;
    AdmissionCheck admission = [&](const std::string& server_id, double gbit, double budget) {
      const auto& reg = registries_[server_index_.at(server_id)];
      return reg.would_admit(gbit, now_ + budget, now_);
    };

    std::optional<AllocationChoice> choice;
    if (cfg_.fixed_plan) {
      choice = plan_for(entry.profile, entry.slo, entry.timings, snap_, cfg_.fixed_plan->s,
                        cfg_.fixed_plan->w, opts, admission);
      if (!choice) {
        // Admission may reject every server; the fixed plan still applies.
        choice = plan_for(entry.profile, entry.slo, entry.timings, snap_, cfg_.fixed_plan->s,
                          cfg_.fixed_plan->w, opts);
      }
      if (!choice) {
        const double gb = cfg_.memory.low_reservation_gb(entry.profile, cfg_.fixed_plan->s);
        bool ever = std::any_of(snap_.servers().begin(), snap_.servers().end(),
                                [&](const ServerSpec& s) { return s.gpu_mem_gb >= gb; });
        if (!ever) throw PlacementImpossible("fixed plan cannot fit " + entry.profile.model_id);
        return std::nullopt;
      }
    } else {
      try {
        choice = allocate(entry.profile, entry.slo, entry.timings, snap_, opts, admission);
      } catch (const NoCapacity&) {
        return std::nullopt;
      }
      // When contention alone rules out every SLO-feasible plan, wait for the
      // next fetch completion instead of starting a doomed fallback worker.
      if (choice->fallback && network_busy() &&
          !enumerate_choices(entry.profile, entry.slo, entry.timings, snap_, opts).empty()) {
        ++result_.deferred_cold_starts;
        return std::nullopt;
      }
    }
    const int s = choice->plan.pipeline_size;
    int k = std::min(min_s, s);
    Consolidation kind = k == 1 ? Consolidation::ScaleDown : Consolidation::ScaleUp;
    if (cfg_.consolidation == ConsolidationMode::None || s == 1) {
      kind = Consolidation::None;
      if (cfg_.consolidation == ConsolidationMode::None) k = 1;
    }
    create_endpoint(m, choice->plan, k, kind, now_ + choice->fetch_budget_s);
    return s;
  }

  // ---- groups and workers ---------------------------------------------

  void set_phase(Worker& w, WorkerPhase to) {
    if (!legal_transition(w.phase, to)) {
      throw std::logic_error("illegal worker transition " + std::string(to_string(w.phase)) +
                             " -> " + std::string(to_string(to)));
    }
    result_.phases.push_back({now_, w.id, w.phase, to});
    w.phase = to;
  }

  void sample_gpu(const GpuId& gpu) {
    const auto& list = snap_.workers_on(gpu);
    double gb = 0.0;
    int running = 0;
    for (const auto& w : list) {
      gb += w.mem_reserved_gb;
      running += w.running ? 1 : 0;
    }
    result_.utilization.push_back({now_, gpu, gb, static_cast<int>(list.size()), running});
  }

  void close_interval(Worker& w) {
    if (now_ > w.interval_start) {
      result_.reservations.push_back({w.id, models_[w.model].entry.profile.model_id, w.gpu,
                                      w.reserved_gb, w.interval_start, now_});
    }
    w.interval_start = now_;
  }

  int create_endpoint(int m, const DeploymentPlan& plan, int k, Consolidation kind,
                      double fetch_deadline) {
    const auto& entry = models_[m].entry;
    const int e = static_cast<int>(endpoints_.size());
    Endpoint ep;
    ep.id = e;
    ep.model = m;
    ep.s = plan.pipeline_size;
    ep.endpoints = k;
    ep.consolidation = kind;
    ep.standalone = false;

    // Consolidation candidates: full-memory stages first, then low-memory
    // ones (they must grow their reservation), best bandwidth ratio first.
    std::set<int> consolidating;
    if (kind != Consolidation::None) {
      std::vector<int> order(plan.pipeline_size);
      std::iota(order.begin(), order.end(), 0);
      auto key = [&](int i) {
        const auto& srv = snap_.server(plan.servers[i].server_id);
        return std::make_tuple(i < plan.full_mem_workers ? 0 : 1, srv.ratio(), i);
      };
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
      const int needed = kind == Consolidation::ScaleDown ? 1 : k;
      for (int i = 0; i < needed && i < static_cast<int>(order.size()); ++i) {
        consolidating.insert(order[i]);
      }
    }

    ColdStartRecord cs;
    cs.model_id = entry.profile.model_id;
    cs.start_s = now_;
    cs.plan = plan;
    cs.endpoints = k;
    cs.consolidation = kind;
    ep.cold_start = static_cast<int>(result_.cold_starts.size());
    result_.cold_starts.push_back(cs);

    const StartupMode mode = cfg_.startup.value_or(cfg_.policy == Policy::SequentialBaseline
                                                       ? StartupMode::Sequential
                                                       : StartupMode::Overlapped);
    for (int i = 0; i < plan.pipeline_size; ++i) {
      const auto& slot = plan.servers[i];
      Worker w;
      w.id = static_cast<WorkerId>(workers_.size());
      w.model = m;
      w.endpoint = e;
      w.stage_index = i;
      w.server = server_index_.at(slot.server_id);
      w.gpu = slot.gpu();
      w.full_memory = i < plan.full_mem_workers;
      w.reserved_gb = slot.mem_reserved_gb;
      w.interval_start = now_;
      w.consolidating = consolidating.contains(i);
      w.fetch_deadline = fetch_deadline;
      const auto& srv = snap_.servers()[w.server];
      w.plan = build_stage_plan(entry.profile, entry.timings, plan, i, mode, srv.pcie_gbps,
                                w.consolidating);
      w.runs.assign(w.plan.stages.size(), StageRun{});
      snap_.reserve(w.gpu, {w.id, entry.profile.model_id, w.reserved_gb, false});
      sample_gpu(w.gpu);
      ep.workers.push_back(w.id);
      workers_.push_back(std::move(w));
    }
    endpoints_.push_back(std::move(ep));
    models_[m].endpoints.push_back(e);
    for (WorkerId id : endpoints_[e].workers) start_ready_stages(id);
    return e;
  }

  bool preds_done(const Worker& w, int i) const {
    for (int p : w.plan.stages[i].preds) {
      if (w.runs[p].status != StageStatus::Done) return false;
    }
    return true;
  }

  void start_ready_stages(WorkerId id) {
    bool progress = true;
    while (progress) {
      progress = false;
      for (std::size_t i = 0; i < workers_[id].plan.stages.size(); ++i) {
        auto& w = workers_[id];
        if (w.phase == WorkerPhase::Terminated) return;
        if (w.runs[i].status != StageStatus::Pending || !preds_done(w, static_cast<int>(i))) {
          continue;
        }
        start_stage(id, static_cast<int>(i));
        progress = true;
      }
    }
  }

  void skip_background(WorkerId id) {
    auto& w = workers_[id];
    w.consolidating = false;
    for (std::size_t i = 0; i < w.plan.stages.size(); ++i) {
      if (w.plan.stages[i].background && w.runs[i].status == StageStatus::Pending) {
        w.runs[i].status = StageStatus::Skipped;
      }
    }
  }

  bool grow_to_full(WorkerId id) {
    auto& w = workers_[id];
    if (w.full_memory) return true;
    const double full = cfg_.memory.full_reservation_gb(models_[w.model].entry.profile);
    if (snap_.free_mem_gb(w.gpu) < full - w.reserved_gb) return false;
    close_interval(w);
    snap_.resize(w.gpu, w.id, full);
    w.reserved_gb = full;
    w.full_memory = true;
    sample_gpu(w.gpu);
    return true;
  }

  void start_stage(WorkerId id, int i) {
    auto& w = workers_[id];
    auto& run = w.runs[i];
    const auto& st = w.plan.stages[i];
    run.status = StageStatus::Running;
    run.start = now_;
    switch (st.kind) {
      case StageKind::Fetch: {
        if (st.background && !grow_to_full(id)) {
          run.status = StageStatus::Pending;
          skip_background(id);
          check_consolidation(workers_[id].endpoint);
          return;
        }
        result_.fetches.push_back({id, snap_.servers()[w.server].server_id, st.part,
                                   st.size_gbit, now_, -1.0});
        w.fetch_record = result_.fetches.size() - 1;
        if (st.size_gbit <= 0) {
          complete_stage(id, i);
          return;
        }
        if (st.background && !cfg_.background_competes) {
          const double nic = snap_.servers()[w.server].nic_gbps;
          push(now_ + st.size_gbit / nic, EventKind::StageComplete, static_cast<std::int64_t>(id), i);
          return;
        }
        const int server = w.server;
        const double deadline = st.background ? kNoDeadline : w.fetch_deadline;
        w.active_fetch = i;
        settle_server(server);
        registries_[server].add(id, st.size_gbit, deadline, now_);
        reschedule_server(server);
        return;
      }
      case StageKind::Prefill:
        complete_stage(id, i);
        return;
      default:
        push(now_ + st.duration_s, EventKind::StageComplete, static_cast<std::int64_t>(id), i);
        return;
    }
  }

  void on_stage_timer(WorkerId id, int i) {
    auto& w = workers_[id];
    if (w.phase == WorkerPhase::Terminated || w.runs[i].status != StageStatus::Running) return;
    w.runs[i].timer_done = true;
    const auto& st = w.plan.stages[i];
    if (st.streams_from >= 0 && w.runs[st.streams_from].status != StageStatus::Done) return;
    complete_stage(id, i);
  }

  void complete_stage(WorkerId id, int i) {
    {
      auto& w = workers_[id];
      w.runs[i].status = StageStatus::Done;
      const auto& st = w.plan.stages[i];
      if (st.kind == StageKind::Fetch) {
        result_.fetches[w.fetch_record].end_s = now_;
        for (std::size_t j = 0; j < w.plan.stages.size(); ++j) {
          if (w.plan.stages[j].streams_from == i && w.runs[j].status == StageStatus::Running &&
              w.runs[j].timer_done) {
            complete_stage(id, static_cast<int>(j));
          }
        }
      }
    }
    auto& w = workers_[id];
    if (i == w.plan.prefill_stage) {
      w.ready = true;
      on_worker_ready(id);
    }
    if (i == workers_[id].plan.background_done_stage) {
      workers_[id].bg_done = true;
      check_consolidation(workers_[id].endpoint);
    }
    start_ready_stages(id);
  }

  void on_worker_ready(WorkerId id) {
    const int e = workers_[id].endpoint;
    auto& ep = endpoints_[e];
    for (WorkerId other : ep.workers) {
      if (!workers_[other].ready) return;
    }
    ep.ready = true;
    result_.cold_starts[ep.cold_start].ready_s = now_;
    for (WorkerId wid : ep.workers) {
      auto& w = workers_[wid];
      set_phase(w, WorkerPhase::PipelineServing);
      if (w.consolidating) set_phase(w, WorkerPhase::BackgroundLoading);
    }
    check_consolidation(e);
    dispatch(ep.model);
    maybe_keepalive(e);
  }

  // ---- network --------------------------------------------------------

  void settle_server(int server) {
    auto done = registries_[server].settle(now_);
    for (WorkerId id : done) on_fetch_drained(id);
  }

  void on_fetch_drained(WorkerId id) {
    auto& w = workers_[id];
    const int i = w.active_fetch;
    if (i < 0) return;
    w.active_fetch = -1;
    complete_stage(id, i);
  }

  void reschedule_server(int server) {
    ++server_gen_[server];
    auto next = registries_[server].next_completion_s();
    if (next) {
      push(std::max(*next, now_), EventKind::FetchRateChange, server,
           static_cast<std::int64_t>(server_gen_[server]));
    }
  }

  void on_rate_change(int server, std::uint64_t gen) {
    if (gen != server_gen_[server]) return;
    auto& reg = registries_[server];
    auto done = reg.settle(now_);
    if (done.empty() && !reg.empty()) {
      // Rounding left the earliest fetch a hair above zero.
      auto it = std::min_element(reg.records().begin(), reg.records().end(),
                                 [](const auto& a, const auto& b) {
                                   return a.pending_gbit < b.pending_gbit;
                                 });
      if (it->pending_gbit <= 1e-6 * std::max(1.0, it->demand_gbit)) {
        WorkerId id = it->worker_id;
        reg.on_fetch_complete(id, now_);
        done.push_back(id);
      }
    }
    for (WorkerId id : done) on_fetch_drained(id);
    reschedule_server(server);
    if (!done.empty()) {
      for (std::size_t m = 0; m < models_.size(); ++m) {
        if (!models_[m].queue.empty()) schedule_scale_check(static_cast<int>(m));
      }
    }
  }

  bool network_busy() const {
    return std::any_of(registries_.begin(), registries_.end(),
                       [](const ContentionRegistry& r) { return !r.empty(); });
  }

  double min_link_share(int e) {
    double share = std::numeric_limits<double>::infinity();
    for (WorkerId id : endpoints_[e].workers) {
      const int server = workers_[id].server;
      settle_server(server);
      reschedule_server(server);
      const auto& reg = registries_[server];
      share = std::min(share, reg.bandwidth_gbps() / static_cast<double>(reg.size() + 1));
    }
    return share;
  }

  // ---- consolidation --------------------------------------------------

  void check_consolidation(int e) {
    auto& ep = endpoints_[e];
    if (!ep.alive || !ep.ready || ep.migrating || ep.standalone ||
        ep.consolidation == Consolidation::None) {
      return;
    }
    std::vector<WorkerId> survivors;
    for (WorkerId id : ep.workers) {
      const auto& w = workers_[id];
      if (!w.consolidating) continue;
      if (!w.bg_done) return;
      survivors.push_back(id);
    }
    if (survivors.empty()) {
      // Nobody could hold the full model: keep serving as a pipeline.
      ep.consolidation = Consolidation::None;
      ep.endpoints = 1;
      for (WorkerId id : ep.workers) {
        auto& w = workers_[id];
        if (w.phase == WorkerPhase::BackgroundLoading) set_phase(w, WorkerPhase::Draining);
      }
      maybe_keepalive(e);
      return;
    }
    start_migration(e, survivors);
  }

  void start_migration(int e, const std::vector<WorkerId>& survivors) {
    const double drain = token_time(e);
    std::vector<int> tokens;
    for (int r : endpoints_[e].live) {
      tokens.push_back(requests_[r].rec.input_tokens + requests_[r].emitted);
    }
    const double share = min_link_share(e);
    auto& ep = endpoints_[e];
    const auto& profile = models_[ep.model].entry.profile;
    auto cost = migrate_kv(drain, tokens, profile.kv_bytes_per_token, ep.s, share);
    ep.migrating = true;
    ++ep.keepalive_gen;
    for (WorkerId id : ep.workers) {
      auto& w = workers_[id];
      if (!w.consolidating && w.phase == WorkerPhase::PipelineServing) {
        set_phase(w, WorkerPhase::Draining);
      }
    }
    result_.migrations.push_back({profile.model_id, now_, drain, cost.transfer_s,
                                  cost.transfer_gbit, static_cast<int>(survivors.size()),
                                  static_cast<int>(tokens.size())});
    push(now_ + cost.pause_s, EventKind::MigrationDone, e);
  }

  void on_migration_done(int e) {
    const int m = endpoints_[e].model;
    std::vector<int> fresh;
    std::vector<WorkerId> peers;
    for (WorkerId id : endpoints_[e].workers) {
      auto& w = workers_[id];
      if (w.consolidating && w.bg_done) {
        Endpoint solo;
        solo.id = static_cast<int>(endpoints_.size());
        solo.model = m;
        solo.workers = {id};
        solo.s = 1;
        solo.standalone = true;
        solo.endpoints = 1;
        solo.ready = true;
        solo.cold_start = endpoints_[e].cold_start;
        w.endpoint = solo.id;
        set_phase(w, WorkerPhase::Standalone);
        fresh.push_back(solo.id);
        endpoints_.push_back(std::move(solo));
      } else {
        peers.push_back(id);
      }
    }
    auto& ep = endpoints_[e];
    ep.alive = false;
    ep.migrating = false;
    auto& list = models_[m].endpoints;
    list.erase(std::find(list.begin(), list.end(), e));
    list.insert(list.end(), fresh.begin(), fresh.end());

    for (WorkerId id : peers) terminate_worker(id);

    const auto live = ep.live;
    endpoints_[e].live.clear();
    for (std::size_t i = 0; i < live.size(); ++i) {
      const int target = fresh[i % fresh.size()];
      requests_[live[i]].endpoint = target;
      endpoints_[target].live.push_back(live[i]);
    }
    for (int f : fresh) refresh_running(f);
    for (int r : live) {
      auto& req = requests_[r];
      if (req.blocked) {
        req.blocked = false;
        push(now_ + token_time(req.endpoint), EventKind::TokenEmitted, r);
      }
    }
    dispatch(m);
    for (int f : fresh) maybe_keepalive(f);
  }

  void terminate_worker(WorkerId id) {
    auto& w = workers_[id];
    if (w.phase == WorkerPhase::Terminated) return;
    if (w.phase == WorkerPhase::BackgroundLoading) set_phase(w, WorkerPhase::Draining);
    if (w.active_fetch >= 0) {
      registries_[w.server].on_fetch_complete(id, now_);
      w.active_fetch = -1;
      reschedule_server(w.server);
    }
    close_interval(w);
    set_phase(w, WorkerPhase::Terminated);
    snap_.release(w.gpu, w.id);
    sample_gpu(w.gpu);
  }

  // ---- lifecycle ------------------------------------------------------

  bool consolidation_pending(const Endpoint& ep) const {
    return !ep.standalone && ep.consolidation != Consolidation::None;
  }

  void maybe_keepalive(int e) {
    auto& ep = endpoints_[e];
    if (!ep.alive || !ep.ready || ep.migrating || !ep.live.empty() || consolidation_pending(ep)) {
      return;
    }
    ++ep.keepalive_gen;
    push(now_ + cfg_.keep_alive_s, EventKind::KeepAliveExpire, e,
         static_cast<std::int64_t>(ep.keepalive_gen));
  }

  void on_keepalive(int e, std::uint64_t gen) {
    auto& ep = endpoints_[e];
    if (!ep.alive || gen != ep.keepalive_gen || !ep.live.empty() || ep.migrating) return;
    const int m = ep.model;
    // Never retire capacity the autoscaler would immediately ask for again.
    if (standalone_equivalents(m) - ep.endpoints < desired(m)) {
      ++ep.keepalive_gen;
      push(now_ + cfg_.window_s, EventKind::KeepAliveExpire, e,
           static_cast<std::int64_t>(ep.keepalive_gen));
      return;
    }
    ep.alive = false;
    auto& list = models_[m].endpoints;
    list.erase(std::find(list.begin(), list.end(), e));
    for (WorkerId id : ep.workers) terminate_worker(id);
    for (std::size_t i = 0; i < models_.size(); ++i) {
      if (!models_[i].queue.empty()) schedule_scale_check(static_cast<int>(i));
    }
  }

  bool work_remaining() const {
    if (pending_arrivals_ > 0) return true;
    for (const auto& m : models_) {
      if (!m.queue.empty() || !m.endpoints.empty()) return true;
    }
    return false;
  }

  void on_window_tick() {
    const bool timed_out = now_ > last_arrival_ + cfg_.drain_timeout_s;
    for (std::size_t m = 0; m < models_.size(); ++m) {
      models_[m].demand.roll_window();
      if (timed_out) reject_queue(static_cast<int>(m));
    }
    // Predicted demand is not acted on once the arrival stream is exhausted.
    for (std::size_t m = 0; m < models_.size(); ++m) {
      if (pending_arrivals_ > 0 || !models_[m].queue.empty()) autoscale(static_cast<int>(m));
    }
    if (work_remaining()) push(now_ + cfg_.window_s, EventKind::WindowTick);
  }

  void finish() {
    result_.end_time_s = now_;
    for (auto& w : workers_) {
      if (w.phase != WorkerPhase::Terminated) close_interval(w);
    }
    for (auto& req : requests_) {
      if (!req.done) {
        req.rec.rejected = true;
        req.rec.ttft_s = std::numeric_limits<double>::infinity();
      }
      result_.records.push_back(std::move(req.rec));
    }
  }

  SimConfig cfg_;
  ClusterSnapshot snap_;
  std::map<std::string, int> server_index_;
  std::vector<ContentionRegistry> registries_;
  std::vector<std::uint64_t> server_gen_;
  std::map<std::string, int> model_index_;
  std::vector<ModelState> models_;
  std::vector<Request> requests_;
  std::vector<Worker> workers_;
  std::vector<Endpoint> endpoints_;
  std::priority_queue<Event, std::vector<Event>, EventLater> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  double last_arrival_ = 0.0;
  int pending_arrivals_ = 0;
  SimResult result_;
};

}  // namespace

SimResult run(const Scenario& scenario) {
  scenario.validate();
  Engine engine(scenario);
  return engine.run();
}

}  // namespace hydra
