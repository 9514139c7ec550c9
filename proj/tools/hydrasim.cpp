// hydrasim: command-line runner for the cold-start simulator.
//
//   hydrasim predict  --config c.json --s 4 --w 0
//   hydrasim allocate --config c.json [--model id] [--basic]
//   hydrasim simulate --config c.json --out dir [--policy p] [--events] [--dump-contention]
//   hydrasim sweep    --config c.json --out sweep.csv [--cv 2,8] [--rps 0.4,0.6]
//   hydrasim generate --config c.json [--trace t.csv] [--cv 8] [--rps 0.6] --out s.json

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hydra/allocator.hpp"
#include "hydra/config.hpp"
#include "hydra/errors.hpp"
#include "hydra/metrics.hpp"
#include "hydra/predictor.hpp"
#include "hydra/simulator.hpp"
#include "hydra/workload.hpp"

namespace fs = std::filesystem;
using namespace hydra;

namespace {

const ModelEntry& pick_model(const Scenario& sc, const std::string& id) {
  if (sc.models.empty()) throw ValidationError("config defines no models");
  if (id.empty()) return sc.models.front();
  for (const auto& m : sc.models) {
    if (m.profile.model_id == id) return m;
  }
  throw ValidationError("unknown model " + id);
}

std::string servers_text(const DeploymentPlan& plan) {
  std::string out;
  for (const auto& s : plan.servers) {
    if (!out.empty()) out += ';';
    out += s.server_id + ":" + std::to_string(s.gpu_index) + ":" + format_double(s.mem_reserved_gb);
  }
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw ValidationError("cannot write " + p.string());
  return out;
}

int cmd_predict(const std::string& config, const std::string& model, int s, int w) {
  const auto sc = load_experiment(config).scenario();
  sc.validate();
  const auto& m = pick_model(sc, model);
  ClusterSnapshot snap(sc.servers);
  MemoryPolicy mem = sc.config.memory;
  auto full = capable_servers(snap, mem.full_reservation_gb(m.profile));
  auto low = capable_servers(snap, mem.low_reservation_gb(m.profile, s));
  PredictionInput in{m.profile, m.timings, s, w, {}};
  auto chosen = select_servers(full, low, s, w);
  if (!chosen) throw ValidationError("not enough servers for s=" + std::to_string(s));
  std::string ids;
  for (const auto& c : *chosen) {
    in.chosen.push_back({c.nic_gbps, c.pcie_gbps});
    ids += (ids.empty() ? "" : ";") + c.server_id;
  }
  in.validate();
  std::cout << "model_id,s,w,servers,ttft_basic_s,ttft_overlapped_s,tpot_s\n"
            << m.profile.model_id << ',' << s << ',' << w << ',' << ids << ','
            << format_double(predict_ttft_basic(in)) << ','
            << format_double(predict_ttft_overlapped(in)) << ','
            << format_double(predict_tpot(m.profile, m.timings, s, w)) << '\n';
  return 0;
}

int cmd_allocate(const std::string& config, const std::string& model, bool basic) {
  const auto sc = load_experiment(config).scenario();
  sc.validate();
  const auto& m = pick_model(sc, model);
  ClusterSnapshot snap(sc.servers);
  AllocatorOptions opts;
  opts.memory = sc.config.memory;
  opts.ttft_model = basic ? TtftModel::Basic : TtftModel::Overlapped;
  const auto feasible = enumerate_choices(m.profile, m.slo, m.timings, snap, opts);
  const auto chosen = allocate(m.profile, m.slo, m.timings, snap, opts);
  std::cout << "chosen," << plan_to_json(chosen.plan) << '\n';
  std::cout << "s,w,servers,ttft_pred_s,tpot_pred_s,sharing_score,chosen\n";
  for (const auto& c : feasible) {
    std::cout << c.plan.pipeline_size << ',' << c.plan.full_mem_workers << ','
              << servers_text(c.plan) << ',' << format_double(c.ttft_pred_s) << ','
              << format_double(c.tpot_pred_s) << ',' << sharing_score(c.plan, snap) << ','
              << (c.plan == chosen.plan ? 1 : 0) << '\n';
  }
  return 0;
}

struct SimulateFlags {
  std::string config;
  std::string out = ".";
  std::string policy;
  std::optional<std::uint64_t> seed;
  bool events = false;
  bool contention = false;
};

int cmd_simulate(const SimulateFlags& f) {
  auto ex = load_experiment(f.config);
  if (!f.policy.empty()) ex.config.policy = parse_policy(f.policy);
  if (f.seed) {
    if (!ex.workload) throw ValidationError("--seed needs a workload section");
    ex.workload->seed = *f.seed;
  }
  ex.config.record_trace = f.events;
  ex.config.record_contention = f.contention;
  const auto sc = ex.scenario();
  const auto result = run(sc);
  fs::create_directories(f.out);
  const fs::path dir(f.out);
  {
    auto out = open_out(dir / "requests.csv");
    write_requests_csv(out, result.records);
  }
  {
    auto out = open_out(dir / "summary.csv");
    write_summary_csv(out, summarize(result));
  }
  {
    auto out = open_out(dir / "utilization.csv");
    write_utilization_csv(out, result.utilization);
  }
  if (f.events) {
    auto out = open_out(dir / "events.csv");
    out << "time_s,seq,kind,a,b\n";
    for (const auto& line : result.trace) out << line << '\n';
  }
  if (f.contention) {
    auto out = open_out(dir / "contention.csv");
    out << "time_s,server_id,worker,pending_gbit,deadline_s\n";
    for (const auto& c : result.contention) {
      out << format_double(c.time_s) << ',' << c.server_id << ',' << c.worker << ','
          << format_double(c.pending_gbit) << ',' << format_double(c.deadline_s) << '\n';
    }
  }
  return 0;
}

struct SweepFlags {
  std::string config;
  std::string out = "sweep.csv";
  std::vector<double> cvs;
  std::vector<double> rps;
  std::vector<std::string> policies;
};

int cmd_sweep(const SweepFlags& f) {
  const auto ex = load_experiment(f.config);
  if (!ex.catalog || !ex.workload) throw ValidationError("sweep needs catalog and workload sections");
  SweepGrid grid = ex.sweep.value_or(SweepGrid{});
  if (!f.cvs.empty()) grid.cvs = f.cvs;
  if (!f.rps.empty()) grid.rps = f.rps;
  if (!f.policies.empty()) {
    grid.policies.clear();
    for (const auto& p : f.policies) grid.policies.push_back(parse_policy(p));
  }
  if (grid.cvs.empty()) grid.cvs = {ex.workload->cv};
  if (grid.rps.empty()) grid.rps = {ex.workload->rps};

  struct Cell {
    double cv;
    double rps;
    Policy policy;
  };
  std::vector<Cell> cells;
  for (double cv : grid.cvs) {
    for (double rps : grid.rps) {
      for (Policy p : grid.policies) cells.push_back({cv, rps, p});
    }
  }
  std::vector<std::future<Summary>> jobs;
  for (const auto& c : cells) {
    Experiment e = ex;
    e.workload->cv = c.cv;
    e.workload->rps = c.rps;
    e.config.policy = c.policy;
    auto sc = e.scenario();
    jobs.push_back(std::async(std::launch::async, [sc = std::move(sc)] { return summarize(run(sc)); }));
  }
  auto out = open_out(f.out);
  out << "cv,rps,policy,requests,rejected,ttft_attainment,tpot_attainment,mean_ttft_s,"
         "p99_ttft_s,mean_tpot_s,cost_gb_s,cold_starts\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto s = jobs[i].get();
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    out << format_double(cells[i].cv) << ',' << format_double(cells[i].rps) << ','
        << to_string(cells[i].policy) << ',' << s.requests << ',' << s.rejected << ','
        << opt(s.attainment.ttft) << ',' << opt(s.attainment.tpot) << ',' << opt(s.mean_ttft_s)
        << ',' << opt(s.p99_ttft_s) << ',' << opt(s.mean_tpot_s) << ','
        << format_double(s.cost_gb_s) << ',' << s.cold_starts << '\n';
  }
  return 0;
}

struct GenerateFlags {
  std::string config;
  std::string out;
  std::string trace;
  std::optional<double> cv;
  std::optional<double> rps;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> apps;
};

int cmd_generate(const GenerateFlags& f) {
  auto ex = load_experiment(f.config);
  if (!ex.catalog) throw ValidationError("generate needs a catalog section");
  if (!ex.workload) ex.workload = WorkloadConfig{};
  if (!f.trace.empty()) {
    ex.trace = load_trace_csv(f.trace);
    ex.workload->rate_mode = RateMode::TraceWeighted;
  }
  if (f.cv) ex.workload->cv = *f.cv;
  if (f.rps) ex.workload->rps = *f.rps;
  if (f.seed) ex.workload->seed = *f.seed;
  if (!f.apps.empty()) {
    ex.workload->apps.clear();
    for (const auto& a : f.apps) ex.workload->apps.push_back(parse_app(a));
  }
  const auto text = scenario_to_json(ex.scenario());
  if (f.out.empty()) {
    std::cout << text;
  } else {
    auto out = open_out(f.out);
    out << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serverless LLM cold-start simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string model;
  int s = 1;
  int w = 1;
  auto* predict = app.add_subcommand("predict", "Print TTFT and TPOT predictions for (s, w)");
  predict->add_option("--config", config, "Config file")->required();
  predict->add_option("--model", model, "Model id (default: first model)");
  predict->add_option("--s", s, "Pipeline size")->check(CLI::Range(1, 4));
  predict->add_option("--w", w, "Full-memory workers")->check(CLI::Range(0, 4));

  bool basic = false;
  auto* alloc = app.add_subcommand("allocate", "Print the chosen plan and the feasible set");
  alloc->add_option("--config", config, "Config file")->required();
  alloc->add_option("--model", model, "Model id (default: first model)");
  alloc->add_flag("--basic", basic, "Use the sequential TTFT predictor");

  SimulateFlags sim;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Run one scenario and write CSV outputs");
  simulate->add_option("--config", sim.config, "Config file")->required();
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_option("--policy", sim.policy, "sequential-baseline, overlapped-single or hydraserve");
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "Workload seed override");
  simulate->add_flag("--events", sim.events, "Write events.csv");
  simulate->add_flag("--dump-contention", sim.contention, "Write contention.csv");

  SweepFlags sw;
  auto* sweep = app.add_subcommand("sweep", "Run a CV x RPS x policy grid");
  sweep->add_option("--config", sw.config, "Config file")->required();
  sweep->add_option("--out", sw.out, "Output CSV");
  sweep->add_option("--cv", sw.cvs, "CV values")->delimiter(',');
  sweep->add_option("--rps", sw.rps, "RPS values")->delimiter(',');
  sweep->add_option("--policies", sw.policies, "Policies")->delimiter(',');

  GenerateFlags gen;
  double gen_cv = 0;
  double gen_rps = 0;
  std::uint64_t gen_seed = 0;
  auto* generate = app.add_subcommand("generate", "Write a generated scenario as JSON");
  generate->add_option("--config", gen.config, "Config file with catalog")->required();
  generate->add_option("--out", gen.out, "Output file (default: stdout)");
  generate->add_option("--trace", gen.trace, "Trace CSV (function_id,minute_index,count)");
  auto* cv_opt = generate->add_option("--cv", gen_cv, "Arrival CV");
  auto* rps_opt = generate->add_option("--rps", gen_rps, "Aggregate requests per second");
  auto* gseed_opt = generate->add_option("--seed", gen_seed, "Seed");
  generate->add_option("--apps", gen.apps, "Apps")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*predict) return cmd_predict(config, model, s, w);
    if (*alloc) return cmd_allocate(config, model, basic);
    if (*simulate) {
      if (*seed_opt) sim.seed = sim_seed;
      return cmd_simulate(sim);
    }
    if (*sweep) return cmd_sweep(sw);
    if (*generate) {
      if (*cv_opt) gen.cv = gen_cv;
      if (*rps_opt) gen.rps = gen_rps;
      if (*gseed_opt) gen.seed = gen_seed;
      return cmd_generate(gen);
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const PlanError& e) {
    std::cerr << "plan error: " << e.what() << '\n';
    return 2;
  } catch (const PlacementImpossible& e) {
    std::cerr << "placement impossible: " << e.what() << '\n';
    return 3;
  } catch (const NoCapacity& e) {
    std::cerr << "no capacity: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
