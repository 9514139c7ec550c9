#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hydra/allocator.hpp"
#include "hydra/config.hpp"
#include "hydra/errors.hpp"
#include "hydra/metrics.hpp"
#include "hydra/predictor.hpp"
#include "hydra/simulator.hpp"
#include "hydra/workload.hpp"

namespace py = pybind11;
using namespace hydra;

namespace {

TtftModel parse_ttft(const std::string& name) {
  if (name == "overlapped") return TtftModel::Overlapped;
  if (name == "basic") return TtftModel::Basic;
  throw ValidationError("ttft_model must be 'overlapped' or 'basic'");
}

std::vector<BandwidthPair> bandwidths(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<BandwidthPair> out;
  for (auto [b, p] : pairs) out.push_back({b, p});
  return out;
}

py::dict plan_dict(const AllocationChoice& c) {
  py::list slots;
  for (const auto& s : c.plan.servers) {
    py::dict d;
    d["server_id"] = s.server_id;
    d["gpu_index"] = s.gpu_index;
    d["mem_reserved_gb"] = s.mem_reserved_gb;
    slots.append(d);
  }
  py::dict d;
  d["s"] = c.plan.pipeline_size;
  d["w"] = c.plan.full_mem_workers;
  d["servers"] = slots;
  d["ttft_pred_s"] = c.ttft_pred_s;
  d["tpot_pred_s"] = c.tpot_pred_s;
  d["fetch_budget_s"] = c.fetch_budget_s;
  return d;
}

py::dict record_dict(const RequestRecord& r) {
  py::dict d;
  d["model_id"] = r.model_id;
  d["arrival_s"] = r.arrival_s;
  d["input_tokens"] = r.input_tokens;
  d["output_tokens"] = r.output_tokens;
  d["ttft_s"] = r.ttft_s;
  d["tpot_s"] = r.tpot_s;
  d["cold_start"] = r.cold_start;
  d["rejected"] = r.rejected;
  d["ttft_slo_s"] = r.ttft_slo_s;
  d["tpot_slo_s"] = r.tpot_slo_s;
  return d;
}

RequestRecord record_from(const py::dict& d) {
  RequestRecord r;
  r.ttft_s = d["ttft_s"].cast<double>();
  if (d.contains("tpot_s") && !d["tpot_s"].is_none()) r.tpot_s = d["tpot_s"].cast<double>();
  r.output_tokens = d.contains("output_tokens") ? d["output_tokens"].cast<int>() : 2;
  r.rejected = d.contains("rejected") && d["rejected"].cast<bool>();
  r.ttft_slo_s = d["ttft_slo_s"].cast<double>();
  r.tpot_slo_s = d["tpot_slo_s"].cast<double>();
  return r;
}

py::dict summary_dict(const Summary& s) {
  py::dict d;
  d["requests"] = s.requests;
  d["completed"] = s.completed;
  d["rejected"] = s.rejected;
  d["cold_requests"] = s.cold_requests;
  d["ttft_attainment"] = s.attainment.ttft;
  d["tpot_attainment"] = s.attainment.tpot;
  d["mean_ttft_s"] = s.mean_ttft_s;
  d["p50_ttft_s"] = s.p50_ttft_s;
  d["p99_ttft_s"] = s.p99_ttft_s;
  d["mean_tpot_s"] = s.mean_tpot_s;
  d["cost_gb_s"] = s.cost_gb_s;
  d["cold_starts"] = s.cold_starts;
  d["migrations"] = s.migrations;
  d["end_time_s"] = s.end_time_s;
  return d;
}

py::dict run_dict(const Scenario& sc) {
  SimResult r;
  {
    py::gil_scoped_release release;
    r = run(sc);
  }
  py::list records;
  for (const auto& rec : r.records) records.append(record_dict(rec));
  py::dict d;
  d["summary"] = summary_dict(summarize(r));
  d["records"] = records;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Serverless LLM cold-start simulator core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<PlanError>(m, "PlanError", PyExc_ValueError);
  py::register_exception<PlacementImpossible>(m, "PlacementImpossible", PyExc_RuntimeError);
  py::register_exception<NoCapacity>(m, "NoCapacity", PyExc_RuntimeError);

  py::class_<ModelProfile>(m, "ModelProfile")
      .def(py::init([](std::string id, double size_gbit, double t_p, double t_d, double kv) {
             return ModelProfile{std::move(id), size_gbit, t_p, t_d, kv};
           }),
           py::arg("model_id"), py::arg("size_gbit"), py::arg("prefill_time_s"),
           py::arg("decode_time_s"), py::arg("kv_bytes_per_token") = 0.0)
      .def_readwrite("model_id", &ModelProfile::model_id)
      .def_readwrite("size_gbit", &ModelProfile::size_gbit)
      .def_readwrite("prefill_time_s", &ModelProfile::prefill_time_s)
      .def_readwrite("decode_time_s", &ModelProfile::decode_time_s)
      .def_readwrite("kv_bytes_per_token", &ModelProfile::kv_bytes_per_token);

  py::class_<StageTimings>(m, "StageTimings")
      .def(py::init([](double cc, double cu, double l, double c, double n) {
             return StageTimings{cc, cu, l, c, n};
           }),
           py::arg("container_create_s"), py::arg("cuda_init_s"), py::arg("library_load_s"),
           py::arg("runtime_total_s"), py::arg("net_hop_s"))
      .def_readwrite("container_create_s", &StageTimings::container_create_s)
      .def_readwrite("cuda_init_s", &StageTimings::cuda_init_s)
      .def_readwrite("library_load_s", &StageTimings::library_load_s)
      .def_readwrite("runtime_total_s", &StageTimings::runtime_total_s)
      .def_readwrite("net_hop_s", &StageTimings::net_hop_s);

  py::class_<ServerSpec>(m, "ServerSpec")
      .def(py::init([](std::string id, double nic, double pcie, int gpus, double mem) {
             return ServerSpec{std::move(id), nic, pcie, gpus, mem};
           }),
           py::arg("server_id"), py::arg("nic_gbps"), py::arg("pcie_gbps"), py::arg("gpu_count"),
           py::arg("gpu_mem_gb"))
      .def_readwrite("server_id", &ServerSpec::server_id)
      .def_readwrite("nic_gbps", &ServerSpec::nic_gbps)
      .def_readwrite("pcie_gbps", &ServerSpec::pcie_gbps)
      .def_readwrite("gpu_count", &ServerSpec::gpu_count)
      .def_readwrite("gpu_mem_gb", &ServerSpec::gpu_mem_gb);

  m.def(
      "predict_ttft_basic",
      [](const ModelProfile& p, const StageTimings& t, int s, int w,
         const std::vector<std::pair<double, double>>& bw) {
        return predict_ttft_basic({p, t, s, w, bandwidths(bw)});
      },
      py::arg("profile"), py::arg("timings"), py::arg("s"), py::arg("w"), py::arg("bandwidths"),
      "Sequential-stage TTFT; bandwidths holds one (nic_gbps, pcie_gbps) per stage.");
  m.def(
      "predict_ttft_overlapped",
      [](const ModelProfile& p, const StageTimings& t, int s, int w,
         const std::vector<std::pair<double, double>>& bw) {
        return predict_ttft_overlapped({p, t, s, w, bandwidths(bw)});
      },
      py::arg("profile"), py::arg("timings"), py::arg("s"), py::arg("w"), py::arg("bandwidths"));
  m.def("predict_tpot", &predict_tpot, py::arg("profile"), py::arg("timings"), py::arg("s"),
        py::arg("w"));

  m.def(
      "allocate",
      [](const ModelProfile& p, double ttft_slo, double tpot_slo, const StageTimings& t,
         const std::vector<ServerSpec>& servers, const std::string& ttft_model) {
        AllocatorOptions opts;
        opts.ttft_model = parse_ttft(ttft_model);
        return plan_dict(allocate(p, {ttft_slo, tpot_slo}, t, ClusterSnapshot(servers), opts));
      },
      py::arg("profile"), py::arg("ttft_slo_s"), py::arg("tpot_slo_s"), py::arg("timings"),
      py::arg("servers"), py::arg("ttft_model") = "overlapped",
      "Plan a cold start on an idle cluster of the given servers.");

  m.def(
      "run_scenario",
      [](const std::string& json_text) { return run_dict(scenario_from_json(json_text)); },
      py::arg("json_text"), "Run a scenario given as JSON text; returns summary and records.");
  m.def(
      "run_config",
      [](const std::string& path, std::optional<std::string> policy) {
        auto ex = load_experiment(path);
        if (policy) ex.config.policy = parse_policy(*policy);
        return run_dict(ex.scenario());
      },
      py::arg("path"), py::arg("policy") = py::none(),
      "Run an experiment config file, generating its workload if it has one.");

  m.def("sample_arrivals", &sample_arrivals, py::arg("rate_rps"), py::arg("cv"),
        py::arg("horizon_s"), py::arg("seed"));
  m.def("sample_gaps", &sample_gaps, py::arg("rate_rps"), py::arg("cv"), py::arg("n"),
        py::arg("seed"));
  m.def(
      "derive_slos",
      [](double warm_ttft, double warm_tpot, const std::string& app) {
        const auto s = derive_slos(warm_ttft, warm_tpot, parse_app(app));
        return std::pair{s.ttft_slo_s, s.tpot_slo_s};
      },
      py::arg("warm_ttft_s"), py::arg("warm_tpot_s"), py::arg("app"),
      "Returns (ttft_slo_s, tpot_slo_s).");
  m.def(
      "slo_attainment",
      [](const std::vector<py::dict>& records) {
        std::vector<RequestRecord> recs;
        for (const auto& d : records) recs.push_back(record_from(d));
        const auto a = slo_attainment(recs);
        return std::pair{a.ttft, a.tpot};
      },
      py::arg("records"),
      "Returns (ttft, tpot) attainment for records shaped like run_scenario output.");
}
