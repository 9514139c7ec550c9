#include "hydra/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hydra/errors.hpp"
#include "json.hpp"

namespace hydra {

using nlohmann::json;

namespace {

// Reader over one JSON object that names the path of every bad key.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) const {
    seen_.insert(key);
    if (!j_.contains(key)) throw ValidationError(path_ + ": missing key '" + key + "'");
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  double num(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw ValidationError(where(key) + ": expected a number");
    return v.get<double>();
  }
  double num(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
  }

  long long integer(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number_integer()) throw ValidationError(where(key) + ": expected an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::string str(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw ValidationError(where(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = at(key);
    if (!v.is_boolean()) throw ValidationError(where(key) + ": expected a boolean");
    return v.get<bool>();
  }

  const json& array(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_array()) throw ValidationError(where(key) + ": expected an array");
    return v;
  }

  Obj object(const std::string& key) const { return Obj(at(key), where(key)); }

  // Call after reading every known key.
  void done() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.contains(k)) throw ValidationError(path_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

std::string idx(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

MemoryPolicy read_memory(const Obj& o) {
  MemoryPolicy m;
  m.quantum_gb = o.num("quantum_gb", m.quantum_gb);
  m.headroom = o.num("headroom", m.headroom);
  m.weight_overhead = o.num("weight_overhead", m.weight_overhead);
  o.done();
  return m;
}

TtftModel parse_ttft_model(const std::string& s, const std::string& where) {
  if (s == "overlapped") return TtftModel::Overlapped;
  if (s == "basic") return TtftModel::Basic;
  throw ValidationError(where + ": expected 'overlapped' or 'basic'");
}

ConsolidationMode parse_consolidation(const std::string& s, const std::string& where) {
  if (s == "auto") return ConsolidationMode::Auto;
  if (s == "none") return ConsolidationMode::None;
  throw ValidationError(where + ": expected 'auto' or 'none'");
}

SimConfig read_config(const Obj& o) {
  SimConfig c;
  try {
    c.policy = parse_policy(o.str("policy", std::string(to_string(c.policy))));
  } catch (const ValidationError& e) {
    throw ValidationError(o.where("policy") + ": " + e.what());
  }
  if (o.has("memory")) c.memory = read_memory(o.object("memory"));
  if (o.has("allocator_ttft")) {
    c.allocator_ttft = parse_ttft_model(o.str("allocator_ttft"), o.where("allocator_ttft"));
  }
  if (o.has("consolidation")) {
    c.consolidation = parse_consolidation(o.str("consolidation"), o.where("consolidation"));
  }
  if (o.has("startup")) {
    const auto s = o.str("startup");
    if (s == "sequential") {
      c.startup = StartupMode::Sequential;
    } else if (s == "overlapped") {
      c.startup = StartupMode::Overlapped;
    } else {
      throw ValidationError(o.where("startup") + ": expected 'sequential' or 'overlapped'");
    }
  }
  if (o.has("fixed_plan") && !o.at("fixed_plan").is_null()) {
    auto f = o.object("fixed_plan");
    c.fixed_plan = FixedPlan{static_cast<int>(f.integer("s")), static_cast<int>(f.integer("w"))};
    f.done();
  }
  c.batch_capacity = static_cast<int>(o.integer("batch_capacity", c.batch_capacity));
  c.window_s = o.num("window_s", c.window_s);
  c.window_ring = static_cast<int>(o.integer("window_ring", c.window_ring));
  c.keep_alive_s = o.num("keep_alive_s", c.keep_alive_s);
  c.background_competes = o.boolean("background_competes", c.background_competes);
  c.drain_timeout_s = o.num("drain_timeout_s", c.drain_timeout_s);
  o.done();
  return c;
}

ServerSpec read_server(const Obj& o) {
  ServerSpec s;
  s.server_id = o.str("server_id");
  s.nic_gbps = o.num("nic_gbps");
  s.pcie_gbps = o.num("pcie_gbps");
  s.gpu_count = static_cast<int>(o.integer("gpu_count"));
  s.gpu_mem_gb = o.num("gpu_mem_gb");
  o.done();
  return s;
}

// Model size is given either in gigabits or in gigabytes (converted here).
double read_size_gbit(const Obj& o) {
  const bool gbit = o.has("size_gbit");
  const bool gb = o.has("size_gb");
  if (gbit == gb) throw ValidationError(o.where("size_gbit") + ": give exactly one of size_gbit, size_gb");
  return gbit ? o.num("size_gbit") : o.num("size_gb") * 8.0;
}

StageTimings read_timings(const Obj& o) {
  StageTimings t;
  t.container_create_s = o.num("container_create_s");
  t.cuda_init_s = o.num("cuda_init_s");
  t.library_load_s = o.num("library_load_s");
  t.runtime_total_s = o.num("runtime_total_s");
  t.net_hop_s = o.num("net_hop_s");
  o.done();
  return t;
}

ModelProfile read_profile_fields(const Obj& o, const std::string& id) {
  ModelProfile p;
  p.model_id = id;
  p.size_gbit = read_size_gbit(o);
  p.prefill_time_s = o.num("prefill_time_s");
  p.decode_time_s = o.num("decode_time_s");
  p.kv_bytes_per_token = o.num("kv_bytes_per_token", 0.0);
  return p;
}

ModelEntry read_model(const Obj& o) {
  ModelEntry m;
  m.profile = read_profile_fields(o, o.str("model_id"));
  m.timings = read_timings(o.object("timings"));
  auto slo = o.object("slo");
  m.slo.ttft_slo_s = slo.num("ttft_slo_s");
  m.slo.tpot_slo_s = slo.num("tpot_slo_s");
  slo.done();
  m.app = o.str("app", "");
  o.done();
  return m;
}

RequestSpec read_request(const Obj& o) {
  RequestSpec r;
  r.model_id = o.str("model_id");
  r.arrival_s = o.num("arrival_s");
  r.input_tokens = static_cast<int>(o.integer("input_tokens", 0));
  r.output_tokens = static_cast<int>(o.integer("output_tokens", 1));
  o.done();
  return r;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).string();
}

Catalog read_catalog(const Obj& o, const std::string& base_dir) {
  Catalog c;
  const auto& models = o.array("models");
  for (std::size_t i = 0; i < models.size(); ++i) {
    Obj m(models[i], idx(o.where("models"), i));
    CatalogModel cm;
    cm.size_label = m.str("size_label");
    cm.profile = read_profile_fields(m, cm.size_label);
    cm.timings = read_timings(m.object("timings"));
    cm.warm_ttft_s = m.num("warm_ttft_s");
    cm.warm_tpot_s = m.num("warm_tpot_s");
    m.done();
    cm.profile.validate();
    c.models.push_back(std::move(cm));
  }
  if (o.has("lengths")) {
    auto lengths = o.object("lengths");
    for (AppKind app : {AppKind::Chatbot, AppKind::Code, AppKind::Summarization}) {
      const std::string key(to_string(app));
      if (lengths.has(key)) c.lengths[app] = load_length_csv(resolve(base_dir, lengths.str(key)));
    }
    lengths.done();
  }
  o.done();
  return c;
}

RateMode parse_rate_mode(const std::string& s, const std::string& where) {
  if (s == "even") return RateMode::Even;
  if (s == "trace") return RateMode::TraceWeighted;
  throw ValidationError(where + ": expected 'even' or 'trace'");
}

WorkloadConfig read_workload(const Obj& o) {
  WorkloadConfig w;
  w.cv = o.num("cv", w.cv);
  w.rps = o.num("rps", w.rps);
  w.horizon_s = o.num("horizon_s", w.horizon_s);
  w.seed = static_cast<std::uint64_t>(o.integer("seed", static_cast<long long>(w.seed)));
  w.n_models_per_app = static_cast<int>(o.integer("n_models_per_app", w.n_models_per_app));
  if (o.has("apps")) {
    w.apps.clear();
    for (const auto& a : o.array("apps")) {
      if (!a.is_string()) throw ValidationError(o.where("apps") + ": expected strings");
      w.apps.push_back(parse_app(a.get<std::string>()));
    }
  }
  if (o.has("rate_mode")) w.rate_mode = parse_rate_mode(o.str("rate_mode"), o.where("rate_mode"));
  o.done();
  return w;
}

std::vector<double> read_numbers(const Obj& o, const std::string& key) {
  std::vector<double> out;
  for (const auto& v : o.array(key)) {
    if (!v.is_number()) throw ValidationError(o.where(key) + ": expected numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

SweepGrid read_sweep(const Obj& o) {
  SweepGrid g;
  g.cvs = read_numbers(o, "cvs");
  g.rps = read_numbers(o, "rps");
  if (o.has("policies")) {
    g.policies.clear();
    for (const auto& p : o.array("policies")) {
      if (!p.is_string()) throw ValidationError(o.where("policies") + ": expected strings");
      g.policies.push_back(parse_policy(p.get<std::string>()));
    }
  }
  o.done();
  return g;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

json memory_json(const MemoryPolicy& m) {
  return {{"quantum_gb", m.quantum_gb}, {"headroom", m.headroom},
          {"weight_overhead", m.weight_overhead}};
}

json config_json(const SimConfig& c) {
  json j = {{"policy", std::string(to_string(c.policy))},
            {"memory", memory_json(c.memory)},
            {"allocator_ttft", c.allocator_ttft == TtftModel::Basic ? "basic" : "overlapped"},
            {"consolidation", c.consolidation == ConsolidationMode::None ? "none" : "auto"},
            {"batch_capacity", c.batch_capacity},
            {"window_s", c.window_s},
            {"window_ring", c.window_ring},
            {"keep_alive_s", c.keep_alive_s},
            {"background_competes", c.background_competes},
            {"drain_timeout_s", c.drain_timeout_s}};
  if (c.startup) j["startup"] = *c.startup == StartupMode::Sequential ? "sequential" : "overlapped";
  if (c.fixed_plan) j["fixed_plan"] = {{"s", c.fixed_plan->s}, {"w", c.fixed_plan->w}};
  return j;
}

json timings_json(const StageTimings& t) {
  return {{"container_create_s", t.container_create_s},
          {"cuda_init_s", t.cuda_init_s},
          {"library_load_s", t.library_load_s},
          {"runtime_total_s", t.runtime_total_s},
          {"net_hop_s", t.net_hop_s}};
}

}  // namespace

Scenario Experiment::scenario() const {
  if (catalog && workload) {
    return build_scenario(*workload, *catalog, servers, config, trace ? &*trace : nullptr);
  }
  Scenario sc;
  sc.config = config;
  sc.servers = servers;
  sc.models = models;
  sc.requests = requests;
  return sc;
}

Experiment parse_experiment(const std::string& json_text, const std::string& base_dir) {
  const json root = parse_json(json_text);
  Obj o(root, "$");
  Experiment ex;
  if (o.has("config")) ex.config = read_config(o.object("config"));
  const auto& servers = o.array("servers");
  for (std::size_t i = 0; i < servers.size(); ++i) {
    ex.servers.push_back(read_server(Obj(servers[i], idx("$.servers", i))));
  }
  if (o.has("models")) {
    const auto& models = o.array("models");
    for (std::size_t i = 0; i < models.size(); ++i) {
      ex.models.push_back(read_model(Obj(models[i], idx("$.models", i))));
    }
  }
  if (o.has("requests")) {
    const auto& reqs = o.array("requests");
    for (std::size_t i = 0; i < reqs.size(); ++i) {
      ex.requests.push_back(read_request(Obj(reqs[i], idx("$.requests", i))));
    }
  }
  if (o.has("catalog")) ex.catalog = read_catalog(o.object("catalog"), base_dir);
  if (o.has("workload")) ex.workload = read_workload(o.object("workload"));
  if (o.has("trace")) ex.trace = load_trace_csv(resolve(base_dir, o.str("trace")));
  if (o.has("sweep")) ex.sweep = read_sweep(o.object("sweep"));
  o.done();
  if (ex.workload && !ex.catalog) throw ValidationError("$.workload: needs a catalog section");
  return ex;
}

Experiment load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  auto dir = std::filesystem::path(path).parent_path().string();
  return parse_experiment(ss.str(), dir.empty() ? "." : dir);
}

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["config"] = config_json(sc.config);
  j["servers"] = json::array();
  for (const auto& s : sc.servers) {
    j["servers"].push_back({{"server_id", s.server_id},
                            {"nic_gbps", s.nic_gbps},
                            {"pcie_gbps", s.pcie_gbps},
                            {"gpu_count", s.gpu_count},
                            {"gpu_mem_gb", s.gpu_mem_gb}});
  }
  j["models"] = json::array();
  for (const auto& m : sc.models) {
    j["models"].push_back({{"model_id", m.profile.model_id},
                           {"size_gbit", m.profile.size_gbit},
                           {"prefill_time_s", m.profile.prefill_time_s},
                           {"decode_time_s", m.profile.decode_time_s},
                           {"kv_bytes_per_token", m.profile.kv_bytes_per_token},
                           {"timings", timings_json(m.timings)},
                           {"slo", {{"ttft_slo_s", m.slo.ttft_slo_s}, {"tpot_slo_s", m.slo.tpot_slo_s}}},
                           {"app", m.app}});
  }
  j["requests"] = json::array();
  for (const auto& r : sc.requests) {
    j["requests"].push_back({{"model_id", r.model_id},
                             {"arrival_s", r.arrival_s},
                             {"input_tokens", r.input_tokens},
                             {"output_tokens", r.output_tokens}});
  }
  return j.dump(2) + "\n";
}

Scenario scenario_from_json(const std::string& json_text) {
  auto ex = parse_experiment(json_text);
  return ex.scenario();
}

std::string plan_to_json(const DeploymentPlan& plan) {
  json j = {{"pipeline_size", plan.pipeline_size}, {"full_mem_workers", plan.full_mem_workers}};
  j["servers"] = json::array();
  for (const auto& s : plan.servers) {
    j["servers"].push_back({{"server_id", s.server_id},
                            {"gpu_index", s.gpu_index},
                            {"mem_reserved_gb", s.mem_reserved_gb}});
  }
  return j.dump();
}

DeploymentPlan plan_from_json(const std::string& json_text) {
  const json root = parse_json(json_text);
  Obj o(root, "$");
  DeploymentPlan plan;
  plan.pipeline_size = static_cast<int>(o.integer("pipeline_size"));
  plan.full_mem_workers = static_cast<int>(o.integer("full_mem_workers"));
  const auto& servers = o.array("servers");
  for (std::size_t i = 0; i < servers.size(); ++i) {
    Obj s(servers[i], idx("$.servers", i));
    plan.servers.push_back({s.str("server_id"), static_cast<int>(s.integer("gpu_index")),
                            s.num("mem_reserved_gb")});
    s.done();
  }
  o.done();
  plan.validate();
  return plan;
}

}  // namespace hydra
