#include "hydra/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hydra/errors.hpp"

namespace hydra {

namespace {

std::gamma_distribution<double> gap_distribution(double rate_rps, double cv) {
  if (!(rate_rps > 0) || !std::isfinite(rate_rps)) throw ValidationError("rate must be > 0");
  if (!(cv > 0) || !std::isfinite(cv)) throw ValidationError("cv must be > 0");
  const double shape = 1.0 / (cv * cv);
  const double scale = cv * cv / rate_rps;
  return std::gamma_distribution<double>(shape, scale);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

long long to_int(const std::string& cell, const std::string& what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(cell, &used);
  } catch (const std::exception&) {
    throw ValidationError("bad " + what + " '" + cell + "'");
  }
  if (used != cell.size()) throw ValidationError("bad " + what + " '" + cell + "'");
  return v;
}

// Data rows of a CSV with the expected header; blank lines are skipped.
std::vector<std::vector<std::string>> csv_rows(std::string_view text,
                                               const std::vector<std::string>& header) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split(line, ',');
    if (!seen_header) {
      if (cells != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw ValidationError("expected CSV header '" + want + "'");
      }
      seen_header = true;
      continue;
    }
    if (cells.size() != header.size()) throw ValidationError("wrong column count in '" + line + "'");
    rows.push_back(std::move(cells));
  }
  if (!seen_header) throw ValidationError("empty CSV");
  return rows;
}

}  // namespace

std::vector<double> sample_arrivals(double rate_rps, double cv, double horizon_s,
                                    std::uint64_t seed) {
  auto dist = gap_distribution(rate_rps, cv);
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  double t = 0.0;
  while (true) {
    t += dist(rng);
    if (!(t < horizon_s)) break;
    out.push_back(t);
  }
  return out;
}

std::vector<double> sample_gaps(double rate_rps, double cv, std::size_t n, std::uint64_t seed) {
  auto dist = gap_distribution(rate_rps, cv);
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  for (auto& g : out) g = dist(rng);
  return out;
}

std::string_view to_string(AppKind app) {
  switch (app) {
    case AppKind::Chatbot: return "chatbot";
    case AppKind::Code: return "code";
    case AppKind::Summarization: return "summarization";
  }
  return "?";
}

AppKind parse_app(std::string_view name) {
  if (name == "chatbot") return AppKind::Chatbot;
  if (name == "code") return AppKind::Code;
  if (name == "summarization") return AppKind::Summarization;
  throw ValidationError("unknown app '" + std::string(name) + "'");
}

SloSpec derive_slos(double warm_ttft_s, double warm_tpot_s, AppKind app) {
  if (!(warm_ttft_s > 0) || !(warm_tpot_s > 0)) {
    throw ValidationError("warm latencies must be > 0");
  }
  SloSpec slo;
  slo.ttft_slo_s = 5.0 * warm_ttft_s;
  if (app == AppKind::Summarization) slo.ttft_slo_s *= 2.0;
  slo.tpot_slo_s = app == AppKind::Chatbot ? kChatbotTpotSlo : 2.0 * warm_tpot_s;
  return slo;
}

std::vector<std::string> TraceSeries::functions() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : counts) out.push_back(id);
  return out;
}

std::int64_t TraceSeries::total(const std::string& function_id) const {
  auto it = counts.find(function_id);
  if (it == counts.end()) return 0;
  return std::accumulate(it->second.begin(), it->second.end(), std::int64_t{0});
}

TraceSeries parse_trace_csv(std::string_view text) {
  TraceSeries trace;
  for (const auto& row : csv_rows(text, {"function_id", "minute_index", "count"})) {
    const long long minute = to_int(row[1], "minute_index");
    const long long count = to_int(row[2], "count");
    if (minute < 0) throw ValidationError("negative minute_index");
    if (count < 0) throw ValidationError("negative count");
    auto& series = trace.counts[row[0]];
    if (series.size() <= static_cast<std::size_t>(minute)) series.resize(minute + 1, 0);
    series[minute] += count;
  }
  return trace;
}

TraceSeries load_trace_csv(const std::string& path) { return parse_trace_csv(read_file(path)); }

std::vector<std::vector<std::string>> map_round_robin(const std::vector<std::string>& models,
                                                      const std::vector<std::string>& functions) {
  std::vector<std::vector<std::string>> out(models.size());
  if (models.empty()) return out;
  auto m = models;
  auto f = functions;
  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return m[a] < m[b]; });
  std::sort(f.begin(), f.end());
  for (std::size_t j = 0; j < f.size(); ++j) out[order[j % m.size()]].push_back(f[j]);
  return out;
}

std::pair<int, int> LengthTable::sample(std::mt19937_64& rng) const {
  if (rows.empty()) throw ValidationError("empty length table");
  std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
  return rows[pick(rng)];
}

LengthTable parse_length_csv(std::string_view text) {
  LengthTable table;
  for (const auto& row : csv_rows(text, {"input_tokens", "output_tokens"})) {
    const long long in = to_int(row[0], "input_tokens");
    const long long out = to_int(row[1], "output_tokens");
    if (in < 0 || out < 1) throw ValidationError("length row out of range");
    table.rows.emplace_back(static_cast<int>(in), static_cast<int>(out));
  }
  if (table.rows.empty()) throw ValidationError("length table has no rows");
  return table;
}

LengthTable load_length_csv(const std::string& path) { return parse_length_csv(read_file(path)); }

void WorkloadConfig::validate() const {
  if (!(cv > 0)) throw ValidationError("cv must be > 0");
  if (!(rps > 0)) throw ValidationError("rps must be > 0");
  if (!(horizon_s >= 0)) throw ValidationError("horizon_s must be >= 0");
  if (n_models_per_app < 1) throw ValidationError("n_models_per_app must be >= 1");
  if (apps.empty()) throw ValidationError("no apps selected");
}

std::vector<double> per_model_rates(const std::vector<std::string>& models, double rps,
                                    RateMode mode, const TraceSeries* trace) {
  std::vector<double> out(models.size(), 0.0);
  if (models.empty()) return out;
  if (mode == RateMode::Even) {
    std::fill(out.begin(), out.end(), rps / static_cast<double>(models.size()));
    return out;
  }
  if (trace == nullptr) throw ValidationError("trace-weighted rates need a trace");
  auto mapping = map_round_robin(models, trace->functions());
  std::vector<double> weight(models.size(), 0.0);
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (const auto& f : mapping[i]) weight[i] += static_cast<double>(trace->total(f));
  }
  const double sum = std::accumulate(weight.begin(), weight.end(), 0.0);
  if (!(sum > 0)) throw ValidationError("trace has no invocations");
  for (std::size_t i = 0; i < models.size(); ++i) out[i] = rps * weight[i] / sum;
  return out;
}

Scenario build_scenario(const WorkloadConfig& workload, const Catalog& catalog,
                        const std::vector<ServerSpec>& servers, const SimConfig& config,
                        const TraceSeries* trace) {
  workload.validate();
  if (catalog.models.empty()) throw ValidationError("catalog has no models");
  Scenario sc;
  sc.config = config;
  sc.servers = servers;
  std::vector<AppKind> model_app;
  for (AppKind app : workload.apps) {
    if (!catalog.lengths.contains(app)) {
      throw ValidationError("missing length table for " + std::string(to_string(app)));
    }
    for (const auto& cm : catalog.models) {
      for (int i = 0; i < workload.n_models_per_app; ++i) {
        ModelEntry e;
        e.profile = cm.profile;
        e.profile.model_id =
            std::string(to_string(app)) + "-" + cm.size_label + "-" + std::to_string(i);
        e.timings = cm.timings;
        e.slo = derive_slos(cm.warm_ttft_s, cm.warm_tpot_s, app);
        e.app = std::string(to_string(app));
        sc.models.push_back(std::move(e));
        model_app.push_back(app);
      }
    }
  }
  std::vector<std::string> ids;
  for (const auto& m : sc.models) ids.push_back(m.profile.model_id);
  const auto rates = per_model_rates(ids, workload.rps, workload.rate_mode, trace);

  for (std::size_t i = 0; i < sc.models.size(); ++i) {
    if (!(rates[i] > 0)) continue;
    std::seed_seq arrival_seed{workload.seed, std::uint64_t{i}, std::uint64_t{0}};
    std::seed_seq length_seed{workload.seed, std::uint64_t{i}, std::uint64_t{1}};
    std::uint64_t a_seed = 0;
    std::uint64_t l_seed = 0;
    {
      std::uint32_t buf[2];
      arrival_seed.generate(buf, buf + 2);
      a_seed = (std::uint64_t{buf[0]} << 32) | buf[1];
      length_seed.generate(buf, buf + 2);
      l_seed = (std::uint64_t{buf[0]} << 32) | buf[1];
    }
    std::mt19937_64 len_rng(l_seed);
    const auto& table = catalog.lengths.at(model_app[i]);
    for (double t : sample_arrivals(rates[i], workload.cv, workload.horizon_s, a_seed)) {
      auto [in, out] = table.sample(len_rng);
      sc.requests.push_back({ids[i], t, in, out});
    }
  }
  std::stable_sort(sc.requests.begin(), sc.requests.end(),
                   [](const auto& a, const auto& b) { return a.arrival_s < b.arrival_s; });
  return sc;
}

}  // namespace hydra
