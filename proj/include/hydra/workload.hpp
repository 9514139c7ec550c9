#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hydra/cluster_model.hpp"
#include "hydra/simulator.hpp"

namespace hydra {

/// I.i.d. Gamma inter-arrival gaps (shape 1/cv^2, scale cv^2/rate) summed
/// into timestamps in [0, horizon_s). Throws ValidationError unless rate > 0
/// and cv > 0.
std::vector<double> sample_arrivals(double rate_rps, double cv, double horizon_s,
                                    std::uint64_t seed);

/// The first `n` gaps of the same process, without a horizon.
std::vector<double> sample_gaps(double rate_rps, double cv, std::size_t n, std::uint64_t seed);

enum class AppKind { Chatbot, Code, Summarization };

std::string_view to_string(AppKind app);
AppKind parse_app(std::string_view name);

// Reading speed used as the chatbot TPOT target.
inline constexpr double kChatbotTpotSlo = 0.2;

SloSpec derive_slos(double warm_ttft_s, double warm_tpot_s, AppKind app);

/// Per-function per-minute invocation counts.
struct TraceSeries {
  std::map<std::string, std::vector<std::int64_t>> counts;

  std::vector<std::string> functions() const;
  std::int64_t total(const std::string& function_id) const;
};

/// Reads `function_id,minute_index,count` rows (header required).
TraceSeries load_trace_csv(const std::string& path);
TraceSeries parse_trace_csv(std::string_view text);

/// Function j of the sorted function list goes to model j mod M of the
/// sorted model list. Returns, per model, the functions mapped to it.
std::vector<std::vector<std::string>> map_round_robin(const std::vector<std::string>& models,
                                                      const std::vector<std::string>& functions);

/// Pairs of (input_tokens, output_tokens) sampled uniformly.
struct LengthTable {
  std::vector<std::pair<int, int>> rows;

  std::pair<int, int> sample(std::mt19937_64& rng) const;
};

LengthTable load_length_csv(const std::string& path);
LengthTable parse_length_csv(std::string_view text);

/// One model size in the catalog; instances per app are cloned from it.
struct CatalogModel {
  std::string size_label;
  ModelProfile profile;
  StageTimings timings;
  double warm_ttft_s = 0.0;
  double warm_tpot_s = 0.0;
};

struct Catalog {
  std::vector<CatalogModel> models;
  std::map<AppKind, LengthTable> lengths;
};

enum class RateMode { Even, TraceWeighted };

struct WorkloadConfig {
  double cv = 1.0;
  double rps = 0.6;
  double horizon_s = 600.0;
  std::uint64_t seed = 1;
  int n_models_per_app = 1;
  std::vector<AppKind> apps{AppKind::Chatbot, AppKind::Code, AppKind::Summarization};
  RateMode rate_mode = RateMode::Even;

  void validate() const;
};

/// Per-model rates summing to `rps`. Even mode splits evenly; trace mode
/// weights each model by the total count of its mapped functions, and
/// models with no mapped function get zero.
std::vector<double> per_model_rates(const std::vector<std::string>& models, double rps,
                                    RateMode mode, const TraceSeries* trace);

/// Model instances are named `<app>-<size>-<index>` and ordered by app,
/// then size, then index.
Scenario build_scenario(const WorkloadConfig& workload, const Catalog& catalog,
                        const std::vector<ServerSpec>& servers, const SimConfig& config,
                        const TraceSeries* trace = nullptr);

}  // namespace hydra
