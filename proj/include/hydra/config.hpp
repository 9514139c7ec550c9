#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hydra/simulator.hpp"
#include "hydra/workload.hpp"

namespace hydra {

/// Grid run by the `sweep` subcommand.
struct SweepGrid {
  std::vector<double> cvs;
  std::vector<double> rps;
  std::vector<Policy> policies{Policy::SequentialBaseline, Policy::OverlappedSingle,
                               Policy::HydraServe};
};

/// Everything a config file can hold. A file either lists models and
/// requests explicitly, or gives a catalog and a workload to generate them.
/// Key names are documented in the README.
struct Experiment {
  SimConfig config;
  std::vector<ServerSpec> servers;
  std::vector<ModelEntry> models;
  std::vector<RequestSpec> requests;
  std::optional<Catalog> catalog;
  std::optional<WorkloadConfig> workload;
  std::optional<TraceSeries> trace;
  std::optional<SweepGrid> sweep;

  /// Explicit models and requests, or the generated workload when a
  /// catalog and workload section are present.
  Scenario scenario() const;
};

/// Throws ValidationError naming the offending key on malformed input.
/// Relative CSV paths are resolved against `base_dir`.
Experiment parse_experiment(const std::string& json_text, const std::string& base_dir = ".");
Experiment load_experiment(const std::string& path);

std::string scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const std::string& json_text);

std::string plan_to_json(const DeploymentPlan& plan);
DeploymentPlan plan_from_json(const std::string& json_text);

}  // namespace hydra
