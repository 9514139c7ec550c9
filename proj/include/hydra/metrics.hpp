#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "hydra/simulator.hpp"

namespace hydra {

struct Attainment {
  // Unset when no request contributes to the fraction.
  std::optional<double> ttft;
  std::optional<double> tpot;
  std::size_t requests = 0;
};

/// Fraction of requests within their own SLOs. Rejected requests count as
/// violations of both; single-token outputs are left out of the TPOT share.
Attainment slo_attainment(std::span<const RequestRecord> records);

/// Same, against one SLO for every record.
Attainment slo_attainment(std::span<const RequestRecord> records, const SloSpec& slo);

/// Memory-time product in GB*s over closed reservation intervals.
double cost_gb_s(std::span<const ReservationInterval> intervals);

struct Summary {
  std::size_t requests = 0;
  std::size_t completed = 0;
  std::size_t rejected = 0;
  std::size_t cold_requests = 0;
  Attainment attainment;
  std::optional<double> mean_ttft_s;
  std::optional<double> p50_ttft_s;
  std::optional<double> p99_ttft_s;
  std::optional<double> mean_tpot_s;
  double cost_gb_s = 0.0;
  std::size_t cold_starts = 0;
  std::size_t migrations = 0;
  double end_time_s = 0.0;
};

Summary summarize(const SimResult& result);

/// Columns: model_id,arrival_s,input_tokens,output_tokens,ttft_s,tpot_s,
/// cold_start,rejected,ttft_slo_s,tpot_slo_s. Empty cells mark undefined values.
void write_requests_csv(std::ostream& out, std::span<const RequestRecord> records);

/// Columns: metric,value. One row per Summary field, fixed order.
void write_summary_csv(std::ostream& out, const Summary& summary);

/// Columns: time_s,server_id,gpu_index,reserved_gb,workers,running.
void write_utilization_csv(std::ostream& out, std::span<const UtilizationSample> samples);

/// Shortest round-trippable text for a double, identical across runs.
std::string format_double(double v);

}  // namespace hydra
