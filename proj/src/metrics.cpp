#include "hydra/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <vector>

namespace hydra {

namespace {

Attainment count(std::span<const RequestRecord> records, const SloSpec* fixed) {
  Attainment a;
  a.requests = records.size();
  std::size_t ttft_ok = 0;
  std::size_t tpot_n = 0;
  std::size_t tpot_ok = 0;
  for (const auto& r : records) {
    const double ttft_slo = fixed ? fixed->ttft_slo_s : r.ttft_slo_s;
    const double tpot_slo = fixed ? fixed->tpot_slo_s : r.tpot_slo_s;
    if (!r.rejected && r.ttft_s <= ttft_slo) ++ttft_ok;
    if (r.output_tokens >= 2) {
      ++tpot_n;
      if (!r.rejected && r.tpot_s && *r.tpot_s <= tpot_slo) ++tpot_ok;
    }
  }
  if (a.requests > 0) a.ttft = static_cast<double>(ttft_ok) / static_cast<double>(a.requests);
  if (tpot_n > 0) a.tpot = static_cast<double>(tpot_ok) / static_cast<double>(tpot_n);
  return a;
}

std::optional<double> mean(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Nearest-rank percentile of a sorted sample.
std::optional<double> percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::nullopt;
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Attainment slo_attainment(std::span<const RequestRecord> records) {
  return count(records, nullptr);
}

Attainment slo_attainment(std::span<const RequestRecord> records, const SloSpec& slo) {
  return count(records, &slo);
}

double cost_gb_s(std::span<const ReservationInterval> intervals) {
  double total = 0.0;
  for (const auto& iv : intervals) total += iv.gb * (iv.end_s - iv.start_s);
  return total;
}

Summary summarize(const SimResult& result) {
  Summary s;
  s.requests = result.records.size();
  std::vector<double> ttfts;
  std::vector<double> tpots;
  for (const auto& r : result.records) {
    if (r.rejected) {
      ++s.rejected;
    } else {
      ++s.completed;
      ttfts.push_back(r.ttft_s);
      if (r.tpot_s) tpots.push_back(*r.tpot_s);
    }
    if (r.cold_start) ++s.cold_requests;
  }
  s.attainment = slo_attainment(result.records);
  s.mean_ttft_s = mean(ttfts);
  s.mean_tpot_s = mean(tpots);
  std::sort(ttfts.begin(), ttfts.end());
  s.p50_ttft_s = percentile(ttfts, 0.50);
  s.p99_ttft_s = percentile(ttfts, 0.99);
  s.cost_gb_s = cost_gb_s(result.reservations);
  s.cold_starts = result.cold_starts.size();
  s.migrations = result.migrations.size();
  s.end_time_s = result.end_time_s;
  return s;
}

void write_requests_csv(std::ostream& out, std::span<const RequestRecord> records) {
  out << "model_id,arrival_s,input_tokens,output_tokens,ttft_s,tpot_s,cold_start,rejected,"
         "ttft_slo_s,tpot_slo_s\n";
  for (const auto& r : records) {
    out << r.model_id << ',' << format_double(r.arrival_s) << ',' << r.input_tokens << ','
        << r.output_tokens << ',' << (r.rejected ? "" : format_double(r.ttft_s)) << ','
        << (r.rejected ? "" : opt(r.tpot_s)) << ',' << (r.cold_start ? 1 : 0) << ','
        << (r.rejected ? 1 : 0) << ',' << format_double(r.ttft_slo_s) << ','
        << format_double(r.tpot_slo_s) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const Summary& s) {
  out << "metric,value\n";
  out << "requests," << s.requests << '\n';
  out << "completed," << s.completed << '\n';
  out << "rejected," << s.rejected << '\n';
  out << "cold_requests," << s.cold_requests << '\n';
  out << "ttft_attainment," << opt(s.attainment.ttft) << '\n';
  out << "tpot_attainment," << opt(s.attainment.tpot) << '\n';
  out << "mean_ttft_s," << opt(s.mean_ttft_s) << '\n';
  out << "p50_ttft_s," << opt(s.p50_ttft_s) << '\n';
  out << "p99_ttft_s," << opt(s.p99_ttft_s) << '\n';
  out << "mean_tpot_s," << opt(s.mean_tpot_s) << '\n';
  out << "cost_gb_s," << format_double(s.cost_gb_s) << '\n';
  out << "cold_starts," << s.cold_starts << '\n';
  out << "migrations," << s.migrations << '\n';
  out << "end_time_s," << format_double(s.end_time_s) << '\n';
}

void write_utilization_csv(std::ostream& out, std::span<const UtilizationSample> samples) {
  out << "time_s,server_id,gpu_index,reserved_gb,workers,running\n";
  for (const auto& u : samples) {
    out << format_double(u.time_s) << ',' << u.gpu.server_id << ',' << u.gpu.gpu_index << ','
        << format_double(u.reserved_gb) << ',' << u.workers << ',' << u.running << '\n';
  }
}

}  // namespace hydra
