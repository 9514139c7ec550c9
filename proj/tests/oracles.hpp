// Independent reference implementations used as test oracles. They follow
// the formulas literally and favour brute force over cleverness.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "hydra/allocator.hpp"
#include "hydra/cluster_model.hpp"

namespace oracle {

inline double ttft_sequential(double t_c, double m, int s, int w, double t_p, double t_n,
                  const std::vector<std::pair<double, double>>& bp) {
  double worst = 0;
  for (auto [b, p] : bp) worst = std::max(worst, 1 / b + 1 / p);
  return t_c + (m / s) * worst + t_p * (s - w + double(w) / s) + t_n * s;
}

inline double ttft_overlapped(double t_cc, double t_cu, double t_l, double m, int s, int w, double t_p,
                  double t_n, const std::vector<std::pair<double, double>>& bp) {
  double worst = 0;
  for (auto [b, p] : bp) {
    worst = std::max(worst, std::max(t_cc + t_cu + std::max((m / s) / p, t_l), (m / s) / b));
  }
  return worst + t_p * (s - w + double(w) / s) + t_n * s;
}

inline double tpot(double t_d, double t_n, int s, int w) {
  return t_d * (s - w + double(w) / s) + t_n * s;
}

struct Cand {
  std::string id;
  int gpu = 0;
  double b = 0;
  double p = 0;
  int occ = 0;
  auto key() const { return std::make_tuple(1 / b + 1 / p, occ, id, gpu); }
};

// Least-occupied accelerator on each server with `gb` free, lowest index on ties.
inline std::vector<Cand> capable(const hydra::ClusterSnapshot& snap, double gb) {
  std::vector<Cand> out;
  for (const auto& srv : snap.servers()) {
    int best = -1;
    int best_occ = std::numeric_limits<int>::max();
    for (int g = 0; g < srv.gpu_count; ++g) {
      hydra::GpuId id{srv.server_id, g};
      int occ = 0;
      double used = 0;
      for (const auto& w : snap.workers_on(id)) {
        ++occ;
        used += w.mem_reserved_gb;
      }
      if (srv.gpu_mem_gb - used + 1e-9 < gb) continue;
      if (occ < best_occ) {
        best = g;
        best_occ = occ;
      }
    }
    if (best >= 0) out.push_back({srv.server_id, best, srv.nic_gbps, srv.pcie_gbps, best_occ});
  }
  return out;
}

template <class T, class F>
void combinations(const std::vector<T>& pool, int k, F&& visit) {
  std::vector<int> idx(k);
  std::vector<T> pick;
  auto rec = [&](auto&& self, int start, int depth) -> void {
    if (depth == k) {
      pick.clear();
      for (int i : idx) pick.push_back(pool[i]);
      visit(pick);
      return;
    }
    for (int i = start; i < static_cast<int>(pool.size()); ++i) {
      idx[depth] = i;
      self(self, i + 1, depth + 1);
    }
  };
  if (k <= static_cast<int>(pool.size())) rec(rec, 0, 0);
}

// Brute-force selection: the full-memory part is the subset of size w whose
// sorted keys are lexicographically smallest; the low part likewise from the
// remaining servers (low-list entry preferred when a server is on both).
inline std::optional<std::vector<Cand>> select(const std::vector<Cand>& full,
                                               const std::vector<Cand>& low, int s, int w) {
  using Keys = std::vector<decltype(Cand{}.key())>;
  auto sorted_keys = [](std::vector<Cand> v) {
    Keys k;
    for (auto& c : v) k.push_back(c.key());
    std::sort(k.begin(), k.end());
    return k;
  };
  std::optional<std::vector<Cand>> best_f;
  Keys best_fk;
  combinations(full, w, [&](const std::vector<Cand>& f) {
    auto k = sorted_keys(f);
    if (!best_f || k < best_fk) {
      best_f = f;
      best_fk = k;
    }
  });
  if (!best_f) return std::nullopt;
  std::map<std::string, Cand> pool;
  for (const auto& c : full) pool[c.id] = c;
  for (const auto& c : low) pool[c.id] = c;
  for (const auto& c : *best_f) pool.erase(c.id);
  std::vector<Cand> rest;
  for (auto& [_, c] : pool) rest.push_back(c);
  std::optional<std::vector<Cand>> best_l;
  Keys best_lk;
  combinations(rest, s - w, [&](const std::vector<Cand>& l) {
    auto k = sorted_keys(l);
    if (!best_l || k < best_lk) {
      best_l = l;
      best_lk = k;
    }
  });
  if (!best_l) return std::nullopt;
  auto by_key = [](const Cand& a, const Cand& b) { return a.key() < b.key(); };
  auto f = *best_f;
  auto l = *best_l;
  std::sort(f.begin(), f.end(), by_key);
  std::sort(l.begin(), l.end(), by_key);
  f.insert(f.end(), l.begin(), l.end());
  return f;
}

struct Choice {
  int s = 0;
  int w = 0;
  std::vector<Cand> servers;
  double ttft = 0;
  double tpot = 0;
  int sharing = 0;
};

// Every SLO-feasible (s, w) with the overlapped predictor and no admission
// control, with its sharing count.
inline std::vector<Choice> feasible(const hydra::ModelProfile& m, const hydra::SloSpec& slo,
                                    const hydra::StageTimings& t,
                                    const hydra::ClusterSnapshot& snap,
                                    const hydra::MemoryPolicy& mem) {
  std::vector<Choice> out;
  const double model_gb = m.size_gbit / 8 * mem.weight_overhead;
  auto quant = [&](double x) { return std::ceil(x / mem.quantum_gb - 1e-9) * mem.quantum_gb; };
  const double full_gb = quant(model_gb * (1 + mem.headroom));
  for (int s = 1; s <= 4; ++s) {
    const double low_gb = quant(model_gb * (1 + mem.headroom) / s);
    auto full = capable(snap, full_gb);
    auto low = capable(snap, low_gb);
    for (int w = 0; w <= s; ++w) {
      auto g = select(full, low, s, w);
      if (!g) continue;
      std::vector<std::pair<double, double>> bp;
      int sharing = 0;
      for (const auto& c : *g) {
        bp.emplace_back(c.b, c.p);
        sharing += c.occ;
      }
      Choice c{s, w, *g,
               ttft_overlapped(t.container_create_s, t.cuda_init_s, t.library_load_s, m.size_gbit, s, w,
                   m.prefill_time_s, t.net_hop_s, bp),
               tpot(m.decode_time_s, t.net_hop_s, s, w), sharing};
      if (c.ttft <= slo.ttft_slo_s && c.tpot <= slo.tpot_slo_s) out.push_back(c);
    }
  }
  return out;
}

// Literal admission condition and pending-size update over parallel arrays.
struct Registry {
  double B = 16;
  double last = 0;
  std::vector<unsigned long long> ids;
  std::vector<double> S;
  std::vector<double> D;
  std::vector<double> demand;

  void settle(double T) {
    const std::size_t N = S.size();
    if (N > 0) {
      for (std::size_t i = 0; i < N; ++i) S[i] = S[i] - (B / N) * (T - last);
    }
    last = T;
    for (std::size_t i = S.size(); i-- > 0;) {
      if (S[i] <= 1e-9 * std::max(1.0, demand[i])) {
        ids.erase(ids.begin() + i);
        S.erase(S.begin() + i);
        D.erase(D.begin() + i);
        demand.erase(demand.begin() + i);
      }
    }
  }

  bool admit(unsigned long long id, double s_new, double d_new, double T) {
    const double N1 = static_cast<double>(S.size() + 1);
    bool ok = s_new <= B / N1 * (d_new - T);
    for (std::size_t i = 0; i < S.size(); ++i) ok = ok && S[i] <= B / N1 * (D[i] - T);
    if (ok) {
      ids.push_back(id);
      S.push_back(s_new);
      D.push_back(d_new);
      demand.push_back(s_new);
    }
    return ok;
  }

  void remove(unsigned long long id) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == id) {
        ids.erase(ids.begin() + i);
        S.erase(S.begin() + i);
        D.erase(D.begin() + i);
        demand.erase(demand.begin() + i);
        return;
      }
    }
  }
};

}  // namespace oracle
