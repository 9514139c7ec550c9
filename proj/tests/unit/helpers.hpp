#pragma once

#include <string>
#include <vector>

#include "hydra/cluster_model.hpp"
#include "hydra/simulator.hpp"

namespace testing {

inline hydra::ModelProfile profile(double size_gbit = 100, double t_p = 0.5, double t_d = 0.05,
                                   double kv = 0, std::string id = "m") {
  return {std::move(id), size_gbit, t_p, t_d, kv};
}

inline hydra::StageTimings timings(double t_cc = 4, double t_cu = 2, double t_l = 6,
                                   double t_c = 10, double t_n = 0.01) {
  return {t_cc, t_cu, t_l, t_c, t_n};
}

inline std::vector<hydra::ServerSpec> servers(int n, double nic = 16, double pcie = 128,
                                              int gpus = 1, double mem = 24) {
  std::vector<hydra::ServerSpec> out;
  for (int i = 0; i < n; ++i) out.push_back({"s" + std::to_string(i), nic, pcie, gpus, mem});
  return out;
}

// Memory policy without headroom so that reservations are easy to predict.
inline hydra::MemoryPolicy bare_memory() {
  hydra::MemoryPolicy m;
  m.headroom = 0.0;
  return m;
}

inline hydra::Scenario scenario(std::vector<hydra::ServerSpec> srv, hydra::ModelProfile p,
                                hydra::StageTimings t, hydra::SloSpec slo = {1e9, 1e9}) {
  hydra::Scenario sc;
  sc.servers = std::move(srv);
  sc.models.push_back({std::move(p), t, slo, ""});
  sc.config.memory = bare_memory();
  return sc;
}

}  // namespace testing
