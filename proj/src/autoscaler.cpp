#include "hydra/autoscaler.hpp"

#include <algorithm>
#include <stdexcept>

namespace hydra {

ModelDemandState::ModelDemandState(double window_len, int ring_size)
    : window_len_s(window_len), ring(static_cast<std::size_t>(ring_size), 0) {
  if (ring_size < 1) throw std::invalid_argument("ring size must be >= 1");
}

void ModelDemandState::roll_window() {
  ring.push_back(current_window_count);
  ring.pop_front();
  current_window_count = 0;
}

int ModelDemandState::predicted_max() const {
  int best = 0;
  for (int c : ring) best = std::max(best, c);
  return best;
}

int desired_workers(const ModelDemandState& state, int batch_capacity) {
  if (batch_capacity < 1) throw std::invalid_argument("batch capacity must be >= 1");
  const int demand = std::max(0, state.waiting_queue_len) + state.predicted_max();
  return (demand + batch_capacity - 1) / batch_capacity;
}

std::vector<GroupRequest> plan_cold_start(int deficit, const GroupAllocator& allocate,
                                          int max_pipeline) {
  std::vector<GroupRequest> out;
  int remaining = deficit;
  while (remaining > 0) {
    const int want = std::min(remaining, max_pipeline);
    auto s = allocate(want);
    if (!s) break;
    GroupRequest g;
    g.pipeline_size = *s;
    g.endpoints = std::min(remaining, *s);
    g.consolidation = g.endpoints == 1 ? Consolidation::ScaleDown : Consolidation::ScaleUp;
    out.push_back(g);
    remaining -= g.endpoints;
  }
  return out;
}

}  // namespace hydra
