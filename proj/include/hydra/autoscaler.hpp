#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "hydra/cluster_model.hpp"

namespace hydra {

/// Sliding-window demand state of one model.
struct ModelDemandState {
  double window_len_s = 10.0;
  // Arrival counts of the last k closed windows, oldest first.
  std::deque<int> ring;
  int current_window_count = 0;
  int waiting_queue_len = 0;
  int live_workers = 0;
  std::vector<int> inflight_group_sizes;

  ModelDemandState() = default;
  ModelDemandState(double window_len, int ring_size);

  void record_arrival() { ++current_window_count; }
  // Closes the current window and pushes its count into the ring.
  void roll_window();
  int predicted_max() const;
};

int desired_workers(const ModelDemandState& state, int batch_capacity);

enum class Consolidation { None, ScaleDown, ScaleUp };

struct GroupRequest {
  int pipeline_size = 1;
  // Standalone endpoints this group turns into.
  int endpoints = 1;
  Consolidation consolidation = Consolidation::ScaleDown;
};

/// Allocates one group whose pipeline size is at least `min_pipeline` when
/// possible, and returns the pipeline size it got, or nullopt when nothing
/// can be placed right now. Called repeatedly; each call must see the
/// placements of the previous ones.
using GroupAllocator = std::function<std::optional<int>(int min_pipeline)>;

/// Covers `deficit` new workers with pipeline groups, largest first. A
/// group of size s counts for min(remaining, s) endpoints. One endpoint
/// means scale down, several mean scale up.
std::vector<GroupRequest> plan_cold_start(int deficit, const GroupAllocator& allocate,
                                          int max_pipeline = 4);

}  // namespace hydra
