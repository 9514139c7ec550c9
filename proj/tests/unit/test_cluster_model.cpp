#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "hydra/config.hpp"
#include "hydra/errors.hpp"

using namespace hydra;

TEST_SUITE("cluster_model") {
  TEST_CASE("fits counts plan entries on one accelerator cumulatively") {
    ClusterSnapshot snap(testing::servers(2));
    CHECK(fits({1, 1, {{"s0", 0, 24}}}, snap));

    snap.reserve({"s0", 0}, {1, "other", 12, false});
    CHECK_FALSE(fits({1, 1, {{"s0", 0, 24}}}, snap));

    ClusterSnapshot twenty(testing::servers(1, 16, 128, 1, 20));
    CHECK_FALSE(fits({2, 0, {{"s0", 0, 12}, {"s0", 0, 12}}}, twenty));
    CHECK(fits({2, 0, {{"s0", 0, 10}, {"s0", 0, 10}}}, twenty));
  }

  TEST_CASE("fits rejects unknown servers") {
    ClusterSnapshot snap(testing::servers(1));
    CHECK_THROWS_AS(fits({1, 1, {{"nope", 0, 1}}}, snap), PlanError);
  }

  TEST_CASE("plan validation") {
    CHECK_THROWS_AS((DeploymentPlan{5, 0, {}}.validate()), PlanError);
    CHECK_THROWS_AS((DeploymentPlan{2, 3, {{"a", 0, 1}, {"b", 0, 1}}}.validate()), PlanError);
    CHECK_THROWS_AS((DeploymentPlan{2, 1, {{"a", 0, 1}}}.validate()), PlanError);
    CHECK_NOTHROW((DeploymentPlan{2, 1, {{"a", 0, 1}, {"b", 0, 1}}}.validate()));
  }

  TEST_CASE("memory sizing") {
    MemoryPolicy m;
    auto p = testing::profile(100);  // 12.5 GB of weights
    CHECK(m.model_mem_gb(p) == doctest::Approx(12.5));
    CHECK(m.full_reservation_gb(p) == 14.0);      // 13.75 rounded up to 0.5
    CHECK(m.low_reservation_gb(p, 4) == 3.5);     // 3.4375 rounded up
    CHECK(m.quantize(3.0) == 3.0);
    m.headroom = 0;
    CHECK(m.low_reservation_gb(p, 4) == 3.5);     // 3.125 rounded up
    CHECK(m.full_reservation_gb(p) == 12.5);
  }

  TEST_CASE("reserve and release keep free plus reserved equal to capacity") {
    ClusterSnapshot snap(testing::servers(3, 16, 128, 2, 24));
    std::mt19937_64 rng(5);
    std::vector<std::pair<GpuId, WorkerId>> live;
    WorkerId next = 0;
    for (int step = 0; step < 2000; ++step) {
      if (!live.empty() && rng() % 3 == 0) {
        auto i = rng() % live.size();
        snap.release(live[i].first, live[i].second);
        live.erase(live.begin() + static_cast<long>(i));
      } else {
        GpuId g{"s" + std::to_string(rng() % 3), static_cast<int>(rng() % 2)};
        double gb = 0.5 * static_cast<double>(1 + rng() % 16);
        if (snap.free_mem_gb(g) >= gb) {
          snap.reserve(g, {next, "m", gb, false});
          live.emplace_back(g, next++);
        }
      }
      REQUIRE_NOTHROW(snap.check_invariants());
    }
  }

  TEST_CASE("over-reservation is refused") {
    ClusterSnapshot snap(testing::servers(1));
    CHECK_THROWS(snap.reserve({"s0", 0}, {1, "m", 25, false}));
  }

  TEST_CASE("plan serialization round-trips") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 200; ++i) {
      DeploymentPlan p;
      p.pipeline_size = 1 + static_cast<int>(rng() % 4);
      p.full_mem_workers = static_cast<int>(rng() % (p.pipeline_size + 1));
      for (int k = 0; k < p.pipeline_size; ++k) {
        p.servers.push_back({"srv-" + std::to_string(rng() % 100), static_cast<int>(rng() % 8),
                             std::ldexp(static_cast<double>(rng() % 100000 + 1), -7)});
      }
      CHECK(plan_from_json(plan_to_json(p)) == p);
    }
  }
}
