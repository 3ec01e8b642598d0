#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "diet/config.hpp"
#include "diet/train.hpp"

namespace diet {

struct SweepOutcome {
  std::optional<RunArtifact> run;
  std::string error;  // set when the run threw

  bool ok() const { return run.has_value(); }
};

// Runs every config on up to `workers` threads. Results come back in grid
// order; a failing run is recorded and the rest continue. Each run is serial
// internally, so its numbers do not depend on `workers`. `on_done` is called
// (serialised) as runs finish, in completion order.
inline std::vector<SweepOutcome> sweep(
    const std::vector<TrainConfig>& grid, unsigned workers,
    const std::function<void(std::size_t, const SweepOutcome&)>& on_done = {}) {
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  std::vector<SweepOutcome> results(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex done_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < grid.size();) {
      SweepOutcome out;
      try {
        out.run = run_training(grid[i]);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      results[i] = std::move(out);
      if (on_done) {
        std::lock_guard lock(done_mu);
        on_done(i, results[i]);
      }
    }
  };
  workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(grid.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace diet
