#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "pgdcd/tensor.hpp"

namespace pgdcd {

/// Iterates of one attack run.
///
/// `initial` is delta^(0). Entry k of `deltas`, `signed_grads` and `tricked`
/// describes iteration k + 1: the post-step iterate delta^(k+1), the signed
/// gradient (taken at delta^(k)) that produced it, and whether x + delta^(k+1)
/// was misclassified. The initial iterate is never stored in a visited set,
/// so it is kept apart from the per-iteration records.
struct Trajectory {
  Vec initial;
  std::vector<Vec> deltas;
  std::vector<Vec> signed_grads;
  std::vector<bool> tricked;
  std::optional<std::size_t> tricked_at;
  /// Iterations (1-based) whose step started from a fresh random
  /// initialization instead of the previous iterate.
  std::vector<std::size_t> segment_starts;

  std::size_t size() const { return deltas.size(); }
  /// delta^(i) for 0 <= i <= size().
  const Vec& delta_at(std::size_t iteration) const {
    return iteration == 0 ? initial : deltas.at(iteration - 1);
  }
};

}  // namespace pgdcd
