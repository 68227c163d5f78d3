#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pgdcd/attack.hpp"
#include "pgdcd/models.hpp"
#include "pgdcd/trajectory.hpp"

namespace pgdcd {

/// output[i] = cosine_similarity(signed_grads[i], signed_grads[i + lag]).
/// Throws std::invalid_argument unless 1 <= lag < size, and DegenerateInput
/// if a compared vector is all zeros.
std::vector<double> lag_cosine_trace(std::span<const Vec> signed_grads, std::size_t lag);

/// A revisit in a trajectory: delta^(start) == delta^(start + length), both
/// 1-based iteration numbers.
struct CycleReport {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t detect() const { return start + length; }
  friend bool operator==(const CycleReport&, const CycleReport&) = default;
};

/// Exhaustive all-pairs search for the first iterate that repeats an
/// earlier one (bitwise). Comparisons stay within one restart segment and
/// never involve the initial iterate, mirroring what a visited set holds.
std::optional<CycleReport> detect_cycle_oracle(const Trajectory& traj);

/// A 2-D instance on which PGD oscillates between two points on the top
/// edge of the ball. The misclassified region is an L1 diamond of radius
/// `trick_radius` around `optimum`, which lies above the ball.
struct TwoCycleInstance {
  MlpModel model;
  ImageVec x;
  std::size_t y = 0;
  double eps = 0.0;
  double alpha = 0.0;
  Vec optimum;
  double trick_radius = 0.0;
};

TwoCycleInstance make_two_cycle_instance();

/// The two-cycle geometry plus a third class whose misclassified region sits
/// near the bottom-left corner of the ball, outside the basin of delta = 0.
/// Only random restarts can reach it.
TwoCycleInstance make_two_cycle_jumps_instance();

/// One CSV row per iteration:
///   iteration,delta_0,...,delta_{d-1},tricked,in_cycle
/// Floats use the shortest round-trip decimal form. in_cycle marks
/// iterations at or after cycle->start.
void export_trajectory(const Trajectory& traj, const std::optional<CycleReport>& cycle,
                       const std::filesystem::path& path);

struct TrajectoryRow {
  std::size_t iteration = 0;
  Vec delta;
  bool tricked = false;
  bool in_cycle = false;
};

std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path);

/// Columns: index,lag_1,...,lag_k (blank where a lag's trace has ended).
void export_lag_traces(std::span<const Vec> signed_grads, std::size_t max_lag,
                       const std::filesystem::path& path);

}  // namespace pgdcd
