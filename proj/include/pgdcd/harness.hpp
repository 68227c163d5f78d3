#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgdcd/attack.hpp"
#include "pgdcd/datasets.hpp"
#include "pgdcd/models.hpp"

namespace pgdcd {

struct CleanEvaluation {
  double accuracy = 0.0;  // percent
  std::vector<bool> correct;
  std::vector<std::size_t> predictions;
};

/// Throws std::invalid_argument on an empty dataset or bad labels.
CleanEvaluation evaluate_clean(const ClassifierModel& model, const LabeledDataset& data);

/// Per-image, per-mode result as stored in a report (no perturbation data).
struct OutcomeRow {
  AttackStatus status = AttackStatus::BudgetExhausted;
  std::size_t iterations = 0;
  std::optional<std::size_t> adversarial_label;
  std::optional<std::size_t> first_trick_iter;
  std::optional<CycleInfo> cycle;
  std::size_t restarts = 0;
  /// Non-empty if the attack threw; the row then counts as untricked and
  /// contributes no iterations.
  std::string error;

  bool tricked() const { return error.empty() && status == AttackStatus::Tricked; }
  bool tricked_any() const { return error.empty() && first_trick_iter.has_value(); }
  bool attacked() const { return error.empty() && status != AttackStatus::CleanMisclassified; }

  static OutcomeRow from(const AttackOutcome& outcome);
};

struct GroupStats {
  std::size_t count = 0;
  /// Absent for an empty group.
  std::optional<double> mean;
  /// Lower median: element (n - 1) / 2 of the sorted counts.
  std::optional<std::size_t> median;
};

struct IterationStats {
  GroupStats tricked;
  GroupStats untricked;
  GroupStats overall;
};

/// Groups attacked rows by final verdict; clean-misclassified and errored
/// rows are excluded. Throws std::invalid_argument on an empty input.
IterationStats iteration_stats(std::span<const OutcomeRow> rows);

struct ModeSummary {
  AttackMode mode = AttackMode::CycleDetect;
  std::size_t tricked = 0;
  std::size_t tricked_any = 0;
  std::size_t cycles = 0;
  std::size_t errors = 0;
  /// Percent of the dataset that is clean-correct and not tricked.
  double robust_accuracy = 0.0;
  /// Same, counting an image as tricked if any iterate misclassified.
  double robust_accuracy_best_iterate = 0.0;
  std::uint64_t total_iterations = 0;
  /// 100 (1 - total / naive baseline); 0 for the baseline itself.
  double reduction_percent = 0.0;
  IterationStats stats;
  double wall_seconds = 0.0;
};

struct ImageRow {
  std::size_t index = 0;
  std::size_t label = 0;
  std::size_t clean_prediction = 0;
  bool clean_correct = false;
  /// Parallel to RobustReport::modes.
  std::vector<OutcomeRow> outcomes;
};

struct RobustReport {
  static constexpr int kSchemaVersion = 1;

  std::string dataset;
  std::string model_id;
  /// Shared settings; the per-mode `mode` field is not meaningful here.
  AttackConfig config;
  std::size_t num_images = 0;
  std::size_t clean_correct = 0;
  double clean_accuracy = 0.0;
  std::vector<AttackMode> modes;
  std::vector<ModeSummary> summaries;
  /// Iterations of full-budget PGD: t_iter per clean-correct image.
  std::uint64_t baseline_iterations = 0;
  /// Cycle-detect reduction against the baseline, if that mode ran.
  std::optional<double> reduction_percent;
  std::vector<ImageRow> images;

  const ModeSummary* summary(AttackMode mode) const;
  std::optional<std::size_t> mode_index(AttackMode mode) const;
};

struct EvalOptions {
  AttackConfig config;
  std::vector<AttackMode> modes{AttackMode::Naive, AttackMode::EarlySuccess, AttackMode::CycleDetect};
  std::string model_id = "model";
  /// 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 1;
};

/// Attacks every clean-correct image under each requested mode. Results do
/// not depend on the thread count.
RobustReport evaluate_robust(const ClassifierModel& model, const LabeledDataset& data,
                             const EvalOptions& options);

double reduction_percent(std::uint64_t iterations, std::uint64_t baseline);

struct SweepPoint {
  std::size_t budget = 0;
  std::uint64_t naive_iterations = 0;
  std::uint64_t early_success_iterations = 0;
  std::uint64_t cycle_detect_iterations = 0;
  /// Cycle-detect against naive.
  double reduction_percent = 0.0;
  double early_success_reduction_percent = 0.0;
};

/// Reduction curve over iteration budgets. Budgets must be >= 1 and
/// ascending. The naive total is budget x clean-correct count, which is
/// exactly what a full-budget run spends.
std::vector<SweepPoint> reduction_sweep(const ClassifierModel& model, const LabeledDataset& data,
                                        std::span<const std::size_t> budgets,
                                        const AttackConfig& config, std::size_t threads = 1);

void write_sweep_csv(std::span<const SweepPoint> curve, const std::filesystem::path& path);

/// Report I/O: JSON, schema version kSchemaVersion.
void write_report(const RobustReport& report, const std::filesystem::path& path);
std::string report_to_json(const RobustReport& report, bool include_wall_clock = true);
RobustReport read_report(const std::filesystem::path& path);
RobustReport report_from_json(const std::string& text);

// --- verification -----------------------------------------------------------

struct EquivalenceResult {
  std::size_t compared = 0;
  std::vector<std::size_t> mismatches;  // image indices
  bool ok() const { return mismatches.empty(); }
};

/// Per-image Tricked verdicts of `mode` against `baseline`. For a naive
/// baseline the best-iterate verdict is used.
EquivalenceResult compare_verdicts(const RobustReport& report, AttackMode mode, AttackMode baseline);

struct SoundnessResult {
  std::size_t checked = 0;
  std::vector<std::size_t> replay_mismatches;
  std::vector<std::size_t> tricked_after_cycle;
  bool ok() const { return replay_mismatches.empty() && tricked_after_cycle.empty(); }
};

/// Checks one cycle-detected outcome: replaying plain PGD from the origin to
/// the first-visit iterate and then for length() more steps must reproduce
/// outcome.final_delta bit-exactly (and equal the first-visit iterate), and
/// continuing to cfg.t_iter must never trick. `why` receives the failure.
bool cycle_outcome_sound(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                         const AttackConfig& cfg, const AttackOutcome& outcome,
                         std::string* why = nullptr);

/// For every cycle-detected row: replays plain PGD from the origin to the
/// first-visit iterate, then from there to the detecting iterate (which must
/// match bit-exactly), then on to t_iter (which must never trick).
SoundnessResult check_cycle_soundness(const ClassifierModel& model, const LabeledDataset& data,
                                      const RobustReport& report);

}  // namespace pgdcd
