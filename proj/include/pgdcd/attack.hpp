#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "pgdcd/fingerprint.hpp"
#include "pgdcd/models.hpp"
#include "pgdcd/rng.hpp"
#include "pgdcd/trajectory.hpp"

namespace pgdcd {

enum class AttackMode {
  /// Full budget, success checked only for reporting (what common libraries do).
  Naive,
  /// Stop at the first misclassifying iterate.
  EarlySuccess,
  /// EarlySuccess plus termination on the first revisited perturbation.
  CycleDetect,
  /// CycleDetect, restarting from a random point in the ball after each
  /// cycle until the shared budget runs out.
  CycleDetectJumps,
};

enum class AttackStatus { Tricked, CycleDetected, BudgetExhausted, CleanMisclassified };

std::string_view to_string(AttackMode mode);
std::string_view to_string(AttackStatus status);
AttackMode parse_attack_mode(std::string_view name);
AttackStatus parse_attack_status(std::string_view name);

struct AttackConfig {
  double eps = 0.0;
  double alpha = 0.0;
  std::size_t t_iter = 1000;
  AttackMode mode = AttackMode::CycleDetect;
  FingerprintMode fingerprint_mode = FingerprintMode::Projected;
  bool confirm_on_match = true;
  /// Also clamp x + delta into the image domain after each projection.
  bool clamp_to_domain = false;
  /// Seeds the projection key and, mixed with the image index, restarts.
  std::uint64_t seed = 0;
  bool record_trajectory = false;

  /// alpha = eps / 4, T_iter = 1000.
  static AttackConfig with_defaults(double eps, AttackMode mode = AttackMode::CycleDetect);

  /// Throws std::invalid_argument unless eps > 0, alpha > 0, t_iter >= 1.
  void validate() const;
};

struct CycleInfo {
  std::size_t first_visit_iter = 0;
  std::size_t detect_iter = 0;
  std::size_t length() const { return detect_iter - first_visit_iter; }
};

struct AttackOutcome {
  AttackStatus status = AttackStatus::BudgetExhausted;
  /// Gradient evaluations spent (one per iteration).
  std::size_t iterations_used = 0;
  Vec final_delta;
  /// Predicted label of x + final_delta when status is Tricked.
  std::optional<std::size_t> adversarial_label;
  std::optional<CycleInfo> cycle;
  /// Earliest iteration whose iterate misclassified. For Naive runs this may
  /// be set while status is not Tricked (the final iterate recovered).
  std::optional<std::size_t> first_trick_iter;
  std::size_t restarts = 0;
  std::optional<Trajectory> trajectory;

  bool tricked() const { return status == AttackStatus::Tricked; }
  /// Tricked at any recorded iterate (best-iterate accounting).
  bool tricked_any() const { return first_trick_iter.has_value(); }
};

/// The model input for a perturbation: x + delta, clamped to the domain when
/// cfg.clamp_to_domain is set.
Vec perturbed_input(const ImageVec& x, std::span<const double> delta, const AttackConfig& cfg);

/// One update delta' = P_B(delta + alpha * sign(grad)) for a given gradient.
/// With cfg.clamp_to_domain, coordinates where x + delta' leaves the domain
/// are pulled back so that x + delta' lands on the bound.
Vec apply_step(const ImageVec& x, std::span<const double> delta, std::span<const double> grad,
               const AttackConfig& cfg);

/// One PGD step: gradient of the loss at x + delta, then apply_step.
Vec pgd_step(const ClassifierModel& model, const ImageVec& x, std::size_t y,
             std::span<const double> delta, const AttackConfig& cfg);

/// Standard PGD from delta = 0; cfg.mode must be Naive or EarlySuccess.
AttackOutcome run_pgd(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                      const AttackConfig& cfg);

/// PGD with cycle detection; cfg.mode must be CycleDetect.
AttackOutcome run_pgd_cd(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                         const AttackConfig& cfg);

/// PGD with cycle detection and random restarts under one shared budget;
/// cfg.mode must be CycleDetectJumps. Restarts draw from
/// image_seed(cfg.seed, image_index).
AttackOutcome run_pgd_cd_jumps(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                               const AttackConfig& cfg, std::uint64_t image_index = 0);

/// Dispatches on cfg.mode.
AttackOutcome run_attack(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                         const AttackConfig& cfg, std::uint64_t image_index = 0);

/// Each coordinate uniform on [-eps, eps].
Vec random_init_in_ball(double eps, std::size_t dim, Rng& rng);

/// Iterates plain PGD (no checks) `steps` times from `start`, returning
/// delta^(start + 1) ... delta^(start + steps). If `tricked_at` is given it
/// receives the first step (1-based) whose iterate misclassified.
std::vector<Vec> replay_pgd(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                            const AttackConfig& cfg, Vec start, std::size_t steps,
                            std::optional<std::size_t>* tricked_at = nullptr);

}  // namespace pgdcd
