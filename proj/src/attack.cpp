#include "pgdcd/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pgdcd {

std::string_view to_string(AttackMode mode) {
  switch (mode) {
    case AttackMode::Naive: return "naive";
    case AttackMode::EarlySuccess: return "early-success";
    case AttackMode::CycleDetect: return "cycle-detect";
    case AttackMode::CycleDetectJumps: return "cycle-detect-jumps";
  }
  return "?";
}

std::string_view to_string(AttackStatus status) {
  switch (status) {
    case AttackStatus::Tricked: return "tricked";
    case AttackStatus::CycleDetected: return "cycle-detected";
    case AttackStatus::BudgetExhausted: return "budget-exhausted";
    case AttackStatus::CleanMisclassified: return "clean-misclassified";
  }
  return "?";
}

AttackMode parse_attack_mode(std::string_view name) {
  for (auto m : {AttackMode::Naive, AttackMode::EarlySuccess, AttackMode::CycleDetect,
                 AttackMode::CycleDetectJumps}) {
    if (to_string(m) == name) return m;
  }
  throw std::invalid_argument("unknown attack mode: " + std::string(name));
}

AttackStatus parse_attack_status(std::string_view name) {
  for (auto s : {AttackStatus::Tricked, AttackStatus::CycleDetected, AttackStatus::BudgetExhausted,
                 AttackStatus::CleanMisclassified}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown attack status: " + std::string(name));
}

AttackConfig AttackConfig::with_defaults(double eps, AttackMode mode) {
  AttackConfig cfg;
  cfg.eps = eps;
  cfg.alpha = eps / 4.0;
  cfg.t_iter = 1000;
  cfg.mode = mode;
  return cfg;
}

void AttackConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("AttackConfig: eps must be > 0");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("AttackConfig: alpha must be > 0");
  }
  if (t_iter < 1) throw std::invalid_argument("AttackConfig: t_iter must be >= 1");
}

Vec perturbed_input(const ImageVec& x, std::span<const double> delta, const AttackConfig& cfg) {
  require_same_dim(x.dim(), delta.size(), "perturbed_input");
  Vec in(x.dim());
  for (std::size_t i = 0; i < in.size(); ++i) in[i] = x.data[i] + delta[i];
  if (cfg.clamp_to_domain) {
    for (double& v : in) v = std::clamp(v, x.domain_lo, x.domain_hi);
  }
  return in;
}

Vec apply_step(const ImageVec& x, std::span<const double> delta, std::span<const double> grad,
               const AttackConfig& cfg) {
  require_same_dim(x.dim(), delta.size(), "pgd step");
  require_same_dim(delta.size(), grad.size(), "pgd step");
  Vec next(delta.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    const double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
    next[i] = std::clamp(delta[i] + cfg.alpha * s, -cfg.eps, cfg.eps);
  }
  if (cfg.clamp_to_domain) {
    // Only coordinates that actually leave the domain are re-derived; the
    // others keep their projected value bit-for-bit.
    for (std::size_t i = 0; i < next.size(); ++i) {
      const double v = x.data[i] + next[i];
      if (v > x.domain_hi) {
        next[i] = x.domain_hi - x.data[i];
      } else if (v < x.domain_lo) {
        next[i] = x.domain_lo - x.data[i];
      }
    }
  }
  return next;
}

Vec pgd_step(const ClassifierModel& model, const ImageVec& x, std::size_t y,
             std::span<const double> delta, const AttackConfig& cfg) {
  const auto lg = model.loss_and_input_grad(perturbed_input(x, delta, cfg), y);
  return apply_step(x, delta, lg.grad, cfg);
}

Vec random_init_in_ball(double eps, std::size_t dim, Rng& rng) {
  if (!(eps > 0.0)) throw std::invalid_argument("random_init_in_ball: eps must be > 0");
  Vec v(dim);
  for (double& c : v) c = std::clamp(rng.uniform(-eps, eps), -eps, eps);
  return v;
}

namespace {

void check_inputs(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                  const AttackConfig& cfg) {
  cfg.validate();
  require_same_dim(x.dim(), model.dim_in(), "attack input");
  if (y >= model.num_classes()) throw std::out_of_range("attack: label out of range");
}

class Fingerprinter {
 public:
  Fingerprinter(const AttackConfig& cfg, std::size_t dim) : mode_(cfg.fingerprint_mode) {
    if (mode_ == FingerprintMode::Projected) key_ = ProjectionKey::generate(dim, cfg.seed);
  }
  Fingerprint operator()(std::span<const double> delta) const {
    return mode_ == FingerprintMode::Exact ? fingerprint_exact(delta)
                                           : fingerprint_projected(delta, key_);
  }
  VisitedSetOptions set_options(const AttackConfig& cfg) const {
    return {mode_, cfg.confirm_on_match, false};
  }

 private:
  FingerprintMode mode_;
  ProjectionKey key_;
};

struct LoopPolicy {
  bool stop_on_trick = true;
  bool detect_cycles = false;
};

struct SegmentResult {
  AttackStatus status = AttackStatus::BudgetExhausted;
  std::size_t used = 0;
  Vec delta;
  std::size_t last_label = 0;
  std::optional<CycleInfo> cycle;
};

// Runs up to `budget` iterations from `delta`. Iteration numbers reported in
// the outcome are offset by `offset` so restarts share one global clock.
SegmentResult run_segment(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                          const AttackConfig& cfg, Vec delta, std::size_t budget,
                          std::size_t offset, LoopPolicy policy, const Fingerprinter* fingerprint,
                          AttackOutcome& out) {
  std::optional<VisitedSet> visited;
  if (policy.detect_cycles) visited.emplace(fingerprint->set_options(cfg));
  Trajectory* traj = out.trajectory ? &*out.trajectory : nullptr;

  SegmentResult seg;
  for (std::size_t i = 1; i <= budget; ++i) {
    const std::size_t global = offset + i;
    const auto lg = model.loss_and_input_grad(perturbed_input(x, delta, cfg), y);
    delta = apply_step(x, delta, lg.grad, cfg);
    const std::size_t label = model.predict(perturbed_input(x, delta, cfg));
    const bool tricked = label != y;
    seg.last_label = label;
    if (traj) {
      traj->deltas.push_back(delta);
      traj->signed_grads.push_back(sign_vec(lg.grad));
      traj->tricked.push_back(tricked);
      if (tricked && !traj->tricked_at) traj->tricked_at = global;
    }
    if (tricked && !out.first_trick_iter) out.first_trick_iter = global;
    if (tricked && policy.stop_on_trick) {
      seg.status = AttackStatus::Tricked;
      seg.used = i;
      seg.delta = std::move(delta);
      return seg;
    }
    if (visited) {
      const auto r = visited->insert((*fingerprint)(delta), delta, global);
      if (r.seen_before) {
        seg.status = AttackStatus::CycleDetected;
        seg.used = i;
        seg.cycle = CycleInfo{r.first_visit, global};
        seg.delta = std::move(delta);
        return seg;
      }
    }
  }
  seg.used = budget;
  seg.delta = std::move(delta);
  return seg;
}

// Shared prologue: clean check and trajectory setup. Returns false if the
// clean input is already misclassified.
bool start_run(const ClassifierModel& model, const ImageVec& x, std::size_t y,
               const AttackConfig& cfg, AttackOutcome& out) {
  check_inputs(model, x, y, cfg);
  out.final_delta.assign(x.dim(), 0.0);
  if (cfg.record_trajectory) {
    out.trajectory.emplace();
    out.trajectory->initial = out.final_delta;
  }
  if (model.predict(x.data) != y) {
    out.status = AttackStatus::CleanMisclassified;
    out.iterations_used = 0;
    return false;
  }
  return true;
}

}  // namespace

AttackOutcome run_pgd(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                      const AttackConfig& cfg) {
  if (cfg.mode != AttackMode::Naive && cfg.mode != AttackMode::EarlySuccess) {
    throw std::invalid_argument("run_pgd: mode must be naive or early-success");
  }
  AttackOutcome out;
  if (!start_run(model, x, y, cfg, out)) return out;

  const bool naive = cfg.mode == AttackMode::Naive;
  auto seg = run_segment(model, x, y, cfg, out.final_delta, cfg.t_iter, 0,
                         LoopPolicy{!naive, false}, nullptr, out);
  out.iterations_used = seg.used;
  out.final_delta = std::move(seg.delta);
  if (naive) {
    // Verdict from the final iterate; first_trick_iter keeps the best-iterate view.
    out.status = seg.last_label != y ? AttackStatus::Tricked : AttackStatus::BudgetExhausted;
  } else {
    out.status = seg.status;
  }
  if (out.status == AttackStatus::Tricked) out.adversarial_label = seg.last_label;
  return out;
}

AttackOutcome run_pgd_cd(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                         const AttackConfig& cfg) {
  if (cfg.mode != AttackMode::CycleDetect) throw std::invalid_argument("run_pgd_cd: mode must be cycle-detect");
  AttackOutcome out;
  if (!start_run(model, x, y, cfg, out)) return out;

  const Fingerprinter fingerprint(cfg, x.dim());
  auto seg = run_segment(model, x, y, cfg, out.final_delta, cfg.t_iter, 0,
                         LoopPolicy{true, true}, &fingerprint, out);
  out.status = seg.status;
  out.iterations_used = seg.used;
  out.final_delta = std::move(seg.delta);
  out.cycle = seg.cycle;
  if (out.status == AttackStatus::Tricked) out.adversarial_label = seg.last_label;
  return out;
}

AttackOutcome run_pgd_cd_jumps(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                               const AttackConfig& cfg, std::uint64_t image_index) {
  if (cfg.mode != AttackMode::CycleDetectJumps) {
    throw std::invalid_argument("run_pgd_cd_jumps: mode must be cycle-detect-jumps");
  }
  AttackOutcome out;
  if (!start_run(model, x, y, cfg, out)) return out;

  const Fingerprinter fingerprint(cfg, x.dim());
  Rng rng(image_seed(cfg.seed, image_index));
  Vec delta = out.final_delta;
  std::size_t used = 0;
  while (true) {
    auto seg = run_segment(model, x, y, cfg, std::move(delta), cfg.t_iter - used, used,
                           LoopPolicy{true, true}, &fingerprint, out);
    used += seg.used;
    out.status = seg.status;
    out.cycle = seg.cycle;
    out.final_delta = std::move(seg.delta);
    if (seg.status == AttackStatus::Tricked) {
      out.adversarial_label = seg.last_label;
      break;
    }
    if (seg.status != AttackStatus::CycleDetected || used >= cfg.t_iter) break;
    delta = random_init_in_ball(cfg.eps, x.dim(), rng);
    if (cfg.clamp_to_domain) {
      // Keep x + delta inside the domain the same way a step would.
      for (std::size_t i = 0; i < delta.size(); ++i) {
        const double v = x.data[i] + delta[i];
        if (v > x.domain_hi) delta[i] = x.domain_hi - x.data[i];
        else if (v < x.domain_lo) delta[i] = x.domain_lo - x.data[i];
      }
    }
    ++out.restarts;
    if (out.trajectory) out.trajectory->segment_starts.push_back(used + 1);
  }
  out.iterations_used = used;
  return out;
}

AttackOutcome run_attack(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                         const AttackConfig& cfg, std::uint64_t image_index) {
  switch (cfg.mode) {
    case AttackMode::Naive:
    case AttackMode::EarlySuccess: return run_pgd(model, x, y, cfg);
    case AttackMode::CycleDetect: return run_pgd_cd(model, x, y, cfg);
    case AttackMode::CycleDetectJumps: return run_pgd_cd_jumps(model, x, y, cfg, image_index);
  }
  throw std::invalid_argument("run_attack: unknown mode");
}

std::vector<Vec> replay_pgd(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                            const AttackConfig& cfg, Vec start, std::size_t steps,
                            std::optional<std::size_t>* tricked_at) {
  check_inputs(model, x, y, cfg);
  std::vector<Vec> out;
  out.reserve(steps);
  if (tricked_at) tricked_at->reset();
  for (std::size_t i = 1; i <= steps; ++i) {
    start = pgd_step(model, x, y, start, cfg);
    if (tricked_at && !*tricked_at && model.predict(perturbed_input(x, start, cfg)) != y) {
      *tricked_at = i;
    }
    out.push_back(start);
  }
  return out;
}

}  // namespace pgdcd
