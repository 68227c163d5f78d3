#include "pgdcd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pgdcd/errors.hpp"

namespace pgdcd {

CleanEvaluation evaluate_clean(const ClassifierModel& model, const LabeledDataset& data) {
  if (data.size() == 0) throw std::invalid_argument("evaluate_clean: empty dataset");
  data.validate();
  require_same_dim(data.dim(), model.dim_in(), "evaluate_clean");
  CleanEvaluation out;
  out.correct.resize(data.size());
  out.predictions.resize(data.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.predictions[i] = model.predict(data.images[i].data);
    out.correct[i] = out.predictions[i] == data.labels[i];
    hits += out.correct[i] ? 1 : 0;
  }
  out.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(data.size());
  return out;
}

OutcomeRow OutcomeRow::from(const AttackOutcome& o) {
  OutcomeRow row;
  row.status = o.status;
  row.iterations = o.iterations_used;
  row.adversarial_label = o.adversarial_label;
  row.first_trick_iter = o.first_trick_iter;
  row.cycle = o.cycle;
  row.restarts = o.restarts;
  return row;
}

namespace {

GroupStats group_stats(std::vector<std::size_t> counts) {
  GroupStats g;
  g.count = counts.size();
  if (counts.empty()) return g;
  std::sort(counts.begin(), counts.end());
  const auto total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  g.mean = static_cast<double>(total) / static_cast<double>(counts.size());
  g.median = counts[(counts.size() - 1) / 2];
  return g;
}

}  // namespace

IterationStats iteration_stats(std::span<const OutcomeRow> rows) {
  if (rows.empty()) throw std::invalid_argument("iteration_stats: no outcomes");
  std::vector<std::size_t> tricked, untricked, overall;
  for (const auto& r : rows) {
    if (!r.attacked()) continue;
    (r.tricked() ? tricked : untricked).push_back(r.iterations);
    overall.push_back(r.iterations);
  }
  return {group_stats(std::move(tricked)), group_stats(std::move(untricked)),
          group_stats(std::move(overall))};
}

double reduction_percent(std::uint64_t iterations, std::uint64_t baseline) {
  if (baseline == 0) return 0.0;
  return 100.0 * (1.0 - static_cast<double>(iterations) / static_cast<double>(baseline));
}

const ModeSummary* RobustReport::summary(AttackMode mode) const {
  for (const auto& s : summaries) {
    if (s.mode == mode) return &s;
  }
  return nullptr;
}

std::optional<std::size_t> RobustReport::mode_index(AttackMode mode) const {
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (modes[k] == mode) return k;
  }
  return std::nullopt;
}

namespace {

// Runs fn(i) for i in [0, n) on a small pool; fn writes only to slot i.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

}  // namespace

RobustReport evaluate_robust(const ClassifierModel& model, const LabeledDataset& data,
                             const EvalOptions& options) {
  options.config.validate();
  if (options.modes.empty()) throw std::invalid_argument("evaluate_robust: no attack modes");
  const CleanEvaluation clean = evaluate_clean(model, data);

  RobustReport report;
  report.dataset = data.name;
  report.model_id = options.model_id;
  report.config = options.config;
  report.config.record_trajectory = false;
  report.num_images = data.size();
  report.clean_accuracy = clean.accuracy;
  report.clean_correct = static_cast<std::size_t>(std::count(clean.correct.begin(), clean.correct.end(), true));
  report.modes = options.modes;
  report.baseline_iterations = static_cast<std::uint64_t>(report.clean_correct) * options.config.t_iter;

  const std::size_t n_modes = options.modes.size();
  report.images.resize(data.size());
  std::vector<double> seconds(data.size() * n_modes, 0.0);

  parallel_for(data.size(), options.threads, [&](std::size_t i) {
    ImageRow& row = report.images[i];
    row.index = i;
    row.label = data.labels[i];
    row.clean_prediction = clean.predictions[i];
    row.clean_correct = clean.correct[i];
    row.outcomes.resize(n_modes);
    for (std::size_t k = 0; k < n_modes; ++k) {
      OutcomeRow& out = row.outcomes[k];
      if (!row.clean_correct) {
        out.status = AttackStatus::CleanMisclassified;
        continue;
      }
      AttackConfig cfg = report.config;
      cfg.mode = options.modes[k];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        out = OutcomeRow::from(run_attack(model, data.images[i], data.labels[i], cfg, i));
      } catch (const std::exception& e) {
        out = OutcomeRow{};
        out.error = e.what();
      }
      seconds[i * n_modes + k] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });

  const double n = static_cast<double>(data.size());
  for (std::size_t k = 0; k < n_modes; ++k) {
    ModeSummary s;
    s.mode = options.modes[k];
    std::vector<OutcomeRow> rows;
    rows.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const OutcomeRow& r = report.images[i].outcomes[k];
      rows.push_back(r);
      if (!r.error.empty()) ++s.errors;
      if (r.tricked()) ++s.tricked;
      if (r.tricked_any()) ++s.tricked_any;
      if (r.error.empty() && r.status == AttackStatus::CycleDetected) ++s.cycles;
      if (r.error.empty()) s.total_iterations += r.iterations;
      s.wall_seconds += seconds[i * n_modes + k];
    }
    s.robust_accuracy = 100.0 * static_cast<double>(report.clean_correct - s.tricked) / n;
    s.robust_accuracy_best_iterate = 100.0 * static_cast<double>(report.clean_correct - s.tricked_any) / n;
    s.reduction_percent = reduction_percent(s.total_iterations, report.baseline_iterations);
    s.stats = iteration_stats(rows);
    report.summaries.push_back(s);
  }
  if (const auto* cd = report.summary(AttackMode::CycleDetect)) {
    report.reduction_percent = cd->reduction_percent;
  }
  return report;
}

std::vector<SweepPoint> reduction_sweep(const ClassifierModel& model, const LabeledDataset& data,
                                        std::span<const std::size_t> budgets,
                                        const AttackConfig& config, std::size_t threads) {
  if (budgets.empty()) throw std::invalid_argument("reduction_sweep: no budgets");
  for (std::size_t k = 0; k < budgets.size(); ++k) {
    if (budgets[k] < 1) throw std::invalid_argument("reduction_sweep: budgets must be >= 1");
    if (k > 0 && budgets[k] < budgets[k - 1]) {
      throw std::invalid_argument("reduction_sweep: budgets must be ascending");
    }
  }
  std::vector<SweepPoint> curve;
  for (std::size_t budget : budgets) {
    EvalOptions opts;
    opts.config = config;
    opts.config.t_iter = budget;
    opts.modes = {AttackMode::EarlySuccess, AttackMode::CycleDetect};
    opts.threads = threads;
    const RobustReport r = evaluate_robust(model, data, opts);
    SweepPoint p;
    p.budget = budget;
    p.naive_iterations = r.baseline_iterations;
    p.early_success_iterations = r.summary(AttackMode::EarlySuccess)->total_iterations;
    p.cycle_detect_iterations = r.summary(AttackMode::CycleDetect)->total_iterations;
    p.reduction_percent = reduction_percent(p.cycle_detect_iterations, p.naive_iterations);
    p.early_success_reduction_percent = reduction_percent(p.early_success_iterations, p.naive_iterations);
    curve.push_back(p);
  }
  return curve;
}

void write_sweep_csv(std::span<const SweepPoint> curve, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(FormatErrc::Io, "cannot open " + path.string() + " for writing");
  os << "budget,naive_iterations,early_success_iterations,cycle_detect_iterations,"
        "reduction_percent,early_success_reduction_percent\n";
  os.precision(17);
  for (const auto& p : curve) {
    os << p.budget << ',' << p.naive_iterations << ',' << p.early_success_iterations << ','
       << p.cycle_detect_iterations << ',' << p.reduction_percent << ','
       << p.early_success_reduction_percent << '\n';
  }
  if (!os) throw FormatError(FormatErrc::Io, "write failed for " + path.string());
}

// --- verification -----------------------------------------------------------

EquivalenceResult compare_verdicts(const RobustReport& report, AttackMode mode, AttackMode baseline) {
  const auto k = report.mode_index(mode);
  const auto b = report.mode_index(baseline);
  if (!k || !b) throw std::invalid_argument("compare_verdicts: mode not present in report");
  EquivalenceResult res;
  for (const auto& img : report.images) {
    if (!img.clean_correct) continue;
    ++res.compared;
    const OutcomeRow& a = img.outcomes[*k];
    const OutcomeRow& c = img.outcomes[*b];
    const bool va = mode == AttackMode::Naive ? a.tricked_any() : a.tricked();
    const bool vb = baseline == AttackMode::Naive ? c.tricked_any() : c.tricked();
    if (va != vb || !a.error.empty() || !c.error.empty()) res.mismatches.push_back(img.index);
  }
  return res;
}

bool cycle_outcome_sound(const ClassifierModel& model, const ImageVec& x, std::size_t y,
                         const AttackConfig& cfg, const AttackOutcome& outcome, std::string* why) {
  auto fail = [&](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  if (outcome.status != AttackStatus::CycleDetected || !outcome.cycle) {
    return fail("outcome is not a detected cycle");
  }
  const CycleInfo c = *outcome.cycle;
  if (c.detect_iter != outcome.iterations_used || c.first_visit_iter >= c.detect_iter) {
    return fail("inconsistent cycle bookkeeping");
  }
  std::optional<std::size_t> tricked_at;
  const Vec origin(x.dim(), 0.0);
  Vec first = c.first_visit_iter == 0
                  ? origin
                  : replay_pgd(model, x, y, cfg, origin, c.first_visit_iter, &tricked_at).back();
  if (tricked_at) return fail("prefix before the first visit tricks");
  auto loop = replay_pgd(model, x, y, cfg, first, c.length(), &tricked_at);
  if (!bit_equal(loop.back(), outcome.final_delta)) return fail("replay misses the detecting iterate");
  if (!bit_equal(loop.back(), first)) return fail("detecting iterate differs from first visit");
  if (tricked_at) return fail("cycle contains a misclassified iterate");
  if (cfg.t_iter > c.detect_iter) {
    replay_pgd(model, x, y, cfg, loop.back(), cfg.t_iter - c.detect_iter, &tricked_at);
    if (tricked_at) return fail("continuing past the cycle tricks");
  }
  return true;
}

SoundnessResult check_cycle_soundness(const ClassifierModel& model, const LabeledDataset& data,
                                      const RobustReport& report) {
  SoundnessResult res;
  for (std::size_t k = 0; k < report.modes.size(); ++k) {
    if (report.modes[k] != AttackMode::CycleDetect) continue;
    AttackConfig cfg = report.config;
    cfg.mode = AttackMode::CycleDetect;
    for (const auto& img : report.images) {
      const OutcomeRow& row = img.outcomes[k];
      if (!row.error.empty() || row.status != AttackStatus::CycleDetected) continue;
      ++res.checked;
      const AttackOutcome rerun = run_pgd_cd(model, data.images[img.index], img.label, cfg);
      if (rerun.status != row.status || rerun.iterations_used != row.iterations) {
        res.replay_mismatches.push_back(img.index);
        continue;
      }
      std::string why;
      if (!cycle_outcome_sound(model, data.images[img.index], img.label, cfg, rerun, &why)) {
        if (why.find("trick") != std::string::npos) {
          res.tricked_after_cycle.push_back(img.index);
        } else {
          res.replay_mismatches.push_back(img.index);
        }
      }
    }
  }
  return res;
}

}  // namespace pgdcd
