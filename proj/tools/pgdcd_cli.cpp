// pgdcd: PGD robustness evaluation with cycle-detection early exit.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pgdcd/datasets.hpp"
#include "pgdcd/diagnostics.hpp"
#include "pgdcd/harness.hpp"

using namespace pgdcd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct DataArgs {
  std::string data;
  std::string labels;  // set => IDX pair
  std::size_t num_classes = 0;
};

struct AttackArgs {
  double eps = 0.0;
  std::optional<double> alpha;
  std::size_t iters = 1000;
  std::string mode = "cycle-detect";
  std::string fingerprint = "projected";
  bool clamp_domain = false;
  std::uint64_t seed = 0;
  bool record_trajectory = false;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.data, "Dataset: CSV file, or IDX image file with --labels")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--labels", a.labels, "IDX label file (selects IDX input)")->check(CLI::ExistingFile);
  cmd->add_option("--classes", a.num_classes, "Number of classes (default: max label + 1)");
}

void add_attack_options(CLI::App* cmd, AttackArgs& a, bool eps_required = true) {
  auto* eps = cmd->add_option("--eps", a.eps, "L-infinity radius")->check(CLI::PositiveNumber);
  if (eps_required) eps->required();
  cmd->add_option("--alpha", a.alpha, "Step size (default eps/4)")->check(CLI::PositiveNumber);
  cmd->add_option("--iters", a.iters, "Iteration budget")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--fingerprint", a.fingerprint, "Visited-set fingerprint")
      ->capture_default_str()
      ->check(CLI::IsMember({"exact", "projected"}));
  cmd->add_flag("--clamp-domain", a.clamp_domain, "Keep x + delta inside the data domain");
  cmd->add_option("--seed", a.seed, "Seed for projection keys and restarts")->capture_default_str();
}

void add_mode_option(CLI::App* cmd, AttackArgs& a) {
  cmd->add_option("--mode", a.mode, "Attack mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"naive", "early-success", "cycle-detect", "cycle-detect-jumps"}));
}

LabeledDataset load_data(const DataArgs& a) {
  if (a.labels.empty()) return read_csv(a.data, a.num_classes);
  return read_idx(a.data, a.labels, a.num_classes);
}

AttackConfig make_config(const AttackArgs& a) {
  AttackConfig cfg = AttackConfig::with_defaults(a.eps, parse_attack_mode(a.mode));
  if (a.alpha) cfg.alpha = *a.alpha;
  cfg.t_iter = a.iters;
  cfg.fingerprint_mode = parse_fingerprint_mode(a.fingerprint);
  cfg.clamp_to_domain = a.clamp_domain;
  cfg.seed = a.seed;
  cfg.record_trajectory = a.record_trajectory;
  cfg.validate();
  return cfg;
}

std::vector<AttackMode> parse_modes(const std::vector<std::string>& names) {
  std::vector<AttackMode> modes;
  for (const auto& n : names) modes.push_back(parse_attack_mode(n));
  return modes;
}

json outcome_json(const AttackOutcome& o) {
  json j;
  j["status"] = to_string(o.status);
  j["iterations"] = o.iterations_used;
  j["adversarial_label"] = o.adversarial_label ? json(*o.adversarial_label) : json(nullptr);
  j["first_trick_iter"] = o.first_trick_iter ? json(*o.first_trick_iter) : json(nullptr);
  j["cycle"] = o.cycle ? json::array({o.cycle->first_visit_iter, o.cycle->detect_iter}) : json(nullptr);
  j["restarts"] = o.restarts;
  j["final_linf"] = o.final_delta.empty() ? 0.0 : norm_inf(o.final_delta);
  return j;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

void print_summary(const RobustReport& r) {
  std::cout << "images " << r.num_images << ", clean accuracy " << fmt("%.2f", r.clean_accuracy) << "%\n";
  std::cout << "mode                robust%  tricked  cycles  iterations  reduction%  seconds\n";
  for (const auto& s : r.summaries) {
    std::string name(to_string(s.mode));
    name.resize(18, ' ');
    std::cout << name << "  " << fmt("%7.2f", s.robust_accuracy) << "  " << fmt("%7.0f", double(s.tricked))
              << "  " << fmt("%6.0f", double(s.cycles)) << "  " << fmt("%10.0f", double(s.total_iterations))
              << "  " << fmt("%10.2f", s.reduction_percent) << "  " << fmt("%7.2f", s.wall_seconds) << "\n";
  }
}

std::unique_ptr<ClassifierModel> require_model(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--model is required");
  return load_model(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PGD robustness evaluation with cycle-detection early exit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  SyntheticParams gp;
  std::string gen_kind = "blobs", gen_format = "csv", gen_out, gen_labels_out;
  gen->add_option("--kind", gen_kind)->capture_default_str()->check(CLI::IsMember({"blobs", "rings"}));
  gen->add_option("--n", gp.n, "Samples")->capture_default_str();
  gen->add_option("--dim", gp.dim, "Features")->capture_default_str();
  gen->add_option("--classes", gp.classes)->capture_default_str();
  gen->add_option("--noise", gp.noise)->capture_default_str();
  gen->add_option("--seed", gp.seed)->capture_default_str();
  gen->add_option("--format", gen_format)->capture_default_str()->check(CLI::IsMember({"csv", "idx"}));
  gen->add_option("--out", gen_out, "Output file (IDX: image file)")->required();
  gen->add_option("--labels-out", gen_labels_out, "IDX label file (default: <out>.labels)");

  // train-toy
  auto* train = app.add_subcommand("train-toy", "Train a small classifier with SGD");
  DataArgs train_data;
  std::string arch = "mlp", activation = "relu", train_out;
  std::size_t hidden = 32, steps = 500;
  double lr = 0.5;
  std::uint64_t train_seed = 0;
  add_data_options(train, train_data);
  train->add_option("--arch", arch)->capture_default_str()->check(CLI::IsMember({"linear", "mlp"}));
  train->add_option("--hidden", hidden)->capture_default_str();
  train->add_option("--activation", activation)->capture_default_str()->check(CLI::IsMember({"relu", "tanh"}));
  train->add_option("--steps", steps)->capture_default_str();
  train->add_option("--lr", lr)->capture_default_str();
  train->add_option("--seed", train_seed)->capture_default_str();
  train->add_option("--out", train_out, "Model file")->required();

  // attack
  auto* attack = app.add_subcommand("attack", "Attack one image and print the outcome");
  DataArgs attack_data;
  AttackArgs attack_args;
  std::string attack_model, attack_out;
  std::size_t attack_index = 0;
  add_data_options(attack, attack_data);
  attack->add_option("--model", attack_model)->required()->check(CLI::ExistingFile);
  attack->add_option("--index", attack_index, "Image index")->capture_default_str();
  add_attack_options(attack, attack_args);
  add_mode_option(attack, attack_args);
  attack->add_flag("--record-trajectory", attack_args.record_trajectory, "Record iterates");
  attack->add_option("--out", attack_out, "Trajectory CSV (with --record-trajectory)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate robust accuracy and write a report");
  DataArgs eval_data;
  AttackArgs eval_args;
  std::string eval_model, eval_out, eval_model_id;
  std::vector<std::string> eval_modes{"naive", "early-success", "cycle-detect"};
  std::size_t eval_threads = 1;
  add_data_options(eval, eval_data);
  eval->add_option("--model", eval_model)->required()->check(CLI::ExistingFile);
  add_attack_options(eval, eval_args);
  eval->add_option("--mode", eval_modes, "Modes to run")
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::IsMember({"naive", "early-success", "cycle-detect", "cycle-detect-jumps"}));
  eval->add_option("--threads", eval_threads, "Worker threads (0 = all cores)")->capture_default_str();
  eval->add_option("--model-id", eval_model_id, "Model name stored in the report");
  eval->add_option("--out", eval_out, "Report JSON")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Iteration reduction across budgets (CSV)");
  DataArgs sweep_data;
  AttackArgs sweep_args;
  std::string sweep_model, sweep_out;
  std::vector<std::size_t> budgets{1, 10, 100, 1000};
  std::size_t sweep_threads = 1;
  add_data_options(sweep, sweep_data);
  sweep->add_option("--model", sweep_model)->required()->check(CLI::ExistingFile);
  add_attack_options(sweep, sweep_args);
  sweep->add_option("--budgets", budgets, "Ascending budgets")->capture_default_str()->delimiter(',');
  sweep->add_option("--threads", sweep_threads)->capture_default_str();
  sweep->add_option("--out", sweep_out, "Curve CSV")->required();

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "Export a trajectory and lag cosine traces");
  DataArgs diag_data;
  AttackArgs diag_args;
  std::string diag_model, diag_out;
  std::size_t diag_index = 0, max_lag = 4;
  bool builtin_2d = false;
  diag->add_flag("--builtin-2d", builtin_2d, "Use the built-in 2-D oscillation instance");
  diag->add_option("--data", diag_data.data)->check(CLI::ExistingFile);
  diag->add_option("--labels", diag_data.labels)->check(CLI::ExistingFile);
  diag->add_option("--classes", diag_data.num_classes);
  diag->add_option("--model", diag_model)->check(CLI::ExistingFile);
  diag->add_option("--index", diag_index)->capture_default_str();
  add_attack_options(diag, diag_args, false);
  diag->add_option("--max-lag", max_lag)->capture_default_str();
  diag->add_option("--out", diag_out, "Output directory")->required();

  // verify
  auto* verify = app.add_subcommand("verify", "Check verdict equivalence and cycle soundness");
  DataArgs verify_data;
  AttackArgs verify_args;
  std::string verify_model;
  std::size_t verify_threads = 1;
  add_data_options(verify, verify_data);
  verify->add_option("--model", verify_model)->required()->check(CLI::ExistingFile);
  add_attack_options(verify, verify_args);
  verify->add_option("--threads", verify_threads)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      gp.kind = parse_synthetic_kind(gen_kind);
      auto data = generate_synthetic_dataset(gp);
      if (gen_format == "csv") {
        write_csv(data, gen_out);
      } else {
        write_idx(data, gen_out, gen_labels_out.empty() ? gen_out + ".labels" : gen_labels_out);
      }
      std::cout << "wrote " << data.size() << " samples (dim " << data.dim() << ", " << data.num_classes
                << " classes)\n";
    } else if (*train) {
      auto data = load_data(train_data);
      const std::size_t m = data.num_classes;
      std::unique_ptr<ClassifierModel> model;
      if (arch == "linear") {
        model = std::make_unique<LinearSoftmaxModel>(
            train_toy(LinearSoftmaxModel::zeros(data.dim(), m), data, steps, lr, train_seed));
      } else {
        auto init = MlpModel::random_init(data.dim(), hidden, m, parse_activation(activation), train_seed);
        model = std::make_unique<MlpModel>(train_toy(init, data, steps, lr, train_seed + 1));
      }
      save_model(*model, train_out);
      std::cout << "clean accuracy " << fmt("%.2f", evaluate_clean(*model, data).accuracy) << "%\n";
    } else if (*attack) {
      auto data = load_data(attack_data);
      auto model = require_model(attack_model);
      if (attack_index >= data.size()) throw std::out_of_range("--index beyond dataset");
      const auto cfg = make_config(attack_args);
      auto out = run_attack(*model, data.images[attack_index], data.labels[attack_index], cfg, attack_index);
      auto j = outcome_json(out);
      j["index"] = attack_index;
      j["label"] = data.labels[attack_index];
      j["mode"] = to_string(cfg.mode);
      std::cout << j.dump(1) << "\n";
      if (out.trajectory && !attack_out.empty()) {
        export_trajectory(*out.trajectory, detect_cycle_oracle(*out.trajectory), attack_out);
      }
    } else if (*eval) {
      auto data = load_data(eval_data);
      auto model = require_model(eval_model);
      EvalOptions opt;
      opt.config = make_config(eval_args);
      opt.modes = parse_modes(eval_modes);
      opt.threads = eval_threads;
      opt.model_id = eval_model_id.empty() ? fs::path(eval_model).filename().string() : eval_model_id;
      auto report = evaluate_robust(*model, data, opt);
      report.dataset = fs::path(eval_data.data).filename().string();
      write_report(report, eval_out);
      print_summary(report);
    } else if (*sweep) {
      auto data = load_data(sweep_data);
      auto model = require_model(sweep_model);
      auto curve = reduction_sweep(*model, data, budgets, make_config(sweep_args), sweep_threads);
      write_sweep_csv(curve, sweep_out);
      for (const auto& p : curve) {
        std::cout << "T=" << p.budget << "  reduction " << fmt("%.2f", p.reduction_percent) << "%\n";
      }
    } else if (*diag) {
      fs::create_directories(diag_out);
      std::unique_ptr<ClassifierModel> model;
      ImageVec x;
      std::size_t y = 0;
      AttackConfig cfg;
      if (builtin_2d) {
        auto inst = make_two_cycle_instance();
        cfg = AttackConfig::with_defaults(diag_args.eps > 0 ? diag_args.eps : inst.eps);
        cfg.alpha = diag_args.alpha.value_or(diag_args.eps > 0 ? cfg.alpha : inst.alpha);
        model = inst.model.clone();
        x = inst.x;
        y = inst.y;
      } else {
        if (diag_data.data.empty() || diag_args.eps <= 0) {
          throw std::invalid_argument("diagnose needs --data, --model and --eps (or --builtin-2d)");
        }
        auto data = load_data(diag_data);
        model = require_model(diag_model);
        if (diag_index >= data.size()) throw std::out_of_range("--index beyond dataset");
        x = data.images[diag_index];
        y = data.labels[diag_index];
        cfg = AttackConfig::with_defaults(diag_args.eps);
        if (diag_args.alpha) cfg.alpha = *diag_args.alpha;
      }
      cfg.t_iter = diag_args.iters;
      cfg.fingerprint_mode = parse_fingerprint_mode(diag_args.fingerprint);
      cfg.clamp_to_domain = diag_args.clamp_domain;
      cfg.seed = diag_args.seed;
      cfg.record_trajectory = true;
      // Full-budget run: the traces then cover the periodic part past detection.
      cfg.mode = AttackMode::Naive;
      cfg.validate();
      auto out = run_pgd(*model, x, y, cfg);
      auto j = outcome_json(out);
      if (out.trajectory) {
        const auto cycle = detect_cycle_oracle(*out.trajectory);
        export_trajectory(*out.trajectory, cycle, fs::path(diag_out) / "trajectory.csv");
        const auto& g = out.trajectory->signed_grads;
        if (max_lag >= 1 && g.size() > max_lag) {
          export_lag_traces(g, max_lag, fs::path(diag_out) / "lag_traces.csv");
        }
        j["cycle"] = cycle ? json::array({cycle->start, cycle->detect()}) : json(nullptr);
        if (cycle) j["cycle_length"] = cycle->length;
      }
      std::cout << j.dump(1) << "\n";
    } else if (*verify) {
      auto data = load_data(verify_data);
      auto model = require_model(verify_model);
      EvalOptions opt;
      opt.config = make_config(verify_args);
      opt.modes = {AttackMode::Naive, AttackMode::EarlySuccess, AttackMode::CycleDetect};
      opt.threads = verify_threads;
      auto report = evaluate_robust(*model, data, opt);
      auto eq = compare_verdicts(report, AttackMode::CycleDetect, AttackMode::EarlySuccess);
      auto eq_naive = compare_verdicts(report, AttackMode::CycleDetect, AttackMode::Naive);
      auto sound = check_cycle_soundness(*model, data, report);
      std::cout << "equivalence vs early-success: " << eq.compared << " compared, " << eq.mismatches.size()
                << " mismatches\n"
                << "equivalence vs naive (best iterate): " << eq_naive.compared << " compared, "
                << eq_naive.mismatches.size() << " mismatches\n"
                << "cycle soundness: " << sound.checked << " checked, " << sound.replay_mismatches.size()
                << " replay mismatches, " << sound.tricked_after_cycle.size() << " tricked after cycle\n";
      const bool ok = eq.ok() && eq_naive.ok() && sound.ok();
      std::cout << (ok ? "OK" : "FAILED") << "\n";
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
