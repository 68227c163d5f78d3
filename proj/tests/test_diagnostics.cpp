#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "pgdcd/diagnostics.hpp"
#include "pgdcd/errors.hpp"

using namespace pgdcd;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("pgdcd_diag_" + name);
}

AttackConfig two_cycle_config(const TwoCycleInstance& inst, AttackMode mode) {
  AttackConfig cfg;
  cfg.eps = inst.eps;
  cfg.alpha = inst.alpha;
  cfg.t_iter = 1000;
  cfg.mode = mode;
  cfg.record_trajectory = true;
  return cfg;
}

}  // namespace

TEST_CASE("lag traces") {
  std::vector<Vec> constant(6, Vec{1.0, -1.0, 1.0});
  for (double c : lag_cosine_trace(constant, 1)) CHECK(c == 1.0);

  Vec a{1, 1, 1, 1}, b{1, 1, 1, -1};
  std::vector<Vec> alternating{a, b, a, b, a, b};
  auto lag1 = lag_cosine_trace(alternating, 1);
  REQUIRE(lag1.size() == 5);
  for (double c : lag1) CHECK(c == 0.5);
  for (double c : lag_cosine_trace(alternating, 2)) CHECK(c == 1.0);

  CHECK_THROWS_AS(lag_cosine_trace(alternating, 0), std::invalid_argument);
  CHECK_THROWS_AS(lag_cosine_trace(alternating, 6), std::invalid_argument);
  std::vector<Vec> with_zero{a, Vec{0, 0, 0, 0}};
  CHECK_THROWS_AS(lag_cosine_trace(with_zero, 1), DegenerateInput);
}

TEST_CASE("cycle oracle on a hand-built trajectory") {
  Trajectory t;
  t.initial = {0.0};
  t.deltas = {{1.0}, {2.0}, {1.0}, {2.0}};
  CHECK(detect_cycle_oracle(t) == CycleReport{1, 2});

  // Returning to the initial iterate is not a revisit.
  t.deltas = {{1.0}, {0.0}, {3.0}};
  CHECK_FALSE(detect_cycle_oracle(t).has_value());

  // A repeat across a restart boundary does not count.
  t.deltas = {{1.0}, {2.0}, {1.0}, {5.0}};
  t.segment_starts = {3};
  CHECK_FALSE(detect_cycle_oracle(t).has_value());
  t.deltas.push_back({1.0});
  CHECK(detect_cycle_oracle(t) == CycleReport{3, 2});

  // Signed zeros differ bitwise.
  Trajectory z;
  z.initial = {1.0};
  z.deltas = {{0.0}, {-0.0}};
  CHECK_FALSE(detect_cycle_oracle(z).has_value());
}

TEST_CASE("two-point oscillation on the constructed 2-D instance") {
  auto inst = make_two_cycle_instance();
  auto cfg = two_cycle_config(inst, AttackMode::CycleDetect);
  auto out = run_pgd_cd(inst.model, inst.x, inst.y, cfg);

  REQUIRE(out.status == AttackStatus::CycleDetected);
  REQUIRE(out.cycle);
  CHECK(out.cycle->first_visit_iter == 4);
  CHECK(out.cycle->detect_iter == 6);
  REQUIRE(out.trajectory);
  auto oracle = detect_cycle_oracle(*out.trajectory);
  REQUIRE(oracle);
  CHECK(oracle->length == 2);
  CHECK(oracle->start == out.cycle->first_visit_iter);
  CHECK(oracle->detect() == out.cycle->detect_iter);

  const auto& t = *out.trajectory;
  CHECK(t.delta_at(4) == Vec{0.0, 1.0});
  CHECK(t.delta_at(5) == Vec{0.25, 1.0});
  for (std::size_t i = 4; i <= 5; ++i) CHECK(norm_inf(t.delta_at(i)) == inst.eps);

  // The optimum is out of reach, and plain PGD never tricks.
  CHECK(norm_inf(inst.optimum) > inst.eps);
  auto naive = run_pgd(inst.model, inst.x, inst.y, two_cycle_config(inst, AttackMode::Naive));
  CHECK_FALSE(naive.tricked_any());
}

TEST_CASE("a ball containing the optimum is tricked") {
  auto inst = make_two_cycle_instance();
  auto cfg = two_cycle_config(inst, AttackMode::CycleDetect);
  cfg.eps = 2.0;
  auto out = run_pgd_cd(inst.model, inst.x, inst.y, cfg);
  CHECK(out.status == AttackStatus::Tricked);
  CHECK(out.iterations_used == 6);
  CHECK(out.adversarial_label == 1u);
}

TEST_CASE("trajectory export round-trip") {
  auto inst = make_two_cycle_instance();
  auto out = run_pgd_cd(inst.model, inst.x, inst.y, two_cycle_config(inst, AttackMode::CycleDetect));
  REQUIRE(out.trajectory);
  const auto cycle = detect_cycle_oracle(*out.trajectory);
  const auto path = temp_file("traj.csv");
  export_trajectory(*out.trajectory, cycle, path);

  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header == "iteration,delta_0,delta_1,tricked,in_cycle");

  auto rows = read_trajectory_csv(path);
  REQUIRE(rows.size() == out.trajectory->size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    CHECK(rows[j].iteration == j + 1);
    CHECK(bit_equal(rows[j].delta, out.trajectory->deltas[j]));
    CHECK_FALSE(rows[j].tricked);
    CHECK(rows[j].in_cycle == (j + 1 >= 4));
  }
  fs::remove(path);
}

TEST_CASE("lag trace export") {
  Vec a{1, 1, 1, 1}, b{1, 1, 1, -1};
  std::vector<Vec> grads{a, b, a};
  const auto path = temp_file("lags.csv");
  export_lag_traces(grads, 2, path);
  std::ifstream is(path);
  std::string line, all;
  while (std::getline(is, line)) all += line + "\n";
  CHECK(all == "index,lag_1,lag_2\n0,0.5,1\n1,0.5,\n");
  fs::remove(path);
}

TEST_CASE("malformed trajectory csv") {
  const auto path = temp_file("bad.csv");
  {
    std::ofstream os(path);
    os << "iteration,delta_0,tricked,in_cycle\n1,abc,0,0\n";
  }
  CHECK_THROWS_AS(read_trajectory_csv(path), FormatError);
  CHECK_THROWS_AS(read_trajectory_csv(temp_file("missing.csv")), FormatError);
  fs::remove(path);
}
