#include "pgdcd/diagnostics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pgdcd/errors.hpp"

namespace pgdcd {

std::vector<double> lag_cosine_trace(std::span<const Vec> signed_grads, std::size_t lag) {
  if (lag < 1 || lag >= signed_grads.size()) {
    throw std::invalid_argument("lag_cosine_trace: lag must satisfy 1 <= lag < length");
  }
  std::vector<double> out(signed_grads.size() - lag);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = cosine_similarity(signed_grads[i], signed_grads[i + lag]);
  }
  return out;
}

std::optional<CycleReport> detect_cycle_oracle(const Trajectory& traj) {
  std::size_t segment = 0;  // 0-based index of the first record of the current segment
  std::size_t next_start = 0;
  for (std::size_t j = 0; j < traj.deltas.size(); ++j) {
    const std::size_t iteration = j + 1;
    if (next_start < traj.segment_starts.size() && traj.segment_starts[next_start] == iteration) {
      segment = j;
      ++next_start;
    }
    for (std::size_t i = segment; i < j; ++i) {
      if (bit_equal(traj.deltas[i], traj.deltas[j])) return CycleReport{i + 1, j - i};
    }
  }
  return std::nullopt;
}

namespace {

// Class 1 logit: c - k (|x0 - a| + |x1 - b|) built from four ReLU units;
// class 0 logit is 0.
constexpr double kOptimumA = 0.1;
constexpr double kOptimumB = 1.5;
constexpr double kTrickRadius = 0.3;

void add_diamond(Matrix& w1, Vec& b1, Matrix& w2, Vec& b2, std::size_t unit0, std::size_t cls,
                 double a, double b, double slope, double radius) {
  const double dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const double centers[4] = {a, a, b, b};
  for (std::size_t u = 0; u < 4; ++u) {
    w1(unit0 + u, 0) = dirs[u][0];
    w1(unit0 + u, 1) = dirs[u][1];
    // relu(+-(x - center))
    b1[unit0 + u] = -(dirs[u][0] + dirs[u][1]) * centers[u];
    w2(cls, unit0 + u) = -slope;
  }
  b2[cls] = slope * radius;
}

}  // namespace

TwoCycleInstance make_two_cycle_instance() {
  Matrix w1(4, 2);
  Vec b1(4, 0.0);
  Matrix w2(2, 4);
  Vec b2(2, 0.0);
  add_diamond(w1, b1, w2, b2, 0, 1, kOptimumA, kOptimumB, 1.0, kTrickRadius);
  return TwoCycleInstance{MlpModel(std::move(w1), std::move(b1), std::move(w2), std::move(b2), Activation::Relu),
                      ImageVec(Vec{0.0, 0.0}, -5.0, 5.0),
                      0,
                      1.0,
                      0.25,
                      Vec{kOptimumA, kOptimumB},
                      kTrickRadius};
}

TwoCycleInstance make_two_cycle_jumps_instance() {
  Matrix w1(8, 2);
  Vec b1(8, 0.0);
  Matrix w2(3, 8);
  Vec b2(3, 0.0);
  add_diamond(w1, b1, w2, b2, 0, 1, kOptimumA, kOptimumB, 1.0, kTrickRadius);
  // Steeper and narrower: negligible pull on the trajectory from the origin.
  add_diamond(w1, b1, w2, b2, 4, 2, -0.8, -0.8, 5.0, kTrickRadius);
  return TwoCycleInstance{MlpModel(std::move(w1), std::move(b1), std::move(w2), std::move(b2), Activation::Relu),
                      ImageVec(Vec{0.0, 0.0}, -5.0, 5.0),
                      0,
                      1.0,
                      0.25,
                      Vec{kOptimumA, kOptimumB},
                      kTrickRadius};
}

namespace {

void put_double(std::ostream& os, double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  os.write(buf, res.ptr - buf);
}

}  // namespace

void export_trajectory(const Trajectory& traj, const std::optional<CycleReport>& cycle,
                       const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(FormatErrc::Io, "cannot open " + path.string() + " for writing");
  const std::size_t d = traj.initial.size();
  os << "iteration";
  for (std::size_t k = 0; k < d; ++k) os << ",delta_" << k;
  os << ",tricked,in_cycle\n";
  for (std::size_t j = 0; j < traj.deltas.size(); ++j) {
    const std::size_t iteration = j + 1;
    os << iteration;
    for (double v : traj.deltas[j]) {
      os << ',';
      put_double(os, v);
    }
    const bool in_cycle = cycle && iteration >= cycle->start;
    os << ',' << (traj.tricked[j] ? 1 : 0) << ',' << (in_cycle ? 1 : 0) << '\n';
  }
  if (!os) throw FormatError(FormatErrc::Io, "write failed for " + path.string());
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrc::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw FormatError(FormatErrc::Truncated, "missing header");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 4 || line.rfind("iteration,", 0) != 0) {
    throw FormatError(FormatErrc::Malformed, "unexpected trajectory header");
  }
  const std::size_t d = columns - 3;

  std::vector<TrajectoryRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != columns) throw FormatError(FormatErrc::DimMismatch, "trajectory row width");
    TrajectoryRow row;
    auto parse = [](std::string_view f, auto& out) {
      auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), out);
      if (ec != std::errc() || p != f.data() + f.size()) {
        throw FormatError(FormatErrc::Malformed, "bad trajectory field '" + std::string(f) + "'");
      }
    };
    parse(fields[0], row.iteration);
    row.delta.resize(d);
    for (std::size_t k = 0; k < d; ++k) parse(fields[1 + k], row.delta[k]);
    int flag = 0;
    parse(fields[1 + d], flag);
    row.tricked = flag != 0;
    parse(fields[2 + d], flag);
    row.in_cycle = flag != 0;
    rows.push_back(std::move(row));
  }
  return rows;
}

void export_lag_traces(std::span<const Vec> signed_grads, std::size_t max_lag,
                       const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(FormatErrc::Io, "cannot open " + path.string() + " for writing");
  max_lag = std::min(max_lag, signed_grads.empty() ? 0 : signed_grads.size() - 1);
  std::vector<std::vector<double>> traces;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    std::vector<double> t(signed_grads.size() - lag);
    for (std::size_t i = 0; i < t.size(); ++i) {
      // Zero signed gradients have no direction; leave those cells empty.
      try {
        t[i] = cosine_similarity(signed_grads[i], signed_grads[i + lag]);
      } catch (const DegenerateInput&) {
        t[i] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    traces.push_back(std::move(t));
  }
  os << "index";
  for (std::size_t lag = 1; lag <= max_lag; ++lag) os << ",lag_" << lag;
  os << '\n';
  const std::size_t rows = traces.empty() ? 0 : traces.front().size();
  for (std::size_t i = 0; i < rows; ++i) {
    os << i;
    for (const auto& t : traces) {
      os << ',';
      if (i < t.size() && !std::isnan(t[i])) put_double(os, t[i]);
    }
    os << '\n';
  }
  if (!os) throw FormatError(FormatErrc::Io, "write failed for " + path.string());
}

}  // namespace pgdcd
