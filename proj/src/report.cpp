#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pgdcd/errors.hpp"
#include "pgdcd/harness.hpp"

namespace pgdcd {

using nlohmann::json;

namespace {

constexpr const char* kSchemaName = "pgdcd-report";

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json group_json(const GroupStats& g) {
  return {{"count", g.count}, {"mean", opt(g.mean)}, {"median", opt(g.median)}};
}

json row_json(const OutcomeRow& r) {
  json j = {{"status", to_string(r.status)},
            {"iterations", r.iterations},
            {"adversarial_label", opt(r.adversarial_label)},
            {"first_trick_iter", opt(r.first_trick_iter)},
            {"cycle", r.cycle ? json::array({r.cycle->first_visit_iter, r.cycle->detect_iter}) : json(nullptr)},
            {"restarts", r.restarts}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<T>();
}

GroupStats group_from(const json& j) {
  GroupStats g;
  g.count = j.at("count").get<std::size_t>();
  g.mean = get_opt<double>(j, "mean");
  g.median = get_opt<std::size_t>(j, "median");
  return g;
}

OutcomeRow row_from(const json& j) {
  OutcomeRow r;
  r.status = parse_attack_status(j.at("status").get<std::string>());
  r.iterations = j.at("iterations").get<std::size_t>();
  r.adversarial_label = get_opt<std::size_t>(j, "adversarial_label");
  r.first_trick_iter = get_opt<std::size_t>(j, "first_trick_iter");
  if (const auto& c = j.at("cycle"); !c.is_null()) {
    r.cycle = CycleInfo{c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>()};
  }
  r.restarts = j.at("restarts").get<std::size_t>();
  if (j.contains("error")) r.error = j.at("error").get<std::string>();
  return r;
}

}  // namespace

std::string report_to_json(const RobustReport& report, bool include_wall_clock) {
  json modes = json::array();
  for (const auto& s : report.summaries) {
    json m = {{"mode", to_string(s.mode)},
              {"tricked", s.tricked},
              {"tricked_any", s.tricked_any},
              {"cycles", s.cycles},
              {"errors", s.errors},
              {"robust_accuracy", s.robust_accuracy},
              {"robust_accuracy_best_iterate", s.robust_accuracy_best_iterate},
              {"total_iterations", s.total_iterations},
              {"reduction_percent", s.reduction_percent},
              {"stats",
               {{"tricked", group_json(s.stats.tricked)},
                {"untricked", group_json(s.stats.untricked)},
                {"overall", group_json(s.stats.overall)}}}};
    if (include_wall_clock) m["wall_seconds"] = s.wall_seconds;
    modes.push_back(std::move(m));
  }
  json images = json::array();
  for (const auto& img : report.images) {
    json outcomes = json::array();
    for (const auto& r : img.outcomes) outcomes.push_back(row_json(r));
    images.push_back({{"index", img.index},
                      {"label", img.label},
                      {"clean_prediction", img.clean_prediction},
                      {"clean_correct", img.clean_correct},
                      {"outcomes", std::move(outcomes)}});
  }
  const auto& c = report.config;
  json j = {{"schema", kSchemaName},
            {"schema_version", RobustReport::kSchemaVersion},
            {"dataset", report.dataset},
            {"model", report.model_id},
            {"config",
             {{"eps", c.eps},
              {"alpha", c.alpha},
              {"t_iter", c.t_iter},
              {"fingerprint", to_string(c.fingerprint_mode)},
              {"confirm_on_match", c.confirm_on_match},
              {"clamp_to_domain", c.clamp_to_domain},
              {"seed", c.seed}}},
            {"num_images", report.num_images},
            {"clean_correct", report.clean_correct},
            {"clean_accuracy", report.clean_accuracy},
            {"baseline_iterations", report.baseline_iterations},
            {"reduction_percent", opt(report.reduction_percent)},
            {"modes", std::move(modes)},
            {"images", std::move(images)}};
  return j.dump(1) + "\n";
}

RobustReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(FormatErrc::Malformed, e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != kSchemaName) {
      throw FormatError(FormatErrc::Malformed, "not a robustness report");
    }
    if (j.at("schema_version").get<int>() != RobustReport::kSchemaVersion) {
      throw FormatError(FormatErrc::VersionMismatch, "unsupported report schema version");
    }
    RobustReport r;
    r.dataset = j.at("dataset").get<std::string>();
    r.model_id = j.at("model").get<std::string>();
    const auto& c = j.at("config");
    r.config.eps = c.at("eps").get<double>();
    r.config.alpha = c.at("alpha").get<double>();
    r.config.t_iter = c.at("t_iter").get<std::size_t>();
    r.config.fingerprint_mode = parse_fingerprint_mode(c.at("fingerprint").get<std::string>());
    r.config.confirm_on_match = c.at("confirm_on_match").get<bool>();
    r.config.clamp_to_domain = c.at("clamp_to_domain").get<bool>();
    r.config.seed = c.at("seed").get<std::uint64_t>();
    r.num_images = j.at("num_images").get<std::size_t>();
    r.clean_correct = j.at("clean_correct").get<std::size_t>();
    r.clean_accuracy = j.at("clean_accuracy").get<double>();
    r.baseline_iterations = j.at("baseline_iterations").get<std::uint64_t>();
    r.reduction_percent = get_opt<double>(j, "reduction_percent");
    for (const auto& m : j.at("modes")) {
      ModeSummary s;
      s.mode = parse_attack_mode(m.at("mode").get<std::string>());
      s.tricked = m.at("tricked").get<std::size_t>();
      s.tricked_any = m.at("tricked_any").get<std::size_t>();
      s.cycles = m.at("cycles").get<std::size_t>();
      s.errors = m.at("errors").get<std::size_t>();
      s.robust_accuracy = m.at("robust_accuracy").get<double>();
      s.robust_accuracy_best_iterate = m.at("robust_accuracy_best_iterate").get<double>();
      s.total_iterations = m.at("total_iterations").get<std::uint64_t>();
      s.reduction_percent = m.at("reduction_percent").get<double>();
      const auto& st = m.at("stats");
      s.stats = {group_from(st.at("tricked")), group_from(st.at("untricked")),
                 group_from(st.at("overall"))};
      if (m.contains("wall_seconds")) s.wall_seconds = m.at("wall_seconds").get<double>();
      r.modes.push_back(s.mode);
      r.summaries.push_back(std::move(s));
    }
    for (const auto& im : j.at("images")) {
      ImageRow row;
      row.index = im.at("index").get<std::size_t>();
      row.label = im.at("label").get<std::size_t>();
      row.clean_prediction = im.at("clean_prediction").get<std::size_t>();
      row.clean_correct = im.at("clean_correct").get<bool>();
      for (const auto& o : im.at("outcomes")) row.outcomes.push_back(row_from(o));
      if (row.outcomes.size() != r.modes.size()) {
        throw FormatError(FormatErrc::DimMismatch, "image row has wrong number of outcomes");
      }
      r.images.push_back(std::move(row));
    }
    if (r.images.size() != r.num_images) {
      throw FormatError(FormatErrc::DimMismatch, "image rows disagree with num_images");
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(FormatErrc::Malformed, e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrc::Malformed, e.what());
  }
}

void write_report(const RobustReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(FormatErrc::Io, "cannot open " + path.string() + " for writing");
  os << report_to_json(report);
  if (!os) throw FormatError(FormatErrc::Io, "write failed for " + path.string());
}

RobustReport read_report(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(FormatErrc::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return report_from_json(buf.str());
}

}  // namespace pgdcd
