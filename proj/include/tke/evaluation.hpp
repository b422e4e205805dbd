#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tke/alias.hpp"
#include "tke/bench_builder.hpp"
#include "tke/editors.hpp"
#include "tke/model.hpp"
#include "tke/rng.hpp"

namespace tke {

inline const std::vector<std::string>& metric_order() {
  static const std::vector<std::string> order = {"CES",  "CES-P", "CRS",
                                                 "HES",  "HRS",   "HES*"};
  return order;
}

struct ClassCounts {
  long asked = 0;
  long correct = 0;
};

struct RecordEval {
  std::map<std::string, ClassCounts> by_class;
  std::vector<std::map<std::string, ClassCounts>> per_edit;
  EditLog log;
  long query_errors = 0;
};

inline bool answer_matches(const std::string& prediction, const QAItem& item) {
  return std::binary_search(item.aliases.begin(), item.aliases.end(),
                            normalize_answer(prediction));
}

inline void score_item(const LamModel& model, const QAItem& item,
                       const std::string& bucket, RecordEval& ev,
                       std::map<std::string, ClassCounts>* edit_bucket) {
  bool correct = false;
  try {
    correct = answer_matches(model.query(item.query).object, item);
  } catch (const std::exception&) {
    ++ev.query_errors;
  }
  auto& c = ev.by_class[bucket];
  ++c.asked;
  if (correct) ++c.correct;
  if (edit_bucket) {
    auto& pc = (*edit_bucket)[bucket];
    ++pc.asked;
    if (correct) ++pc.correct;
  }
}

// Apply a record's edits step by step against a private copy of the base
// model, scoring each step's question set right after its edit lands. ME
// records end with the historical sweep scored as HES*.
inline RecordEval eval_record(const LamModel& base, const BenchRecord& rec,
                              const EditorConfig& cfg,
                              const AliasTable& aliases) {
  LamModel model = base;
  RecordEval ev;
  EditPlan plan = make_edit_plan(model, rec.edits, cfg, aliases);
  if (plan.steps.size() != rec.questions_per_edit.size())
    throw std::runtime_error("edit plan does not match question sets for " +
                             rec.chain_id);
  ev.per_edit.resize(plan.steps.size());
  for (std::size_t k = 0; k < plan.steps.size(); ++k) {
    apply_step(model, plan.steps[k], cfg, ev.log);
    for (const auto& item : rec.questions_per_edit[k])
      score_item(model, item, item.question_class, ev, &ev.per_edit[k]);
  }
  for (const auto& item : rec.final_historical_questions)
    score_item(model, item, "HES*", ev, nullptr);
  return ev;
}

struct MetricsReport {
  std::string dataset_kind;
  std::map<std::string, double> metrics;
  std::map<std::string, ClassCounts> counts;
  std::vector<std::map<std::string, double>> per_edit_breakdown;
  std::string config_fingerprint;
  std::uint64_t seed = 0;
  std::uint64_t edit_log_hash = 0;
  long query_errors = 0;
  long records = 0;
};

// Micro-average over every asked question; classes with zero asked are
// absent rather than zero.
inline MetricsReport aggregate(const std::string& dataset_kind,
                               const std::vector<RecordEval>& evals,
                               const std::string& config_fingerprint,
                               std::uint64_t seed) {
  MetricsReport rep;
  rep.dataset_kind = dataset_kind;
  rep.config_fingerprint = config_fingerprint;
  rep.seed = seed;
  rep.records = long(evals.size());

  std::size_t max_edits = 0;
  std::string log_blob;
  for (const auto& ev : evals) {
    for (const auto& [cls, c] : ev.by_class) {
      rep.counts[cls].asked += c.asked;
      rep.counts[cls].correct += c.correct;
    }
    max_edits = std::max(max_edits, ev.per_edit.size());
    rep.query_errors += ev.query_errors;
    log_blob += ev.log.to_jsonl();
  }
  rep.edit_log_hash = fnv1a64(log_blob);

  if (dataset_kind == "EE") {
    for (auto it = rep.counts.begin(); it != rep.counts.end();)
      if (it->first != "CES" && it->first != "CES-P" && it->first != "CRS")
        it = rep.counts.erase(it);
      else
        ++it;
  }
  for (const auto& [cls, c] : rep.counts)
    if (c.asked > 0) rep.metrics[cls] = 100.0 * double(c.correct) / double(c.asked);

  rep.per_edit_breakdown.resize(max_edits);
  for (std::size_t k = 0; k < max_edits; ++k) {
    std::map<std::string, ClassCounts> acc;
    for (const auto& ev : evals)
      if (k < ev.per_edit.size())
        for (const auto& [cls, c] : ev.per_edit[k]) {
          acc[cls].asked += c.asked;
          acc[cls].correct += c.correct;
        }
    for (const auto& [cls, c] : acc)
      if (c.asked > 0)
        rep.per_edit_breakdown[k][cls] =
            100.0 * double(c.correct) / double(c.asked);
  }
  return rep;
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

inline nlohmann::ordered_json report_to_json(const MetricsReport& rep) {
  nlohmann::ordered_json j;
  j["dataset_kind"] = rep.dataset_kind;
  j["records"] = rep.records;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& cls : metric_order())
    if (rep.metrics.count(cls)) j["metrics"][cls] = rep.metrics.at(cls);
  j["counts"] = nlohmann::ordered_json::object();
  for (const auto& cls : metric_order())
    if (rep.counts.count(cls))
      j["counts"][cls] = {{"asked", rep.counts.at(cls).asked},
                          {"correct", rep.counts.at(cls).correct}};
  j["per_edit_breakdown"] = nlohmann::ordered_json::array();
  for (const auto& step : rep.per_edit_breakdown) {
    nlohmann::ordered_json s = nlohmann::ordered_json::object();
    for (const auto& cls : metric_order())
      if (step.count(cls)) s[cls] = step.at(cls);
    j["per_edit_breakdown"].push_back(std::move(s));
  }
  j["query_errors"] = rep.query_errors;
  j["edit_log_hash"] = hash_hex(rep.edit_log_hash);
  j["config_fingerprint"] = rep.config_fingerprint;
  j["seed"] = rep.seed;
  return j;
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport rep;
  rep.dataset_kind = j.at("dataset_kind").get<std::string>();
  rep.records = j.value("records", 0L);
  for (const auto& [cls, v] : j.at("metrics").items())
    rep.metrics[cls] = v.get<double>();
  for (const auto& [cls, v] : j.at("counts").items())
    rep.counts[cls] = {v.at("asked").get<long>(), v.at("correct").get<long>()};
  for (const auto& step : j.at("per_edit_breakdown")) {
    std::map<std::string, double> s;
    for (const auto& [cls, v] : step.items()) s[cls] = v.get<double>();
    rep.per_edit_breakdown.push_back(std::move(s));
  }
  rep.query_errors = j.value("query_errors", 0L);
  rep.edit_log_hash =
      std::stoull(j.at("edit_log_hash").get<std::string>(), nullptr, 16);
  rep.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  rep.seed = j.at("seed").get<std::uint64_t>();
  return rep;
}

inline std::string format_metric(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << v;
  return os.str();
}

inline std::string report_markdown(const MetricsReport& rep) {
  std::ostringstream os;
  os << "| dataset |";
  for (const auto& cls : metric_order())
    if (rep.metrics.count(cls)) os << " " << cls << " |";
  os << "\n|---|";
  for (const auto& cls : metric_order())
    if (rep.metrics.count(cls)) os << "---|";
  os << "\n| " << rep.dataset_kind << " |";
  for (const auto& cls : metric_order())
    if (rep.metrics.count(cls))
      os << " " << format_metric(rep.metrics.at(cls)) << " |";
  os << "\n";
  return os.str();
}

struct CompareResult {
  nlohmann::ordered_json json;
  std::string markdown;
};

// Signed metric deltas (enhanced minus base) over two reports on the same
// dataset kind.
inline CompareResult compare_reports(const MetricsReport& base,
                                     const MetricsReport& enhanced) {
  if (base.dataset_kind != enhanced.dataset_kind)
    throw std::runtime_error("cannot compare reports across dataset kinds (" +
                             base.dataset_kind + " vs " +
                             enhanced.dataset_kind + ")");
  CompareResult out;
  out.json["dataset_kind"] = base.dataset_kind;
  out.json["delta"] = nlohmann::ordered_json::object();
  std::ostringstream md;
  md << "| metric | base | enhanced | delta |\n|---|---|---|---|\n";
  for (const auto& cls : metric_order()) {
    const bool in_base = base.metrics.count(cls) > 0;
    const bool in_enh = enhanced.metrics.count(cls) > 0;
    if (!in_base && !in_enh) continue;
    if (in_base && in_enh) {
      const double d = enhanced.metrics.at(cls) - base.metrics.at(cls);
      out.json["delta"][cls] = d;
      md << "| " << cls << " | " << format_metric(base.metrics.at(cls))
         << " | " << format_metric(enhanced.metrics.at(cls)) << " | "
         << (d >= 0 ? "+" : "") << format_metric(d) << " |\n";
    } else {
      out.json["delta"][cls] = nullptr;
      md << "| " << cls << " | "
         << (in_base ? format_metric(base.metrics.at(cls)) : "-") << " | "
         << (in_enh ? format_metric(enhanced.metrics.at(cls)) : "-")
         << " | - |\n";
    }
  }
  out.markdown = md.str();
  return out;
}

}
