#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "tke/temporal_kb.hpp"

namespace tke {

struct FactSpan {
  std::string object;
  int t_start = 0;
  std::optional<int> t_end;

  bool operator==(const FactSpan&) const = default;
};

// One knowledge edit: replace the old fact with the new one, or extend the
// old fact's span (same object, same start, later end).
struct EditOp {
  std::string subject;
  std::string relation;
  FactSpan old_fact;
  FactSpan new_fact;

  bool operator==(const EditOp&) const = default;
};

inline TemporalFact span_as_fact(const EditOp& op, const FactSpan& span) {
  return {op.subject, op.relation, span.object, span.t_start, span.t_end};
}

inline bool is_extending(const EditOp& op, const HorizonRange& horizon) {
  if (op.old_fact.object != op.new_fact.object) return false;
  if (op.old_fact.t_start != op.new_fact.t_start) return false;
  const int old_end = op.old_fact.t_end.value_or(horizon.hi);
  const int new_end = op.new_fact.t_end.value_or(horizon.hi);
  return new_end > old_end;
}

inline std::optional<std::string> validate_edit_op(const EditOp& op,
                                                   const HorizonRange& horizon) {
  if (is_extending(op, horizon)) return std::nullopt;
  if (!op.old_fact.t_end)
    return "old fact is open-ended but the edit is not extending";
  if (*op.old_fact.t_end > op.new_fact.t_start)
    return "new fact starts before the old fact ends";
  return std::nullopt;
}

inline nlohmann::ordered_json span_to_json(const FactSpan& s) {
  nlohmann::ordered_json j;
  j["o"] = s.object;
  j["ts"] = s.t_start;
  if (s.t_end)
    j["tu"] = *s.t_end;
  else
    j["tu"] = nullptr;
  return j;
}

inline FactSpan span_from_json(const nlohmann::json& j) {
  FactSpan s;
  s.object = j.at("o").get<std::string>();
  s.t_start = j.at("ts").get<int>();
  if (j.contains("tu") && !j.at("tu").is_null()) s.t_end = j.at("tu").get<int>();
  return s;
}

inline nlohmann::ordered_json edit_op_to_json(const EditOp& op) {
  nlohmann::ordered_json j;
  j["old"] = span_to_json(op.old_fact);
  j["new"] = span_to_json(op.new_fact);
  return j;
}

inline EditOp edit_op_from_json(const nlohmann::json& j, const std::string& subject,
                                const std::string& relation) {
  EditOp op;
  op.subject = subject;
  op.relation = relation;
  op.old_fact = span_from_json(j.at("old"));
  op.new_fact = span_from_json(j.at("new"));
  return op;
}

}
