#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace tke {

struct TimeRef {
  enum class Kind { year, current, previous };
  Kind kind = Kind::current;
  int year = 0;

  static TimeRef of_year(int y) { return {Kind::year, y}; }
  static TimeRef current() { return {Kind::current, 0}; }
  static TimeRef previous() { return {Kind::previous, 0}; }

  bool operator==(const TimeRef&) const = default;
};

struct StructuredQuery {
  std::string subject;
  std::string relation;
  TimeRef time_ref;

  bool operator==(const StructuredQuery&) const = default;
};

inline nlohmann::ordered_json time_ref_to_json(const TimeRef& t) {
  nlohmann::ordered_json j;
  switch (t.kind) {
    case TimeRef::Kind::year:
      j["kind"] = "year";
      j["year"] = t.year;
      break;
    case TimeRef::Kind::current:
      j["kind"] = "current";
      break;
    case TimeRef::Kind::previous:
      j["kind"] = "previous";
      break;
  }
  return j;
}

inline TimeRef time_ref_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "year") return TimeRef::of_year(j.at("year").get<int>());
  if (kind == "current") return TimeRef::current();
  if (kind == "previous") return TimeRef::previous();
  throw std::runtime_error("unknown time_ref kind: " + kind);
}

inline nlohmann::ordered_json query_to_json(const StructuredQuery& q) {
  nlohmann::ordered_json j;
  j["s"] = q.subject;
  j["r"] = q.relation;
  j["time_ref"] = time_ref_to_json(q.time_ref);
  return j;
}

inline StructuredQuery query_from_json(const nlohmann::json& j) {
  StructuredQuery q;
  q.subject = j.at("s").get<std::string>();
  q.relation = j.at("r").get<std::string>();
  q.time_ref = time_ref_from_json(j.at("time_ref"));
  return q;
}

}
