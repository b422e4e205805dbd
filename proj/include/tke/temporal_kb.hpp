#pragma once

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace tke {

struct HorizonRange {
  int lo = 1900;
  int hi = 2028;
};

struct TemporalFact {
  std::string subject;
  std::string relation;
  std::string object;
  int t_start = 0;
  std::optional<int> t_end;  // absent = still valid

  int effective_end(const HorizonRange& horizon) const {
    return t_end.value_or(horizon.hi);
  }

  bool operator==(const TemporalFact&) const = default;
};

struct FactChain {
  std::string subject;
  std::string relation;
  std::vector<TemporalFact> facts;

  bool operator==(const FactChain&) const = default;
};

struct ParseIssue {
  int line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<TemporalFact> facts;
  std::vector<ParseIssue> issues;
};

namespace detail {

// Leading-integer year parse; sub-year suffixes ("2009-03", "2009.5") are
// truncated to the year.
inline std::optional<int> parse_year(const std::string& field) {
  const char* b = field.data();
  const char* e = b + field.size();
  int value = 0;
  auto [ptr, ec] = std::from_chars(b, e, value);
  if (ec != std::errc{} || ptr == b) return std::nullopt;
  return value;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

}  // namespace detail

// Tab-separated lines: subject, relation, object, t_start, [t_end].
// Malformed lines are recorded and skipped; parsing continues.
inline ParseResult parse_facts(std::istream& in) {
  ParseResult result;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = detail::split_tabs(line);
    if (fields.size() < 4 || fields.size() > 5) {
      result.issues.push_back({lineno, "expected 4 or 5 tab-separated fields, got " +
                                           std::to_string(fields.size())});
      continue;
    }
    TemporalFact fact;
    fact.subject = fields[0];
    fact.relation = fields[1];
    fact.object = fields[2];
    if (fact.subject.empty() || fact.relation.empty() || fact.object.empty()) {
      result.issues.push_back({lineno, "empty subject, relation, or object"});
      continue;
    }
    const auto ts = detail::parse_year(fields[3]);
    if (!ts) {
      result.issues.push_back({lineno, "non-integer t_start: " + fields[3]});
      continue;
    }
    fact.t_start = *ts;
    if (fields.size() == 5 && !fields[4].empty() && fields[4] != "-") {
      const auto tu = detail::parse_year(fields[4]);
      if (!tu) {
        result.issues.push_back({lineno, "non-integer t_end: " + fields[4]});
        continue;
      }
      if (*tu < fact.t_start) {
        result.issues.push_back({lineno, "t_end before t_start"});
        continue;
      }
      fact.t_end = *tu;
    }
    result.facts.push_back(std::move(fact));
  }
  return result;
}

// Midpoint year used by explicit-time questions and model-time location.
inline int midpoint_year(const TemporalFact& fact, const HorizonRange& horizon) {
  return (fact.t_start + fact.effective_end(horizon)) / 2;
}

struct ChainLogEntry {
  std::string subject;
  std::string relation;
  std::string action;  // dropped | clipped | closed | merged
  std::string detail;
};

struct BuildResult {
  std::vector<FactChain> chains;
  std::vector<ChainLogEntry> log;
};

namespace detail {

inline bool fact_order(const TemporalFact& a, const TemporalFact& b) {
  if (a.t_start != b.t_start) return a.t_start < b.t_start;
  return a.object < b.object;
}

inline std::string span_text(const TemporalFact& f) {
  return f.object + " [" + std::to_string(f.t_start) + ", " +
         (f.t_end ? std::to_string(*f.t_end) : "open") + "]";
}

}  // namespace detail

// Group facts by (subject, relation), then per group: drop inverted spans,
// clip to the horizon, merge duplicate objects with touching or overlapping
// spans, and resolve
// remaining overlaps by clipping the later fact's start (dropping it when the
// clip consumes its whole span). Open intervals other than the last are
// closed at the successor's start.
inline BuildResult build_chains(const std::vector<TemporalFact>& facts,
                                const HorizonRange& horizon = {}) {
  BuildResult result;
  std::map<std::pair<std::string, std::string>, std::vector<TemporalFact>> groups;
  for (const auto& f : facts) groups[{f.subject, f.relation}].push_back(f);

  for (auto& [key, group] : groups) {
    const auto& [subject, relation] = key;
    auto log = [&](const std::string& action, const std::string& detail) {
      result.log.push_back({subject, relation, action, detail});
    };

    std::vector<TemporalFact> clipped;
    for (auto f : group) {
      if (f.t_end && *f.t_end < f.t_start) {
        log("dropped", detail::span_text(f) + " inverted span");
        continue;
      }
      if (f.t_start > horizon.hi || (f.t_end && *f.t_end < horizon.lo)) {
        log("dropped", detail::span_text(f) + " outside horizon");
        continue;
      }
      if (f.t_start < horizon.lo) {
        log("clipped", detail::span_text(f) + " start raised to horizon");
        f.t_start = horizon.lo;
      }
      if (f.t_end && *f.t_end > horizon.hi) {
        log("clipped", detail::span_text(f) + " end lowered to horizon");
        f.t_end = horizon.hi;
      }
      clipped.push_back(std::move(f));
    }

    // Merge same-object spans that touch or overlap.
    std::map<std::string, std::vector<TemporalFact>> by_object;
    for (auto& f : clipped) by_object[f.object].push_back(f);
    std::vector<TemporalFact> merged;
    for (auto& [object, spans] : by_object) {
      std::sort(spans.begin(), spans.end(), detail::fact_order);
      for (auto& f : spans) {
        if (merged.empty() || merged.back().object != object) {
          merged.push_back(f);
          continue;
        }
        auto& prev = merged.back();
        const bool prev_open = !prev.t_end.has_value();
        if (prev_open || f.t_start <= *prev.t_end) {
          if (!prev_open) {
            if (!f.t_end)
              prev.t_end.reset();
            else
              prev.t_end = std::max(*prev.t_end, *f.t_end);
          }
          log("merged", detail::span_text(f) + " into " + detail::span_text(prev));
        } else {
          merged.push_back(f);
        }
      }
    }

    std::sort(merged.begin(), merged.end(), detail::fact_order);

    // Worklist ordered by current start. A clipped fact re-queues at its new
    // start, since the clip may move it past facts that sorted after it.
    std::vector<TemporalFact> chain;
    std::vector<TemporalFact> work = std::move(merged);
    while (!work.empty()) {
      TemporalFact f = std::move(work.front());
      work.erase(work.begin());
      if (chain.empty()) {
        chain.push_back(std::move(f));
        continue;
      }
      auto& prev = chain.back();
      if (!prev.t_end) {
        log("closed", detail::span_text(prev) + " at " + std::to_string(f.t_start));
        prev.t_end = f.t_start;
      }
      if (f.t_start < *prev.t_end) {
        log("clipped", detail::span_text(f) + " start raised to " +
                           std::to_string(*prev.t_end));
        f.t_start = *prev.t_end;
        if (f.t_end && f.t_start >= *f.t_end) {
          log("dropped", detail::span_text(f) + " contained in predecessor");
          continue;
        }
        work.insert(
            std::upper_bound(work.begin(), work.end(), f, detail::fact_order),
            std::move(f));
        continue;
      }
      chain.push_back(std::move(f));
    }

    if (!chain.empty()) {
      FactChain out;
      out.subject = subject;
      out.relation = relation;
      out.facts = std::move(chain);
      result.chains.push_back(std::move(out));
    }
  }
  return result;
}

inline std::vector<std::string> validate_chain(const FactChain& chain) {
  std::vector<std::string> violations;
  if (chain.subject.empty()) violations.push_back("empty subject");
  if (chain.relation.empty()) violations.push_back("empty relation");
  for (std::size_t i = 0; i < chain.facts.size(); ++i) {
    const auto& f = chain.facts[i];
    const std::string at = " at index " + std::to_string(i);
    if (f.subject != chain.subject) violations.push_back("subject mismatch" + at);
    if (f.relation != chain.relation) violations.push_back("relation mismatch" + at);
    if (f.object.empty()) violations.push_back("empty object" + at);
    if (f.t_end && *f.t_end < f.t_start) violations.push_back("inverted span" + at);
    if (i + 1 < chain.facts.size()) {
      const auto& g = chain.facts[i + 1];
      if (g.t_start < f.t_start) violations.push_back("not sorted" + at);
      if (!f.t_end)
        violations.push_back("open interval not last" + at);
      else if (*f.t_end > g.t_start)
        violations.push_back("overlap" + at);
    }
  }
  return violations;
}

inline std::vector<TemporalFact> flatten(const std::vector<FactChain>& chains) {
  std::vector<TemporalFact> out;
  for (const auto& c : chains)
    out.insert(out.end(), c.facts.begin(), c.facts.end());
  return out;
}

inline nlohmann::ordered_json fact_to_json(const TemporalFact& f) {
  nlohmann::ordered_json j;
  j["object"] = f.object;
  j["t_start"] = f.t_start;
  if (f.t_end)
    j["t_end"] = *f.t_end;
  else
    j["t_end"] = nullptr;
  return j;
}

inline nlohmann::ordered_json chains_to_json(const std::vector<FactChain>& chains) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& c : chains) {
    nlohmann::ordered_json j;
    j["subject"] = c.subject;
    j["relation"] = c.relation;
    j["facts"] = nlohmann::ordered_json::array();
    for (const auto& f : c.facts) j["facts"].push_back(fact_to_json(f));
    arr.push_back(std::move(j));
  }
  return arr;
}

inline TemporalFact fact_from_json(const nlohmann::json& j,
                                   const std::string& subject,
                                   const std::string& relation) {
  TemporalFact f;
  f.subject = subject;
  f.relation = relation;
  f.object = j.at("object").get<std::string>();
  f.t_start = j.at("t_start").get<int>();
  if (j.contains("t_end") && !j.at("t_end").is_null())
    f.t_end = j.at("t_end").get<int>();
  return f;
}

inline std::vector<FactChain> chains_from_json(const nlohmann::json& arr) {
  std::vector<FactChain> chains;
  for (const auto& j : arr) {
    FactChain c;
    c.subject = j.at("subject").get<std::string>();
    c.relation = j.at("relation").get<std::string>();
    for (const auto& fj : j.at("facts"))
      c.facts.push_back(fact_from_json(fj, c.subject, c.relation));
    chains.push_back(std::move(c));
  }
  return chains;
}

}
