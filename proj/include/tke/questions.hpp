#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tke/alias.hpp"
#include "tke/query.hpp"
#include "tke/temporal_kb.hpp"

namespace tke {

struct QuestionTemplate {
  std::string relation;
  enum class Mode { explicit_time, relative_current, relative_previous };
  Mode mode = Mode::explicit_time;
  int variant = 0;
  std::string pattern;  // slots: {s}, {o}, {ts}, {tu}
};

inline QuestionTemplate::Mode template_mode_from_string(const std::string& s) {
  if (s == "explicit") return QuestionTemplate::Mode::explicit_time;
  if (s == "relative_current") return QuestionTemplate::Mode::relative_current;
  if (s == "relative_previous") return QuestionTemplate::Mode::relative_previous;
  throw std::runtime_error("unknown template mode: " + s);
}

inline const char* template_mode_name(QuestionTemplate::Mode m) {
  switch (m) {
    case QuestionTemplate::Mode::explicit_time: return "explicit";
    case QuestionTemplate::Mode::relative_current: return "relative_current";
    case QuestionTemplate::Mode::relative_previous: return "relative_previous";
  }
  return "unknown";
}

class TemplatePack {
 public:
  // Lines: relation <TAB> mode <TAB> variant <TAB> pattern. '#' comments.
  void load(std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> fields;
      std::size_t pos = 0;
      for (int i = 0; i < 3; ++i) {
        const auto tab = line.find('\t', pos);
        if (tab == std::string::npos)
          throw std::runtime_error("template pack line " + std::to_string(lineno) +
                                   ": expected 4 tab-separated fields");
        fields.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
      }
      fields.push_back(line.substr(pos));
      QuestionTemplate t;
      t.relation = fields[0];
      t.mode = template_mode_from_string(fields[1]);
      t.variant = std::stoi(fields[2]);
      t.pattern = fields[3];
      validate_pattern(t, lineno);
      templates_[{t.relation, t.mode}].push_back(t);
    }
    for (auto& [key, list] : templates_)
      std::sort(list.begin(), list.end(),
                [](const auto& a, const auto& b) { return a.variant < b.variant; });
    validate_coverage();
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open template pack: " + path);
    load(in);
  }

  const std::vector<QuestionTemplate>& templates_for(
      const std::string& relation, QuestionTemplate::Mode mode) const {
    auto it = templates_.find({relation, mode});
    if (it == templates_.end())
      throw std::runtime_error("no templates for relation " + relation +
                               " mode " + template_mode_name(mode));
    return it->second;
  }

  bool covers(const std::string& relation) const {
    return templates_.count({relation, QuestionTemplate::Mode::explicit_time}) > 0;
  }

  std::vector<std::string> relations() const {
    std::vector<std::string> out;
    for (const auto& [key, list] : templates_)
      if (key.second == QuestionTemplate::Mode::explicit_time)
        out.push_back(key.first);
    return out;
  }

 private:
  void validate_pattern(const QuestionTemplate& t, int lineno) const {
    const bool has_time = t.pattern.find("{ts}") != std::string::npos ||
                          t.pattern.find("{tu}") != std::string::npos;
    if (t.mode == QuestionTemplate::Mode::explicit_time && !has_time)
      throw std::runtime_error("template pack line " + std::to_string(lineno) +
                               ": explicit pattern lacks {ts}/{tu}");
    if (t.mode != QuestionTemplate::Mode::explicit_time && has_time)
      throw std::runtime_error("template pack line " + std::to_string(lineno) +
                               ": relative pattern must not use {ts}/{tu}");
  }

  void validate_coverage() const {
    for (const auto& [key, list] : templates_) {
      const auto& relation = key.first;
      for (auto mode : {QuestionTemplate::Mode::explicit_time,
                        QuestionTemplate::Mode::relative_current,
                        QuestionTemplate::Mode::relative_previous})
        if (!templates_.count({relation, mode}))
          throw std::runtime_error("relation " + relation + " missing mode " +
                                   template_mode_name(mode));
      const auto& exp =
          templates_.at({relation, QuestionTemplate::Mode::explicit_time});
      const bool has_paraphrase =
          std::any_of(exp.begin(), exp.end(),
                      [](const auto& t) { return t.variant >= 1; });
      if (!has_paraphrase)
        throw std::runtime_error("relation " + relation +
                                 " missing explicit paraphrase variant");
    }
  }

  std::map<std::pair<std::string, QuestionTemplate::Mode>,
           std::vector<QuestionTemplate>>
      templates_;
};

struct QAItem {
  std::string text;
  StructuredQuery query;
  std::string gold;
  std::vector<std::string> aliases;
  std::string knowledge_tag;    // current | historical
  std::string question_class;   // CES | CES-P | CRS | HES | HRS
  int variant = 0;              // 0 = class-canonical item, ≥1 = paraphrase
};

// The class is a pure function of (knowledge_tag, time_ref kind, variant).
inline std::string recompute_question_class(const QAItem& item) {
  if (item.knowledge_tag == "historical")
    return item.query.time_ref.kind == TimeRef::Kind::previous ? "HRS" : "HES";
  switch (item.query.time_ref.kind) {
    case TimeRef::Kind::year: return item.variant == 0 ? "CES" : "CES-P";
    case TimeRef::Kind::current: return "CRS";
    case TimeRef::Kind::previous: return "HRS";
  }
  return "";
}

namespace detail {

inline void replace_all(std::string& text, const std::string& slot,
                        const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
}

}  // namespace detail

// Fill the template's slots from the fact. render_span overrides the years
// shown in the text; query_year overrides the explicit query's year (both
// used by extending edits, which ask about the newly covered region).
inline QAItem render_question(const QuestionTemplate& tmpl,
                              const TemporalFact& fact,
                              const HorizonRange& horizon,
                              std::optional<std::pair<int, int>> render_span = {},
                              std::optional<int> query_year = {}) {
  QAItem item;
  std::string text = tmpl.pattern;
  const int ts = render_span ? render_span->first : fact.t_start;
  const int tu = render_span ? render_span->second : fact.effective_end(horizon);
  detail::replace_all(text, "{s}", display_form(fact.subject));
  detail::replace_all(text, "{o}", display_form(fact.object));
  detail::replace_all(text, "{ts}", std::to_string(ts));
  detail::replace_all(text, "{tu}", std::to_string(tu));
  if (text.find('{') != std::string::npos)
    throw std::runtime_error("unfilled slot in rendered question: " + text);
  item.text = std::move(text);
  item.query.subject = fact.subject;
  item.query.relation = fact.relation;
  switch (tmpl.mode) {
    case QuestionTemplate::Mode::explicit_time:
      item.query.time_ref =
          TimeRef::of_year(query_year ? *query_year : midpoint_year(fact, horizon));
      break;
    case QuestionTemplate::Mode::relative_current:
      item.query.time_ref = TimeRef::current();
      break;
    case QuestionTemplate::Mode::relative_previous:
      item.query.time_ref = TimeRef::previous();
      break;
  }
  item.gold = fact.object;
  return item;
}

struct QuestionSetOptions {
  bool current_only = false;
  std::optional<std::pair<int, int>> render_span;  // extending: {tu_old, tu_new}
  std::optional<int> query_year;                   // extending: region midpoint
};

namespace detail {

inline const QuestionTemplate& pick_variant(
    const std::vector<QuestionTemplate>& templates, int preferred) {
  for (const auto& t : templates)
    if (t.variant == preferred) return t;
  return templates.front();
}

inline void finish(QAItem& item, const AliasTable& aliases,
                   const std::string& tag, const std::string& cls, int variant) {
  item.knowledge_tag = tag;
  item.question_class = cls;
  item.variant = variant;
  const auto accepted = aliases.accepted(item.gold);
  item.aliases.assign(accepted.begin(), accepted.end());
}

}  // namespace detail

// Current questions (CES canonical, CES-P paraphrases, CRS) about the fact at
// edit_index, plus historical questions (HES, HRS) about its predecessor.
inline std::vector<QAItem> make_question_set(const FactChain& chain,
                                             int edit_index,
                                             const TemplatePack& pack,
                                             const AliasTable& aliases,
                                             const HorizonRange& horizon,
                                             const QuestionSetOptions& opts = {}) {
  if (edit_index < 0 || edit_index >= int(chain.facts.size()))
    throw std::runtime_error("edit_index out of range");
  if (!opts.current_only && edit_index < 1)
    throw std::runtime_error(
        "edit_index must have a predecessor unless current_only is set");
  const auto& relation = chain.relation;
  const auto& current = chain.facts[edit_index];
  const auto& explicit_templates =
      pack.templates_for(relation, QuestionTemplate::Mode::explicit_time);

  std::vector<QAItem> items;

  const int canonical_variant = opts.render_span ? 2 : 0;
  const auto& canonical =
      detail::pick_variant(explicit_templates, canonical_variant);
  QAItem ces = render_question(canonical, current, horizon, opts.render_span,
                               opts.query_year);
  detail::finish(ces, aliases, "current", "CES", 0);
  items.push_back(ces);

  int paraphrase = 1;
  for (const auto& t : explicit_templates) {
    if (t.variant == canonical.variant) continue;
    QAItem p = render_question(t, current, horizon, opts.render_span,
                               opts.query_year);
    p.query = ces.query;  // paraphrases share the canonical query
    detail::finish(p, aliases, "current", "CES-P", paraphrase++);
    items.push_back(p);
  }

  const auto& crs_templates =
      pack.templates_for(relation, QuestionTemplate::Mode::relative_current);
  QAItem crs = render_question(crs_templates.front(), current, horizon);
  detail::finish(crs, aliases, "current", "CRS", 0);
  items.push_back(crs);

  if (!opts.current_only) {
    const auto& previous = chain.facts[edit_index - 1];
    QAItem hes = render_question(detail::pick_variant(explicit_templates, 1),
                                 previous, horizon);
    detail::finish(hes, aliases, "historical", "HES", 0);
    items.push_back(hes);

    const auto& prev_templates =
        pack.templates_for(relation, QuestionTemplate::Mode::relative_previous);
    QAItem hrs = render_question(prev_templates.front(), previous, horizon);
    detail::finish(hrs, aliases, "historical", "HRS", 0);
    items.push_back(hrs);
  }
  return items;
}

// Post-sequence historical question about one superseded fact (HES form).
inline QAItem make_historical_question(const FactChain& chain, int fact_index,
                                       const TemplatePack& pack,
                                       const AliasTable& aliases,
                                       const HorizonRange& horizon) {
  const auto& templates =
      pack.templates_for(chain.relation, QuestionTemplate::Mode::explicit_time);
  QAItem item = render_question(detail::pick_variant(templates, 1),
                                chain.facts.at(fact_index), horizon);
  detail::finish(item, aliases, "historical", "HES", 0);
  return item;
}

inline nlohmann::ordered_json qa_to_json(const QAItem& item) {
  nlohmann::ordered_json j;
  j["text"] = item.text;
  j["query"] = query_to_json(item.query);
  j["gold"] = item.gold;
  j["aliases"] = item.aliases;
  j["knowledge_tag"] = item.knowledge_tag;
  j["question_class"] = item.question_class;
  j["variant"] = item.variant;
  return j;
}

inline QAItem qa_from_json(const nlohmann::json& j) {
  QAItem item;
  item.text = j.at("text").get<std::string>();
  item.query = query_from_json(j.at("query"));
  item.gold = j.at("gold").get<std::string>();
  item.aliases = j.at("aliases").get<std::vector<std::string>>();
  item.knowledge_tag = j.at("knowledge_tag").get<std::string>();
  item.question_class = j.at("question_class").get<std::string>();
  item.variant = j.value("variant", 0);
  return item;
}

}
