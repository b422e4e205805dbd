#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tke/alias.hpp"
#include "tke/edit_op.hpp"
#include "tke/editors.hpp"
#include "tke/questions.hpp"
#include "tke/rng.hpp"
#include "tke/temporal_kb.hpp"

namespace tke {

struct BenchRecord {
  std::string chain_id;
  std::string kind;  // SE | ME | EE
  std::string subject;
  std::string relation;
  std::vector<EditOp> edits;
  std::vector<std::vector<QAItem>> questions_per_edit;
  std::vector<QAItem> final_historical_questions;
};

inline std::string chain_id_of(const FactChain& chain) {
  return chain.subject + "::" + chain.relation;
}

inline FactChain re_root(const FactChain& chain, int index) {
  FactChain out;
  out.subject = chain.subject;
  out.relation = chain.relation;
  out.facts.assign(chain.facts.begin() + index, chain.facts.end());
  return out;
}

// Counterfactual future fact: starts where the chain ends, lasts 2..6 years
// capped at the horizon, object drawn from the relation's pool but absent
// from the chain.
inline TemporalFact sample_fake_fact(const FactChain& chain,
                                     const std::vector<std::string>& pool,
                                     Rng& rng, const HorizonRange& horizon) {
  std::set<std::string> used;
  for (const auto& f : chain.facts) used.insert(f.object);
  std::vector<std::string> candidates;
  for (const auto& o : pool)
    if (!used.count(o)) candidates.push_back(o);
  if (candidates.empty())
    throw std::runtime_error("object pool exhausted for relation " +
                             chain.relation);
  TemporalFact fact;
  fact.subject = chain.subject;
  fact.relation = chain.relation;
  fact.object = candidates[rng.uniform_int(0, int(candidates.size()) - 1)];
  fact.t_start = chain.facts.back().effective_end(horizon);
  fact.t_end = std::min(fact.t_start + rng.uniform_int(2, 6), horizon.hi);
  return fact;
}

inline void augment_with_fake(FactChain& chain,
                              const std::vector<std::string>& pool, Rng& rng,
                              const HorizonRange& horizon) {
  TemporalFact fake = sample_fake_fact(chain, pool, rng, horizon);
  if (!chain.facts.back().t_end) chain.facts.back().t_end = fake.t_start;
  chain.facts.push_back(std::move(fake));
}

inline EditOp make_edit_op(const FactChain& chain, int from, int to) {
  EditOp op;
  op.subject = chain.subject;
  op.relation = chain.relation;
  const auto& a = chain.facts[from];
  const auto& b = chain.facts[to];
  op.old_fact = {a.object, a.t_start, a.t_end};
  op.new_fact = {b.object, b.t_start, b.t_end};
  return op;
}

// SE: the chain's first two facts form the single edit.
inline std::optional<BenchRecord> build_se(const FactChain& chain,
                                           const TemplatePack& pack,
                                           const AliasTable& aliases,
                                           const HorizonRange& horizon) {
  if (chain.facts.size() < 2) return std::nullopt;
  BenchRecord rec;
  rec.chain_id = chain_id_of(chain);
  rec.kind = "SE";
  rec.subject = chain.subject;
  rec.relation = chain.relation;
  rec.edits.push_back(make_edit_op(chain, 0, 1));
  rec.questions_per_edit.push_back(
      make_question_set(chain, 1, pack, aliases, horizon));
  return rec;
}

// ME: every consecutive fact pair becomes an edit; the final historical
// questions revisit every superseded fact.
inline std::optional<BenchRecord> build_me(const FactChain& chain,
                                           const TemplatePack& pack,
                                           const AliasTable& aliases,
                                           const HorizonRange& horizon) {
  const int n = int(chain.facts.size());
  if (n < 3) return std::nullopt;
  BenchRecord rec;
  rec.chain_id = chain_id_of(chain);
  rec.kind = "ME";
  rec.subject = chain.subject;
  rec.relation = chain.relation;
  for (int k = 0; k + 1 < n; ++k) {
    rec.edits.push_back(make_edit_op(chain, k, k + 1));
    rec.questions_per_edit.push_back(
        make_question_set(chain, k + 1, pack, aliases, horizon));
  }
  for (int i = 0; i + 1 < n; ++i)
    rec.final_historical_questions.push_back(
        make_historical_question(chain, i, pack, aliases, horizon));
  return rec;
}

// EE: extend the first fact's span; questions ask about the newly covered
// region only.
inline std::optional<BenchRecord> build_ee(const FactChain& chain,
                                           const TemplatePack& pack,
                                           const AliasTable& aliases,
                                           const HorizonRange& horizon,
                                           int extension) {
  if (extension <= 0)
    throw std::runtime_error("extension must be a positive year count");
  if (chain.facts.empty()) return std::nullopt;
  const auto& f0 = chain.facts.front();
  const int old_end = f0.effective_end(horizon);
  const int new_end = std::min(old_end + extension, horizon.hi);
  if (new_end <= old_end) return std::nullopt;

  BenchRecord rec;
  rec.chain_id = chain_id_of(chain);
  rec.kind = "EE";
  rec.subject = chain.subject;
  rec.relation = chain.relation;
  EditOp op;
  op.subject = chain.subject;
  op.relation = chain.relation;
  op.old_fact = {f0.object, f0.t_start, f0.t_end};
  op.new_fact = {f0.object, f0.t_start, new_end};
  rec.edits.push_back(op);

  FactChain extended;
  extended.subject = chain.subject;
  extended.relation = chain.relation;
  extended.facts.push_back({chain.subject, chain.relation, f0.object,
                            f0.t_start, new_end});
  QuestionSetOptions opts;
  opts.current_only = true;
  opts.render_span = {{old_end, new_end}};
  opts.query_year = (old_end + 1 + new_end) / 2;
  rec.questions_per_edit.push_back(
      make_question_set(extended, 0, pack, aliases, horizon, opts));
  return rec;
}

struct BuildOptions {
  bool fake_facts = true;
  int extension_years = 1;
  HorizonRange horizon{};
  std::uint64_t seed = 42;
};

struct BuildOutput {
  std::vector<BenchRecord> se;
  std::vector<BenchRecord> me;
  std::vector<BenchRecord> ee;
  std::vector<std::string> skipped;
};

// Per-relation object pools: everything observed under the relation (the
// fake-fact candidate class).
inline std::map<std::string, std::vector<std::string>> object_pools(
    const std::vector<FactChain>& chains) {
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& c : chains)
    for (const auto& f : c.facts) seen[c.relation].insert(f.object);
  std::map<std::string, std::vector<std::string>> pools;
  for (const auto& [rel, objs] : seen)
    pools[rel].assign(objs.begin(), objs.end());
  return pools;
}

// Root every chain at its model-time fact, optionally append a fake future
// fact, and emit the three datasets.
inline BuildOutput build_all(const std::vector<FactChain>& chains,
                             const LamModel* model, const TemplatePack& pack,
                             const AliasTable& aliases,
                             const BuildOptions& opts) {
  BuildOutput out;
  const auto pools = object_pools(chains);
  for (const auto& chain : chains) {
    const std::string id = chain_id_of(chain);
    std::optional<int> root = 0;
    if (model) {
      root = locate_model_time(*model, chain, aliases);
      if (!root) {
        out.skipped.push_back(id + ": model time not located");
        continue;
      }
    }
    FactChain rooted = re_root(chain, *root);
    if (opts.fake_facts) {
      Rng rng(substream_seed(opts.seed, "fake", id));
      try {
        augment_with_fake(rooted, pools.at(chain.relation), rng, opts.horizon);
      } catch (const std::exception& e) {
        out.skipped.push_back(id + ": " + e.what());
      }
    }
    if (!pack.covers(chain.relation)) {
      out.skipped.push_back(id + ": no templates for relation");
      continue;
    }
    if (auto rec = build_se(rooted, pack, aliases, opts.horizon))
      out.se.push_back(std::move(*rec));
    else
      out.skipped.push_back(id + ": too short for SE");
    if (auto rec = build_me(rooted, pack, aliases, opts.horizon))
      out.me.push_back(std::move(*rec));
    if (auto rec = build_ee(rooted, pack, aliases, opts.horizon,
                            opts.extension_years))
      out.ee.push_back(std::move(*rec));
    else
      out.skipped.push_back(id + ": no extension room");
  }
  return out;
}

inline nlohmann::ordered_json record_to_json(const BenchRecord& rec) {
  nlohmann::ordered_json j;
  j["chain_id"] = rec.chain_id;
  j["kind"] = rec.kind;
  j["subject"] = rec.subject;
  j["relation"] = rec.relation;
  j["edits"] = nlohmann::ordered_json::array();
  for (const auto& op : rec.edits) j["edits"].push_back(edit_op_to_json(op));
  j["questions_per_edit"] = nlohmann::ordered_json::array();
  for (const auto& set : rec.questions_per_edit) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& q : set) arr.push_back(qa_to_json(q));
    j["questions_per_edit"].push_back(std::move(arr));
  }
  j["final_historical_questions"] = nlohmann::ordered_json::array();
  for (const auto& q : rec.final_historical_questions)
    j["final_historical_questions"].push_back(qa_to_json(q));
  return j;
}

inline BenchRecord record_from_json(const nlohmann::json& j) {
  BenchRecord rec;
  rec.chain_id = j.at("chain_id").get<std::string>();
  rec.kind = j.at("kind").get<std::string>();
  rec.subject = j.at("subject").get<std::string>();
  rec.relation = j.at("relation").get<std::string>();
  for (const auto& e : j.at("edits"))
    rec.edits.push_back(edit_op_from_json(e, rec.subject, rec.relation));
  for (const auto& set : j.at("questions_per_edit")) {
    std::vector<QAItem> items;
    for (const auto& q : set) items.push_back(qa_from_json(q));
    rec.questions_per_edit.push_back(std::move(items));
  }
  for (const auto& q : j.at("final_historical_questions"))
    rec.final_historical_questions.push_back(qa_from_json(q));
  return rec;
}

inline void write_dataset(const std::vector<BenchRecord>& records,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  for (const auto& rec : records) out << record_to_json(rec).dump() << "\n";
  if (!out) throw std::runtime_error("write failure: " + path);
}

inline std::vector<BenchRecord> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset: " + path);
  std::vector<BenchRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + " line " + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return records;
}

}
