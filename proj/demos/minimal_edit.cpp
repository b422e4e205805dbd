// Smallest end-to-end use of the library: initialize the associative memory
// with one fact, walk a chain of successor facts through the editor twice
// (plain, then with the repeated-edit wrapper), and show what each model
// remembers afterwards.

#include <iostream>
#include <string>
#include <vector>

#include "tke/editors.hpp"
#include "tke/model.hpp"
#include "tke/temporal_kb.hpp"

using namespace tke;

namespace {

FactChain presidents() {
  FactChain chain;
  chain.subject = "United_States";
  chain.relation = "head_of_government";
  chain.facts = {
      {"United_States", "head_of_government", "Barack_Obama", 2009, 2017},
      {"United_States", "head_of_government", "Donald_Trump", 2017, 2021},
      {"United_States", "head_of_government", "Joseph_Biden", 2021, 2022},
  };
  return chain;
}

std::vector<EditOp> successor_edits(const FactChain& chain) {
  std::vector<EditOp> edits;
  for (std::size_t i = 0; i + 1 < chain.facts.size(); ++i) {
    const auto& a = chain.facts[i];
    const auto& b = chain.facts[i + 1];
    EditOp op;
    op.subject = chain.subject;
    op.relation = chain.relation;
    op.old_fact = {a.object, a.t_start, a.t_end};
    op.new_fact = {b.object, b.t_start, b.t_end};
    edits.push_back(std::move(op));
  }
  return edits;
}

LamModel fresh_model(const FactChain& chain) {
  LamModel model(ModelConfig{},
                 {"United_States", "Barack_Obama", "Donald_Trump",
                  "Joseph_Biden"},
                 {chain.relation});
  model.initialize_from_facts({{chain.facts.front(), std::nullopt}});
  return model;
}

void probe(const LamModel& model, const std::string& label) {
  const std::string s = "United_States";
  const std::string r = "head_of_government";
  std::cout << label << "\n"
            << "  current:   " << model.query({s, r, TimeRef::current()}).object
            << "\n"
            << "  previous:  " << model.query({s, r, TimeRef::previous()}).object
            << "\n"
            << "  year 2013: "
            << model.query({s, r, TimeRef::of_year(2013)}).object << "\n"
            << "  year 2019: "
            << model.query({s, r, TimeRef::of_year(2019)}).object << "\n";
}

}  // namespace

int main() {
  const FactChain chain = presidents();
  const std::vector<EditOp> edits = successor_edits(chain);

  LamModel plain = fresh_model(chain);
  EditorConfig cfg;
  cfg.method = EditorConfig::Method::r1;
  apply_edit(plain, edits, cfg);
  probe(plain, "plain rank-one edits (history overwritten):");

  LamModel wrapped = fresh_model(chain);
  cfg.meto = true;
  apply_edit(wrapped, edits, cfg);
  probe(wrapped, "with the repeated-edit wrapper (history kept):");
  return 0;
}
