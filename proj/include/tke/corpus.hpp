#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tke/rng.hpp"
#include "tke/temporal_kb.hpp"

namespace tke {

struct RelationSpec {
  std::string name;
  std::string subject_prefix;
  std::string object_prefix;
  double weight;
};

inline const std::vector<RelationSpec>& relation_specs() {
  static const std::vector<RelationSpec> specs = {
      {"head_of_government", "Country", "Leader", 1.0},
      {"plays_for", "Athlete", "Club", 2.0},
      {"works_at", "Person", "Company", 1.0},
      {"affiliated_with", "Researcher", "Institute", 1.0},
      {"married_to", "Partner", "Spouse", 1.0},
      {"lives_in", "Resident", "City", 1.0},
      {"holds_position", "Official", "Office", 1.0},
      {"leader_of", "Chief", "Organization", 1.0},
      {"owns", "Owner", "Asset", 1.0},
      {"graduated_from", "Alumnus", "School", 1.0},
      {"citizen_of", "National", "Nation", 1.0},
      {"created", "Author", "Work", 1.0},
      {"member_of", "Member", "Group", 1.0},
  };
  return specs;
}

struct CorpusSpec {
  int n_chains = 500;
  int pool_size = 40;
  int start_lo = 1990;
  int start_hi = 2011;
  int duration_lo = 2;
  int duration_hi = 8;
  // chain lengths 2..5
  std::vector<double> length_weights{0.4, 0.3, 0.2, 0.1};
};

inline std::string pool_object(const RelationSpec& rel, int j) {
  std::ostringstream os;
  os << rel.object_prefix << "_" << (j < 10 ? "0" : "") << j;
  return os.str();
}

inline std::string chain_subject(const RelationSpec& rel, int i) {
  std::ostringstream os;
  os << rel.subject_prefix << "_";
  for (int pad = 1000; pad >= 10; pad /= 10)
    if (i < pad) os << "0";
  os << i;
  return os.str();
}

// Deterministic synthetic corpus: per chain, a weighted relation pick, a
// start year, then abutting closed spans over distinct pool objects. Facts
// may run past the horizon; chain building clips them later.
inline std::vector<TemporalFact> gen_corpus(const CorpusSpec& spec,
                                            std::uint64_t seed) {
  const auto& rels = relation_specs();
  std::vector<double> rel_weights;
  for (const auto& r : rels) rel_weights.push_back(r.weight);

  std::vector<TemporalFact> facts;
  for (int i = 0; i < spec.n_chains; ++i) {
    Rng rng(substream_seed(seed, "corpus", "chain:" + std::to_string(i)));
    const auto& rel = rels[rng.weighted_index(rel_weights)];
    const std::string subject = chain_subject(rel, i);
    const int length = 2 + int(rng.weighted_index(spec.length_weights));

    std::set<int> used;
    std::vector<std::string> objects;
    while (int(objects.size()) < length) {
      int j = rng.uniform_int(0, spec.pool_size - 1);
      if (used.insert(j).second) objects.push_back(pool_object(rel, j));
    }

    int t = rng.uniform_int(spec.start_lo, spec.start_hi);
    for (int k = 0; k < length; ++k) {
      TemporalFact f;
      f.subject = subject;
      f.relation = rel.name;
      f.object = objects[k];
      f.t_start = t;
      t += rng.uniform_int(spec.duration_lo, spec.duration_hi);
      f.t_end = t;
      facts.push_back(std::move(f));
    }
  }
  return facts;
}

inline void write_facts_tsv(const std::vector<TemporalFact>& facts,
                            std::ostream& out) {
  for (const auto& f : facts) {
    out << f.subject << "\t" << f.relation << "\t" << f.object << "\t"
        << f.t_start << "\t";
    if (f.t_end)
      out << *f.t_end;
    else
      out << "-";
    out << "\n";
  }
}

inline void write_facts_tsv(const std::vector<TemporalFact>& facts,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write facts: " + path);
  write_facts_tsv(facts, out);
  if (!out) throw std::runtime_error("write failure: " + path);
}

}
