#pragma once

#include <cctype>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace tke {

// Lowercase, collapse whitespace runs to single spaces, trim ends.
inline std::string normalize_answer(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(char(std::tolower(c)));
  }
  return out;
}

// Identifiers use underscores; rendered text uses spaces.
inline std::string display_form(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (c == '_') c = ' ';
  return out;
}

class AliasTable {
 public:
  AliasTable() = default;

  void add(const std::string& name, const std::string& alias) {
    table_[name].insert(normalize_answer(alias));
  }

  // Two-column TSV: name <TAB> alias. '#' starts a comment line.
  void load(std::istream& in) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error("alias table line " + std::to_string(lineno) +
                                 ": expected two tab-separated columns");
      add(line.substr(0, tab), line.substr(tab + 1));
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open alias table: " + path);
    load(in);
  }

  // The accepted set for a gold identifier: its normalized form, its
  // normalized display form, and any loaded aliases.
  std::set<std::string> accepted(const std::string& gold) const {
    std::set<std::string> out{normalize_answer(gold),
                              normalize_answer(display_form(gold))};
    if (auto it = table_.find(gold); it != table_.end())
      out.insert(it->second.begin(), it->second.end());
    return out;
  }

  bool empty() const { return table_.empty(); }

 private:
  std::unordered_map<std::string, std::set<std::string>> table_;
};

inline bool match_answer(const std::string& predicted, const std::string& gold,
                         const AliasTable& aliases) {
  return aliases.accepted(gold).count(normalize_answer(predicted)) > 0;
}

}
