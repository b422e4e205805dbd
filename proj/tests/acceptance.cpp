// Acceptance gate: every release-blocking behavior asserted in one binary.
// Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tke/bench_builder.hpp"
#include "tke/editors.hpp"
#include "tke/evaluation.hpp"
#include "tke/model.hpp"
#include "tke/questions.hpp"
#include "tke/rng.hpp"
#include "tke/suite.hpp"
#include "tke/temporal_kb.hpp"

namespace fs = std::filesystem;
using namespace tke;

namespace {

const std::string kRepo = TKE_REPO_DIR;

Eigen::VectorXd random_unit(int d, Rng& rng) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = rng.normal();
  return v.normalized();
}

Eigen::MatrixXd random_spd(int d, Rng& rng) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  return a * a.transpose() / double(d) + Eigen::MatrixXd::Identity(d, d);
}

EditTarget raw_target(Eigen::VectorXd key, Eigen::VectorXd value) {
  EditTarget t;
  t.key = std::move(key);
  t.value = std::move(value);
  return t;
}

LamModel scratch_model(int d) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.lambda = auto_lambda(d);
  return LamModel(cfg, {"a"}, {"r"});
}

std::vector<TemporalFact> random_fact_soup(Rng& rng) {
  const int n = int(rng.uniform_int(1, 12));
  std::vector<TemporalFact> facts;
  for (int i = 0; i < n; ++i) {
    TemporalFact f;
    f.subject = "S" + std::to_string(rng.uniform_int(0, 2));
    f.relation = "r" + std::to_string(rng.uniform_int(0, 1));
    f.object = "O" + std::to_string(rng.uniform_int(0, 4));
    f.t_start = int(rng.uniform_int(1890, 2040));
    if (rng.uniform() < 0.8)
      f.t_end = f.t_start + int(rng.uniform_int(0, 15)) - 2;
    facts.push_back(std::move(f));
  }
  return facts;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(double x, int prec = 1) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << x;
  return os.str();
}

std::string fmt_sci(double x) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(1) << x;
  return os.str();
}

struct Gate {
  bool all_ok = true;

  void report(int n, bool ok, const std::string& detail) {
    all_ok = all_ok && ok;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << n << ": "
              << detail << "\n"
              << std::flush;
  }
};

// --- criterion 1: editor math oracles ---------------------------------------

bool criterion_1(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;

  // (a) single-pair rank-one exactness, 1000 trials at d=64
  double worst_r1 = 0.0;
  {
    const int d = 64;
    for (int trial = 0; trial < 1000; ++trial) {
      Rng rng(substream_seed(101, "acc-r1", std::to_string(trial)));
      LamModel model = scratch_model(d);
      model.C() = random_spd(d, rng);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) model.W()(i, j) = rng.normal();
      const Eigen::VectorXd k = random_unit(d, rng);
      const Eigen::VectorXd v = random_unit(d, rng);
      EditLog log;
      edit_r1(model, {raw_target(k, v)}, log);
      worst_r1 =
          std::max(worst_r1, (model.W() * k - v).cwiseAbs().maxCoeff());
    }
    ok = ok && worst_r1 <= 1e-8;
  }

  // (b) batch update against an independent dense closed-form solve
  double worst_batch = 0.0;
  {
    for (int d : {8, 16, 32}) {
      for (int m : {1, 4, 8}) {
        for (int trial = 0; trial < 10; ++trial) {
          Rng rng(substream_seed(
              101, "acc-batch",
              std::to_string(d) + ":" + std::to_string(m) + ":" +
                  std::to_string(trial)));
          LamModel model = scratch_model(d);
          model.C() = random_spd(d, rng);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) model.W()(i, j) = rng.normal();
          const Eigen::MatrixXd W0 = model.W();
          const Eigen::MatrixXd C0 = model.C();
          Eigen::MatrixXd K(d, m), V(d, m);
          std::vector<EditTarget> targets;
          for (int i = 0; i < m; ++i) {
            K.col(i) = random_unit(d, rng);
            V.col(i) = random_unit(d, rng);
            targets.push_back(raw_target(K.col(i), V.col(i)));
          }
          EditorConfig cfg;
          cfg.method = EditorConfig::Method::batch;
          EditLog log;
          edit_batch(model, targets, cfg, log);
          const Eigen::MatrixXd M =
              C0 + K * K.transpose() +
              cfg.batch.lambda_e * Eigen::MatrixXd::Identity(d, d);
          const Eigen::MatrixXd expected =
              W0 + (V - W0 * K) * K.transpose() * M.inverse();
          worst_batch = std::max(
              worst_batch, (model.W() - expected).cwiseAbs().maxCoeff());
        }
      }
    }
    ok = ok && worst_batch <= 1e-6;
  }

  // (c) constrained editor never exceeds its norm budget
  double worst_cft = 0.0;
  {
    const int d = 48;
    for (int trial = 0; trial < 25; ++trial) {
      Rng rng(substream_seed(101, "acc-cft", std::to_string(trial)));
      LamModel model = scratch_model(d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) model.W()(i, j) = rng.normal();
      const Eigen::MatrixXd W0 = model.W();
      std::vector<EditTarget> targets;
      const int m = 1 + int(rng.uniform_int(0, 4));
      for (int i = 0; i < m; ++i)
        targets.push_back(
            raw_target(random_unit(d, rng), 3.0 * random_unit(d, rng)));
      EditorConfig cfg;
      cfg.cft.eps = (trial % 2 == 0) ? 0.1 : 1.0;
      EditLog log;
      edit_cft(model, targets, cfg, log);
      const double moved = (model.W() - W0).norm() / cfg.cft.eps;
      worst_cft = std::max(worst_cft, moved);
    }
    ok = ok && worst_cft <= 1.0 + 1e-9;
  }

  const double dt = seconds_since(t0);
  ok = ok && dt < 10.0;
  detail = "editor math oracles: r1 max |W'k-v| " + fmt_sci(worst_r1) +
           ", batch vs dense max " + fmt_sci(worst_batch) +
           ", cft norm ratio max " + fmt(worst_cft, 6) + ", " + fmt(dt) + "s";
  return ok;
}

// --- criterion 2: chain construction properties ------------------------------

bool criterion_2(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  long chains_seen = 0;
  for (int c = 0; c < 10000; ++c) {
    Rng rng(substream_seed(103, "acc-soup", std::to_string(c)));
    const auto facts = random_fact_soup(rng);
    const BuildResult built = build_chains(facts);
    for (const auto& chain : built.chains) {
      ++chains_seen;
      if (!validate_chain(chain).empty() || chain.facts.empty()) {
        detail = "chain invariants violated on randomized case " +
                 std::to_string(c);
        return false;
      }
    }
    std::vector<TemporalFact> flat;
    for (const auto& chain : built.chains)
      flat.insert(flat.end(), chain.facts.begin(), chain.facts.end());
    const BuildResult again = build_chains(flat);
    bool same = again.log.empty() && again.chains.size() == built.chains.size();
    for (std::size_t i = 0; same && i < built.chains.size(); ++i)
      same = again.chains[i].facts == built.chains[i].facts;
    if (!same) {
      detail = "idempotence violated on randomized case " + std::to_string(c);
      return false;
    }
  }
  const double dt = seconds_since(t0);
  detail = "chain invariants + idempotence on 10000 randomized sets (" +
           std::to_string(chains_seen) + " chains), " + fmt(dt) + "s";
  return dt < 30.0;
}

// --- criterion 3: reference-instance fidelity --------------------------------

const QAItem* find_by_class(const std::vector<QAItem>& items,
                            const std::string& cls) {
  for (const auto& q : items)
    if (q.question_class == cls) return &q;
  return nullptr;
}

bool pairing_ok(const QAItem* item, const std::string& text,
                const std::string& answer, std::string& detail) {
  if (!item) {
    detail = "question class missing for pairing \"" + text + "\"";
    return false;
  }
  if (item->text != text) {
    detail = "question text mismatch: got \"" + item->text + "\", want \"" +
             text + "\"";
    return false;
  }
  if (!answer_matches(answer, *item)) {
    detail = "answer \"" + answer + "\" not accepted for \"" + text + "\"";
    return false;
  }
  return true;
}

bool criterion_3(const TemplatePack& pack, std::string& detail) {
  std::ifstream in(kRepo + "/data/presidents.tsv");
  if (!in) {
    detail = "cannot open data/presidents.tsv";
    return false;
  }
  const ParseResult parsed = parse_facts(in);
  if (!parsed.issues.empty() || parsed.facts.size() != 3) {
    detail = "reference fact set failed to parse cleanly";
    return false;
  }
  const BuildResult built = build_chains(parsed.facts);
  if (built.chains.size() != 1 || built.chains[0].facts.size() != 3) {
    detail = "reference fact set did not form one three-fact chain";
    return false;
  }

  BuildOptions opts;
  opts.fake_facts = false;
  opts.extension_years = 1;

  // single and multiple edits build directly from the stored chain
  const BuildOutput plain = build_all(built.chains, nullptr, pack, {}, opts);
  if (plain.se.size() != 1 || plain.me.size() != 1) {
    detail = "expected one SE and one ME record from the reference chain";
    return false;
  }
  const FactSpan obama{"Barack_Obama", 2009, 2017};
  const FactSpan trump{"Donald_Trump", 2017, 2021};
  const FactSpan biden{"Joseph_Biden", 2021, 2022};
  const auto& se = plain.se[0];
  if (se.edits.size() != 1 || se.edits[0].old_fact != obama ||
      se.edits[0].new_fact != trump) {
    detail = "SE edit structure is not Obama(2009-2017) -> Trump(2017-2021)";
    return false;
  }
  const auto& me = plain.me[0];
  if (me.edits.size() != 2 || me.edits[0].old_fact != obama ||
      me.edits[0].new_fact != trump || me.edits[1].old_fact != trump ||
      me.edits[1].new_fact != biden) {
    detail = "ME edit structure is not Obama -> Trump -> Biden";
    return false;
  }

  // the extension record builds against a model whose stored fact is the
  // final one; the chain is re-rooted where the model's knowledge sits
  ModelConfig mc;
  std::vector<std::string> entities, relations;
  collect_vocab(built.chains, entities, relations);
  LamModel model(mc, entities, relations);
  model.initialize_from_facts({{built.chains[0].facts[2], std::nullopt}});
  const BuildOutput rooted = build_all(built.chains, &model, pack, {}, opts);
  if (rooted.ee.size() != 1) {
    detail = "expected one EE record from the final-fact model";
    return false;
  }
  const auto& ee = rooted.ee[0];
  const FactSpan biden_ext{"Joseph_Biden", 2021, 2023};
  if (ee.edits.size() != 1 || ee.edits[0].old_fact != biden ||
      ee.edits[0].new_fact != biden_ext) {
    detail = "EE edit structure is not Biden(2021-2022) -> Biden(2021-2023)";
    return false;
  }

  // the five question/answer pairings, exactly as rendered
  const auto& qs = se.questions_per_edit.at(0);
  if (!pairing_ok(find_by_class(qs, "CRS"),
                  "Who is the current President of the United States?",
                  "Donald Trump", detail))
    return false;
  if (!pairing_ok(
          find_by_class(qs, "HRS"),
          "Who was the President of the United States in the previous term?",
          "Barack Obama", detail))
    return false;
  if (!pairing_ok(find_by_class(qs, "CES"),
                  "Who holds the position of President in the United States "
                  "from 2017 to 2021?",
                  "Donald Trump", detail))
    return false;
  if (!pairing_ok(find_by_class(qs, "HES"),
                  "Who was the President of the United States from 2009 to "
                  "2017?",
                  "Barack Obama", detail))
    return false;
  if (!pairing_ok(find_by_class(ee.questions_per_edit.at(0), "CES"),
                  "From 2022 to 2023, who serves as the president of the "
                  "United States?",
                  "Joseph Biden", detail))
    return false;

  detail = "reference instance reproduced: SE/ME/EE edit structures and all "
           "five question/answer pairings";
  return true;
}

// --- criteria 4-8, 10: default synthetic suite -------------------------------

double met(const SuiteResult& r, const std::string& cell,
           const std::string& kind, const std::string& name) {
  return r.reports.at(cell).at(kind).metrics.at(name);
}

bool criterion_4(const SuiteResult& r, std::string& detail) {
  const double ces = met(r, "r1_baseline", "SE", "CES");
  const double hes = met(r, "r1_baseline", "SE", "HES");
  detail = "plain rank-one remembers the new and forgets the old: SE CES " +
           fmt(ces) + " (>= 90), HES " + fmt(hes) + " (<= 20)";
  return ces >= 90.0 && hes <= 20.0;
}

bool criterion_5(const SuiteResult& r, std::string& detail) {
  bool ok = true;
  std::string parts;
  for (const std::string method : {"r1", "batch"}) {
    const double hes_b = met(r, method + "_baseline", "SE", "HES");
    const double hes_m = met(r, method + "_meto", "SE", "HES");
    const double ces_b = met(r, method + "_baseline", "SE", "CES");
    const double ces_m = met(r, method + "_meto", "SE", "CES");
    ok = ok && (hes_m - hes_b >= 30.0) && (ces_m >= ces_b - 10.0);
    if (!parts.empty()) parts += "; ";
    parts += method + " dHES +" + fmt(hes_m - hes_b) + " (>= +30), CES " +
             fmt(ces_b) + " -> " + fmt(ces_m) + " (drop <= 10)";
  }
  detail = "repeated-edit wrapper recovers history on SE: " + parts;
  return ok;
}

bool criterion_6(const SuiteResult& r, std::string& detail) {
  const double base_r1 = met(r, "r1_baseline", "ME", "HES*");
  bool ok = base_r1 <= 10.0;
  std::string parts = "r1 baseline HES* " + fmt(base_r1) + " (<= 10)";
  for (const std::string method : {"r1", "batch"}) {
    const double b = met(r, method + "_baseline", "ME", "HES*");
    const double m = met(r, method + "_meto", "ME", "HES*");
    ok = ok && (m >= b + 20.0);
    parts += "; " + method + " recovery " + fmt(b) + " -> " + fmt(m) +
             " (>= +20)";
  }
  detail = "more edits erase more history without the wrapper (ME): " + parts;
  return ok;
}

bool criterion_7(const SuiteResult& r, std::string& detail) {
  const double ee = met(r, "r1_baseline", "EE", "CRS");
  const double se = met(r, "r1_baseline", "SE", "CRS");
  detail = "extending a span is no harder than replacing it: r1 EE CRS " +
           fmt(ee) + " >= SE CRS " + fmt(se);
  return ee >= se;
}

bool criterion_8(const SuiteResult& r, std::string& detail) {
  const double hrs = met(r, "r1_baseline", "SE", "HRS");
  const double hes = met(r, "r1_baseline", "SE", "HES");
  detail = "relative-time history is not easier than explicit: r1 SE HRS " +
           fmt(hrs) + " <= HES " + fmt(hes) + " + 5";
  return hrs <= hes + 5.0;
}

bool criterion_10(const SuiteResult& r, std::string& detail) {
  const double cft = met(r, "cft_baseline", "SE", "CES");
  const double r1 = met(r, "r1_baseline", "SE", "CES");
  detail = "norm-budgeted fine-tuning installs less than rank-one: SE CES " +
           fmt(cft) + " < " + fmt(r1);
  return cft < r1;
}

// --- criterion 9: determinism ------------------------------------------------

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    out[fs::relative(entry.path(), root).string()] = buf.str();
  }
  return out;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool criterion_9(const TemplatePack& pack, std::string& detail) {
  RunConfig cfg;
  cfg.n_chains = 60;
  const fs::path base = fs::temp_directory_path() / "tke-acceptance";
  const fs::path a = base / "run-a";
  const fs::path b = base / "run-b";
  fs::remove_all(base);
  fs::create_directories(base);

  cfg.out_dir = a.string();
  run_suite(cfg, pack);
  cfg.out_dir = b.string();
  run_suite(cfg, pack);

  const auto ta = tree_bytes(a);
  const auto tb = tree_bytes(b);
  if (ta.size() != tb.size() || ta.empty()) {
    detail = "artifact trees differ in file count";
    return false;
  }
  for (const auto& [rel, bytes] : ta) {
    const auto it = tb.find(rel);
    if (it == tb.end() || it->second != bytes) {
      detail = "artifact differs between identical runs: " + rel;
      return false;
    }
  }

  // model serialization round-trips bit-exactly
  CorpusSpec cspec;
  cspec.n_chains = 60;
  const auto corpus = gen_corpus(cspec, substream_seed(cfg.seed, "corpus"));
  const auto chains = build_chains(corpus, cfg.horizon).chains;
  LamModel model = init_base_model(cfg, chains);
  const fs::path f1 = base / "model-1.bin";
  const fs::path f2 = base / "model-2.bin";
  model.save(f1.string());
  LamModel loaded = LamModel::load(f1.string());
  loaded.save(f2.string());
  if (model.state_hash() != loaded.state_hash()) {
    detail = "loaded model state hash differs from saved";
    return false;
  }
  if (file_bytes(f1) != file_bytes(f2)) {
    detail = "re-saved model file is not byte-identical";
    return false;
  }
  fs::remove_all(base);
  detail = "two identical runs produced byte-identical artifacts (" +
           std::to_string(ta.size()) +
           " files); model save/load round-trips bit-exactly";
  return true;
}

}  // namespace

int main() {
  Gate gate;
  TemplatePack pack;
  try {
    pack.load_file(kRepo + "/templates/canonical.tsv");
  } catch (const std::exception& e) {
    std::cout << "[FAIL] setup: " << e.what() << "\n";
    return 1;
  }

  std::string detail;
  gate.report(1, criterion_1(detail), detail);
  gate.report(2, criterion_2(detail), detail);

  try {
    gate.report(3, criterion_3(pack, detail), detail);
  } catch (const std::exception& e) {
    gate.report(3, false, std::string("exception: ") + e.what());
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    const SuiteResult suite = run_suite(cfg, pack);
    std::cout << "       default suite (" << std::to_string(cfg.n_chains)
              << " chains, d=" << cfg.d << ", seed " << cfg.seed << ") in "
              << fmt(seconds_since(t0)) << "s; records SE "
              << suite.datasets.se.size() << " / ME "
              << suite.datasets.me.size() << " / EE "
              << suite.datasets.ee.size() << "\n";
    gate.report(4, criterion_4(suite, detail), detail);
    gate.report(5, criterion_5(suite, detail), detail);
    gate.report(6, criterion_6(suite, detail), detail);
    gate.report(7, criterion_7(suite, detail), detail);
    gate.report(8, criterion_8(suite, detail), detail);
    try {
      gate.report(9, criterion_9(pack, detail), detail);
    } catch (const std::exception& e) {
      gate.report(9, false, std::string("exception: ") + e.what());
    }
    gate.report(10, criterion_10(suite, detail), detail);
  } catch (const std::exception& e) {
    for (int n : {4, 5, 6, 7, 8, 9, 10})
      gate.report(n, false, std::string("suite exception: ") + e.what());
  }

  std::cout << (gate.all_ok ? "ALL CRITERIA PASS" : "CRITERIA FAILED") << "\n";
  return gate.all_ok ? 0 : 1;
}
