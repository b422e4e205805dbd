#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tke/alias.hpp"
#include "tke/bench_builder.hpp"
#include "tke/corpus.hpp"
#include "tke/editors.hpp"
#include "tke/evaluation.hpp"
#include "tke/model.hpp"
#include "tke/questions.hpp"
#include "tke/version.hpp"

namespace tke {

struct RunConfig {
  std::uint64_t seed = 42;
  int d = 256;
  HorizonRange horizon{};
  int n_chains = 500;
  double lambda = auto_lambda(256);
  double alpha = 0.4;
  EditorConfig::Cft cft{};
  EditorConfig::Batch batch{};
  int meto_passes = 16;
  bool fake_facts = true;
  int extension_years = 1;
  std::string out_dir;
};

inline nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["d"] = cfg.d;
  j["horizon"] = {{"lo", cfg.horizon.lo}, {"hi", cfg.horizon.hi}};
  j["n_chains"] = cfg.n_chains;
  j["lambda"] = cfg.lambda;
  j["alpha"] = cfg.alpha;
  j["cft"] = {{"steps", cfg.cft.steps},
              {"learning_rate", cfg.cft.learning_rate},
              {"eps", cfg.cft.eps}};
  j["batch"] = {{"lambda_e", cfg.batch.lambda_e}};
  j["meto_passes"] = cfg.meto_passes;
  j["fake_facts"] = cfg.fake_facts;
  j["extension_years"] = cfg.extension_years;
  return j;
}

inline void run_config_from_json(const nlohmann::json& j, RunConfig& cfg) {
  cfg.seed = j.value("seed", cfg.seed);
  cfg.d = j.value("d", cfg.d);
  if (j.contains("horizon")) {
    cfg.horizon.lo = j["horizon"].value("lo", cfg.horizon.lo);
    cfg.horizon.hi = j["horizon"].value("hi", cfg.horizon.hi);
  }
  cfg.n_chains = j.value("n_chains", cfg.n_chains);
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.alpha = j.value("alpha", cfg.alpha);
  if (j.contains("cft")) {
    cfg.cft.steps = j["cft"].value("steps", cfg.cft.steps);
    cfg.cft.learning_rate = j["cft"].value("learning_rate", cfg.cft.learning_rate);
    cfg.cft.eps = j["cft"].value("eps", cfg.cft.eps);
  }
  if (j.contains("batch"))
    cfg.batch.lambda_e = j["batch"].value("lambda_e", cfg.batch.lambda_e);
  cfg.meto_passes = j.value("meto_passes", cfg.meto_passes);
  cfg.fake_facts = j.value("fake_facts", cfg.fake_facts);
  cfg.extension_years = j.value("extension_years", cfg.extension_years);
}

inline std::string config_fingerprint(const RunConfig& cfg) {
  return hash_hex(fnv1a64(run_config_to_json(cfg).dump()));
}

inline const std::vector<std::pair<std::string, EditorConfig>>& suite_cells(
    const RunConfig& cfg) {
  static std::vector<std::pair<std::string, EditorConfig>> cells;
  cells.clear();
  for (auto method : {EditorConfig::Method::cft, EditorConfig::Method::r1,
                      EditorConfig::Method::batch})
    for (bool meto : {false, true}) {
      EditorConfig ec;
      ec.method = method;
      ec.cft = cfg.cft;
      ec.batch = cfg.batch;
      ec.meto = meto;
      ec.meto_passes = cfg.meto_passes;
      cells.emplace_back(
          std::string(method_name(method)) + (meto ? "_meto" : "_baseline"),
          ec);
    }
  return cells;
}

inline ModelConfig model_config_of(const RunConfig& cfg) {
  ModelConfig mc;
  mc.d = cfg.d;
  mc.seed = cfg.seed;
  mc.lambda = cfg.lambda;
  mc.alpha = cfg.alpha;
  mc.horizon = cfg.horizon;
  return mc;
}

// Entities and relations in first-occurrence order over the fact stream.
inline void collect_vocab(const std::vector<FactChain>& chains,
                          std::vector<std::string>& entities,
                          std::vector<std::string>& relations) {
  std::set<std::string> seen_e, seen_r;
  for (const auto& c : chains)
    for (const auto& f : c.facts) {
      if (seen_e.insert(f.subject).second) entities.push_back(f.subject);
      if (seen_e.insert(f.object).second) entities.push_back(f.object);
      if (seen_r.insert(f.relation).second) relations.push_back(f.relation);
    }
}

// Model time: the first fact of every chain, no predecessor knowledge.
inline LamModel init_base_model(const RunConfig& cfg,
                                const std::vector<FactChain>& chains) {
  std::vector<std::string> entities, relations;
  collect_vocab(chains, entities, relations);
  LamModel model = new_model(model_config_of(cfg), entities, relations);
  std::vector<LamModel::InitFact> init;
  for (const auto& c : chains)
    if (!c.facts.empty()) init.push_back({c.facts.front(), std::nullopt});
  model.initialize_from_facts(init);
  return model;
}

struct SuiteResult;
inline void write_suite_artifacts(const SuiteResult& result,
                                  const RunConfig& cfg);

struct SuiteResult {
  std::vector<FactChain> chains;
  BuildOutput datasets;
  // cell name -> dataset kind -> report
  std::map<std::string, std::map<std::string, MetricsReport>> reports;
  std::map<std::string, std::map<std::string, std::string>> log_blobs;
  std::string fingerprint;
  std::string summary;
};

inline const std::vector<BenchRecord>& records_of(const BuildOutput& ds,
                                                  const std::string& kind) {
  if (kind == "SE") return ds.se;
  if (kind == "ME") return ds.me;
  if (kind == "EE") return ds.ee;
  throw std::runtime_error("unknown dataset kind: " + kind);
}

inline std::string suite_summary(const SuiteResult& result,
                                 const RunConfig& cfg) {
  std::ostringstream md;
  md << "# Evaluation summary\n\n";
  md << "seed " << cfg.seed << ", " << cfg.n_chains << " chains, d=" << cfg.d
     << ", lambda=" << cfg.lambda << ", alpha=" << cfg.alpha
     << ", meto_passes=" << cfg.meto_passes << "\n\n";
  md << "datasets: SE " << result.datasets.se.size() << ", ME "
     << result.datasets.me.size() << ", EE " << result.datasets.ee.size()
     << " records\n\n";
  for (const std::string kind : {"SE", "ME", "EE"}) {
    md << "## " << kind << "\n\n";
    std::vector<std::string> cols;
    for (const auto& cls : metric_order()) {
      bool present = false;
      for (const auto& [cell, by_kind] : result.reports)
        if (by_kind.count(kind) && by_kind.at(kind).metrics.count(cls))
          present = true;
      if (present) cols.push_back(cls);
    }
    md << "| editor |";
    for (const auto& c : cols) md << " " << c << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& [cell, by_kind] : result.reports) {
      if (!by_kind.count(kind)) continue;
      const auto& rep = by_kind.at(kind);
      md << "| " << cell << " |";
      for (const auto& c : cols)
        md << " " << (rep.metrics.count(c) ? format_metric(rep.metrics.at(c))
                                           : "-")
           << " |";
      md << "\n";
    }
    md << "\n";
  }
  md << "## Repeated-edit gains\n\n";
  for (const std::string method : {"cft", "r1", "batch"}) {
    for (const std::string kind : {"SE", "ME", "EE"}) {
      const auto& base = result.reports.at(method + "_baseline").at(kind);
      const auto& meto = result.reports.at(method + "_meto").at(kind);
      md << "### " << method << " on " << kind << "\n\n";
      md << compare_reports(base, meto).markdown << "\n";
    }
  }
  return md.str();
}

// End-to-end run: corpus, chains, base model, datasets, then every editor
// cell with and without the repeated-edit wrapper. Writes artifacts when
// out_dir is set.
inline SuiteResult run_suite(const RunConfig& cfg, const TemplatePack& pack,
                             const AliasTable& aliases = {},
                             bool progress = false) {
  SuiteResult result;
  result.fingerprint = config_fingerprint(cfg);

  CorpusSpec cspec;
  cspec.n_chains = cfg.n_chains;
  auto facts = gen_corpus(cspec, substream_seed(cfg.seed, "corpus"));
  auto built = build_chains(facts, cfg.horizon);
  result.chains = std::move(built.chains);

  LamModel base = init_base_model(cfg, result.chains);

  BuildOptions bopts;
  bopts.fake_facts = cfg.fake_facts;
  bopts.extension_years = cfg.extension_years;
  bopts.horizon = cfg.horizon;
  bopts.seed = cfg.seed;
  result.datasets = build_all(result.chains, &base, pack, aliases, bopts);
  if (progress)
    std::cerr << "datasets: SE " << result.datasets.se.size() << " ME "
              << result.datasets.me.size() << " EE "
              << result.datasets.ee.size() << " (skipped "
              << result.datasets.skipped.size() << ")\n";

  for (const auto& [cell, ec] : suite_cells(cfg)) {
    for (const std::string kind : {"SE", "ME", "EE"}) {
      const auto& records = records_of(result.datasets, kind);
      std::vector<RecordEval> evals;
      evals.reserve(records.size());
      std::string blob;
      for (const auto& rec : records) {
        RecordEval ev = eval_record(base, rec, ec, aliases);
        blob += "{\"chain_id\":\"" + rec.chain_id + "\"}\n";
        blob += ev.log.to_jsonl();
        evals.push_back(std::move(ev));
      }
      result.reports[cell][kind] =
          aggregate(kind, evals, result.fingerprint, cfg.seed);
      result.log_blobs[cell][kind] = std::move(blob);
      if (progress)
        std::cerr << cell << " " << kind << ": " << records.size()
                  << " records done\n";
    }
  }
  result.summary = suite_summary(result, cfg);

  if (!cfg.out_dir.empty()) write_suite_artifacts(result, cfg);
  return result;
}

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failure: " + path.string());
}

inline void write_suite_artifacts(const SuiteResult& result,
                                  const RunConfig& cfg) {
  namespace fs = std::filesystem;
  const fs::path root(cfg.out_dir);
  for (const char* sub : {"", "datasets", "reports", "logs", "compare"})
    fs::create_directories(root / sub);

  write_dataset(result.datasets.se, (root / "datasets/se.jsonl").string());
  write_dataset(result.datasets.me, (root / "datasets/me.jsonl").string());
  write_dataset(result.datasets.ee, (root / "datasets/ee.jsonl").string());
  {
    std::string skips;
    for (const auto& s : result.datasets.skipped) skips += s + "\n";
    write_text(root / "datasets/skipped.txt", skips);
  }

  for (const auto& [cell, by_kind] : result.reports)
    for (const auto& [kind, rep] : by_kind) {
      write_text(root / "reports" / (cell + "_" + kind + ".report.json"),
                 report_to_json(rep).dump(2) + "\n");
      write_text(root / "reports" / (cell + "_" + kind + ".report.md"),
                 report_markdown(rep));
      write_text(root / "logs" / (cell + "_" + kind + ".log.jsonl"),
                 result.log_blobs.at(cell).at(kind));
    }

  for (const std::string method : {"cft", "r1", "batch"})
    for (const std::string kind : {"SE", "ME", "EE"}) {
      auto cmp = compare_reports(result.reports.at(method + "_baseline").at(kind),
                                 result.reports.at(method + "_meto").at(kind));
      write_text(root / "compare" / (method + "_" + kind + ".delta.json"),
                 cmp.json.dump(2) + "\n");
      write_text(root / "compare" / (method + "_" + kind + ".delta.md"),
                 cmp.markdown);
    }

  write_text(root / "summary.md", result.summary);

  nlohmann::ordered_json meta;
  meta["seed"] = cfg.seed;
  meta["config_fingerprint"] = result.fingerprint;
  meta["tool_version"] = tool_version;
  meta["config"] = run_config_to_json(cfg);
  write_text(root / "meta.json", meta.dump(2) + "\n");
}

}
