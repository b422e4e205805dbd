#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tke/alias.hpp"
#include "tke/bench_builder.hpp"
#include "tke/corpus.hpp"
#include "tke/editors.hpp"
#include "tke/evaluation.hpp"
#include "tke/model.hpp"
#include "tke/questions.hpp"
#include "tke/suite.hpp"
#include "tke/temporal_kb.hpp"
#include "tke/version.hpp"

namespace {

namespace fs = std::filesystem;

struct GlobalOpts {
  tke::RunConfig cfg;
  std::string config_path;
  std::string templates_path;
  std::string aliases_path;
};

void load_config(GlobalOpts& g) {
  if (g.config_path.empty()) return;
  std::ifstream in(g.config_path);
  if (!in) throw std::runtime_error("cannot open config: " + g.config_path);
  nlohmann::json j = nlohmann::json::parse(in);
  tke::run_config_from_json(j, g.cfg);
  if (j.contains("templates") && g.templates_path.empty())
    g.templates_path = j["templates"].get<std::string>();
  if (j.contains("aliases") && g.aliases_path.empty())
    g.aliases_path = j["aliases"].get<std::string>();
  if (j.contains("out_dir") && g.cfg.out_dir.empty())
    g.cfg.out_dir = j["out_dir"].get<std::string>();
}

tke::TemplatePack load_templates(const GlobalOpts& g) {
  if (g.templates_path.empty())
    throw std::runtime_error("no template pack given (--templates)");
  tke::TemplatePack pack;
  pack.load_file(g.templates_path);
  return pack;
}

tke::AliasTable load_aliases(const GlobalOpts& g) {
  tke::AliasTable table;
  if (!g.aliases_path.empty()) table.load_file(g.aliases_path);
  return table;
}

std::vector<tke::FactChain> read_chains_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open chains: " + path);
  return tke::chains_from_json(nlohmann::json::parse(in));
}

void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failure: " + path);
}

int cmd_ingest(const GlobalOpts& g, const std::string& facts_path,
               const std::string& out_path) {
  std::ifstream in(facts_path);
  if (!in) {
    std::cerr << "error: cannot open facts file: " << facts_path << "\n";
    return 2;
  }
  tke::ParseResult parsed = tke::parse_facts(in);
  for (const auto& issue : parsed.issues)
    std::cerr << "parse: line " << issue.line << ": " << issue.message << "\n";
  if (parsed.facts.empty() && !parsed.issues.empty()) {
    std::cerr << "error: no facts parsed\n";
    return 2;
  }
  tke::BuildResult built = tke::build_chains(parsed.facts, g.cfg.horizon);
  for (const auto& e : built.log)
    std::cerr << "chain: " << e.subject << "/" << e.relation << " "
              << e.action << ": " << e.detail << "\n";
  if (!out_path.empty())
    write_json_file(out_path, tke::chains_to_json(built.chains));
  std::cout << parsed.facts.size() << " facts -> " << built.chains.size()
            << " chains (" << parsed.issues.size() << " parse issues, "
            << built.log.size() << " adjustments)\n";
  return 0;
}

int cmd_gen_corpus(const GlobalOpts& g, const std::string& out_path) {
  tke::CorpusSpec spec;
  spec.n_chains = g.cfg.n_chains;
  auto facts =
      tke::gen_corpus(spec, tke::substream_seed(g.cfg.seed, "corpus"));
  tke::write_facts_tsv(facts, out_path);
  std::cout << facts.size() << " facts over " << spec.n_chains
            << " chains -> " << out_path << "\n";
  return 0;
}

int cmd_init_model(const GlobalOpts& g, const std::string& chains_path,
                   const std::string& out_path) {
  auto chains = read_chains_file(chains_path);
  tke::LamModel model = tke::init_base_model(g.cfg, chains);
  model.save(out_path);
  std::cout << "model d=" << model.config().d << " entities="
            << model.entities().size() << " -> " << out_path << "\n";
  return 0;
}

int cmd_build(const GlobalOpts& g, const std::string& chains_path,
              const std::string& model_path, const std::string& out_dir) {
  auto chains = read_chains_file(chains_path);
  tke::TemplatePack pack = load_templates(g);
  tke::AliasTable aliases = load_aliases(g);
  std::optional<tke::LamModel> model;
  if (!model_path.empty()) model = tke::LamModel::load(model_path);

  tke::BuildOptions opts;
  opts.fake_facts = g.cfg.fake_facts;
  opts.extension_years = g.cfg.extension_years;
  opts.horizon = g.cfg.horizon;
  opts.seed = g.cfg.seed;
  tke::BuildOutput out = tke::build_all(
      chains, model ? &*model : nullptr, pack, aliases, opts);

  fs::create_directories(out_dir);
  tke::write_dataset(out.se, (fs::path(out_dir) / "se.jsonl").string());
  tke::write_dataset(out.me, (fs::path(out_dir) / "me.jsonl").string());
  tke::write_dataset(out.ee, (fs::path(out_dir) / "ee.jsonl").string());
  {
    std::ofstream skips(fs::path(out_dir) / "skipped.txt");
    for (const auto& s : out.skipped) skips << s << "\n";
  }
  nlohmann::ordered_json meta;
  meta["seed"] = g.cfg.seed;
  meta["config_fingerprint"] = tke::config_fingerprint(g.cfg);
  meta["tool_version"] = tke::tool_version;
  write_json_file((fs::path(out_dir) / "meta.json").string(), meta);
  std::cout << "SE " << out.se.size() << ", ME " << out.me.size() << ", EE "
            << out.ee.size() << " records -> " << out_dir << " ("
            << out.skipped.size() << " skips)\n";
  return 0;
}

int cmd_edit(const GlobalOpts& g, const std::string& model_path,
             const std::string& dataset_path, const std::string& record_id,
             const std::string& method, bool meto, const std::string& out_path,
             const std::string& log_path) {
  tke::LamModel model = tke::LamModel::load(model_path);
  auto records = tke::read_dataset(dataset_path);
  if (records.empty()) throw std::runtime_error("dataset is empty");
  const tke::BenchRecord* rec = nullptr;
  if (record_id.empty()) {
    if (records.size() > 1)
      throw std::runtime_error(
          "dataset holds several records; pick one with --record");
    rec = &records.front();
  } else {
    for (const auto& r : records)
      if (r.chain_id == record_id) rec = &r;
    if (!rec) throw std::runtime_error("no record with chain_id " + record_id);
  }

  tke::EditorConfig ec;
  ec.method = tke::method_from_string(method);
  ec.cft = g.cfg.cft;
  ec.batch = g.cfg.batch;
  ec.meto = meto;
  ec.meto_passes = g.cfg.meto_passes;
  tke::AliasTable aliases = load_aliases(g);
  tke::EditLog log = tke::apply_edit(model, rec->edits, ec, aliases);
  if (!out_path.empty()) model.save(out_path);
  if (!log_path.empty()) {
    std::ofstream out(log_path);
    out << log.to_jsonl();
  }
  std::cout << rec->edits.size() << " edits applied (" << log.entries.size()
            << " log entries)"
            << (out_path.empty() ? "" : " -> " + out_path) << "\n";
  return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& model_path,
             const std::string& dataset_path, const std::string& method,
             bool meto, const std::string& out_path,
             const std::string& md_path) {
  tke::LamModel base = tke::LamModel::load(model_path);
  auto records = tke::read_dataset(dataset_path);
  if (records.empty()) throw std::runtime_error("dataset is empty");
  const std::string kind = records.front().kind;

  tke::EditorConfig ec;
  ec.method = tke::method_from_string(method);
  ec.cft = g.cfg.cft;
  ec.batch = g.cfg.batch;
  ec.meto = meto;
  ec.meto_passes = g.cfg.meto_passes;
  tke::AliasTable aliases = load_aliases(g);

  std::vector<tke::RecordEval> evals;
  for (const auto& rec : records) {
    if (rec.kind != kind)
      throw std::runtime_error("dataset mixes kinds " + kind + " and " +
                               rec.kind);
    evals.push_back(tke::eval_record(base, rec, ec, aliases));
  }
  tke::MetricsReport rep =
      tke::aggregate(kind, evals, tke::config_fingerprint(g.cfg), g.cfg.seed);
  if (!out_path.empty())
    write_json_file(out_path, tke::report_to_json(rep));
  if (!md_path.empty()) {
    std::ofstream out(md_path);
    out << tke::report_markdown(rep);
  }
  std::cout << tke::report_markdown(rep);
  return 0;
}

int cmd_run_suite(GlobalOpts& g, const std::string& out_dir) {
  if (!out_dir.empty()) g.cfg.out_dir = out_dir;
  if (g.cfg.out_dir.empty())
    throw std::runtime_error("run-suite needs --out-dir");
  tke::TemplatePack pack = load_templates(g);
  tke::AliasTable aliases = load_aliases(g);
  tke::SuiteResult res = tke::run_suite(g.cfg, pack, aliases, true);
  std::cout << res.summary;
  std::cout << "artifacts -> " << g.cfg.out_dir << "\n";
  return 0;
}

int cmd_compare(const std::string& base_path, const std::string& enh_path,
                const std::string& out_path, const std::string& md_path) {
  auto read_report = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open report: " + path);
    return tke::report_from_json(nlohmann::json::parse(in));
  };
  tke::CompareResult cmp =
      tke::compare_reports(read_report(base_path), read_report(enh_path));
  if (!out_path.empty()) write_json_file(out_path, cmp.json);
  if (!md_path.empty()) {
    std::ofstream out(md_path);
    out << cmp.markdown;
  }
  std::cout << cmp.markdown;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal knowledge editing workbench"};
  app.set_version_flag("--version", std::string(tke::tool_version));
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--seed", g.cfg.seed, "master RNG seed");
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--templates", g.templates_path, "question template pack TSV");
  app.add_option("--aliases", g.aliases_path, "answer alias table TSV");
  app.add_option("--horizon-lo", g.cfg.horizon.lo, "first representable year");
  app.add_option("--horizon-hi", g.cfg.horizon.hi, "last representable year");
  app.add_option("--d", g.cfg.d, "embedding dimension");
  app.add_option("--lambda", g.cfg.lambda, "ridge regularizer");
  app.add_option("--alpha", g.cfg.alpha, "span bonus weight");
  app.add_option("--chains", g.cfg.n_chains, "corpus chain count");
  app.add_option("--meto-passes", g.cfg.meto_passes,
                 "sweeps per edit in repeated-edit mode");
  app.add_flag("--fake-facts,!--no-fake-facts", g.cfg.fake_facts,
               "append a counterfactual future fact per chain");
  app.add_option("--extension-years", g.cfg.extension_years,
                 "span growth for extending edits");

  std::string facts_path, chains_path, out_path, out_dir, model_path;
  std::string dataset_path, record_id, method = "r1", log_path, md_path;
  std::string base_path, enh_path;
  bool meto = false;

  auto* ingest = app.add_subcommand("ingest", "parse facts into chains");
  ingest->add_option("--facts", facts_path, "TSV fact file")->required();
  ingest->add_option("--out", out_path, "chains JSON output");

  auto* gen = app.add_subcommand("gen-corpus", "emit the synthetic corpus");
  gen->add_option("--out", out_path, "facts TSV output")->required();

  auto* build = app.add_subcommand("build", "build benchmark datasets");
  build->add_option("--chains", chains_path, "chains JSON")->required();
  build->add_option("--model", model_path, "model for time location");
  build->add_option("--out-dir", out_dir, "dataset directory")->required();

  auto* init = app.add_subcommand("init-model", "initialize the reference model");
  init->add_option("--chains", chains_path, "chains JSON")->required();
  init->add_option("--out", out_path, "model file")->required();

  auto* edit = app.add_subcommand("edit", "apply one record's edits");
  edit->add_option("--model", model_path, "input model")->required();
  edit->add_option("--dataset", dataset_path, "benchmark JSONL")->required();
  edit->add_option("--record", record_id, "chain_id to apply");
  edit->add_option("--method", method, "cft | r1 | batch");
  edit->add_flag("--meto", meto, "repeated-edit wrapper");
  edit->add_option("--out", out_path, "edited model file");
  edit->add_option("--log", log_path, "edit log JSONL");

  auto* ev = app.add_subcommand("eval", "edit and score a dataset");
  ev->add_option("--model", model_path, "base model")->required();
  ev->add_option("--dataset", dataset_path, "benchmark JSONL")->required();
  ev->add_option("--method", method, "cft | r1 | batch");
  ev->add_flag("--meto", meto, "repeated-edit wrapper");
  ev->add_option("--out", out_path, "report JSON");
  ev->add_option("--md", md_path, "report markdown");

  auto* suite = app.add_subcommand("run-suite", "full benchmark sweep");
  suite->add_option("--out-dir", out_dir, "artifact directory");

  auto* cmp = app.add_subcommand("compare", "metric deltas between reports");
  cmp->add_option("--base", base_path, "baseline report JSON")->required();
  cmp->add_option("--enhanced", enh_path, "enhanced report JSON")->required();
  cmp->add_option("--out", out_path, "delta JSON");
  cmp->add_option("--md", md_path, "delta markdown");

  CLI11_PARSE(app, argc, argv);

  try {
    load_config(g);
    if (ingest->parsed()) return cmd_ingest(g, facts_path, out_path);
    if (gen->parsed()) return cmd_gen_corpus(g, out_path);
    if (build->parsed()) return cmd_build(g, chains_path, model_path, out_dir);
    if (init->parsed()) return cmd_init_model(g, chains_path, out_path);
    if (edit->parsed())
      return cmd_edit(g, model_path, dataset_path, record_id, method, meto,
                      out_path, log_path);
    if (ev->parsed())
      return cmd_eval(g, model_path, dataset_path, method, meto, out_path,
                      md_path);
    if (suite->parsed()) return cmd_run_suite(g, out_dir);
    if (cmp->parsed()) return cmd_compare(base_path, enh_path, out_path, md_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
