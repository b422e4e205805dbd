#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <json.hpp>

#include "tke/alias.hpp"
#include "tke/edit_op.hpp"
#include "tke/model.hpp"

namespace tke {

enum class TargetTag {
  current_object,
  historical_object,
  current_relative,
  previous_relative,
  span_start,
  span_end,
};

inline const char* tag_name(TargetTag tag) {
  switch (tag) {
    case TargetTag::current_object: return "current_object";
    case TargetTag::historical_object: return "historical_object";
    case TargetTag::current_relative: return "current_relative";
    case TargetTag::previous_relative: return "previous_relative";
    case TargetTag::span_start: return "span_start";
    case TargetTag::span_end: return "span_end";
  }
  return "unknown";
}

struct TargetProvenance {
  std::string subject;
  std::string relation;
  std::string object;
  std::string time;  // year, span, CURRENT, or PREVIOUS
};

struct EditTarget {
  Eigen::VectorXd key;
  Eigen::VectorXd value;
  TargetTag tag = TargetTag::current_object;
  TargetProvenance provenance;
};

struct EditorConfig {
  enum class Method { cft, r1, batch };
  Method method = Method::r1;
  struct Cft {
    int steps = 50;
    double learning_rate = 0.05;
    double eps = 0.1;  // Frobenius budget for the weight change
  } cft;
  struct Batch {
    double lambda_e = 1e-8;
  } batch;
  bool meto = false;
  int meto_passes = 16;
};

inline EditorConfig::Method method_from_string(const std::string& name) {
  if (name == "cft") return EditorConfig::Method::cft;
  if (name == "r1") return EditorConfig::Method::r1;
  if (name == "batch") return EditorConfig::Method::batch;
  throw std::runtime_error("unknown editor method: " + name);
}

inline const char* method_name(EditorConfig::Method m) {
  switch (m) {
    case EditorConfig::Method::cft: return "cft";
    case EditorConfig::Method::r1: return "r1";
    case EditorConfig::Method::batch: return "batch";
  }
  return "unknown";
}

struct EditLogEntry {
  std::string target_tag;
  TargetProvenance provenance;
  double pre_residual = 0.0;
  double post_residual = 0.0;
  bool skipped = false;
  std::string note;
};

struct EditLog {
  std::vector<EditLogEntry> entries;

  void add(const EditLogEntry& e) { entries.push_back(e); }

  nlohmann::ordered_json entry_json(const EditLogEntry& e) const {
    nlohmann::ordered_json j;
    j["target_tag"] = e.target_tag;
    j["provenance"] = {{"s", e.provenance.subject},
                       {"r", e.provenance.relation},
                       {"o", e.provenance.object},
                       {"time", e.provenance.time}};
    j["pre_residual"] = e.pre_residual;
    j["post_residual"] = e.post_residual;
    j["skipped"] = e.skipped;
    if (!e.note.empty()) j["note"] = e.note;
    return j;
  }

  std::string to_jsonl() const {
    std::ostringstream out;
    for (const auto& e : entries) out << entry_json(e).dump() << "\n";
    return out.str();
  }

  std::uint64_t hash() const { return fnv1a64(to_jsonl()); }
};

// --- target compilation -----------------------------------------------------

namespace detail {

inline EditTarget make_target(Eigen::VectorXd key, Eigen::VectorXd value,
                              TargetTag tag, const std::string& s,
                              const std::string& r, const std::string& o,
                              std::string time) {
  EditTarget t;
  t.key = std::move(key);
  t.value = std::move(value);
  t.tag = tag;
  t.provenance = {s, r, o, std::move(time)};
  return t;
}

}  // namespace detail

// New-knowledge targets for a fact: one object key per year of its span,
// span boundaries, and the CURRENT association last.
inline std::vector<EditTarget> current_part_targets(const LamModel& model,
                                                    const TemporalFact& fact) {
  std::vector<EditTarget> out;
  const auto& s = fact.subject;
  const auto& r = fact.relation;
  const auto& o = fact.object;
  const Eigen::VectorXd e_o = model.entities().vec(o);
  const int last = fact.effective_end(model.config().horizon);
  for (int y = fact.t_start; y <= last; ++y)
    out.push_back(detail::make_target(model.obj_key(s, r, y), e_o,
                                      TargetTag::current_object, s, r, o,
                                      std::to_string(y)));
  out.push_back(detail::make_target(
      model.span_key(s, r, o, false), model.times().vec(model.year_token(fact.t_start)),
      TargetTag::span_start, s, r, o, "span_start=" + std::to_string(fact.t_start)));
  out.push_back(detail::make_target(
      model.span_key(s, r, o, true), model.times().vec(model.year_token(last)),
      TargetTag::span_end, s, r, o, "span_end=" + std::to_string(last)));
  out.push_back(detail::make_target(model.obj_key(s, r, kCurrentToken), e_o,
                                    TargetTag::current_relative, s, r, o,
                                    kCurrentToken));
  return out;
}

// Historical re-assertion targets for a superseded fact: object keys over its
// years short of the boundary year, its closed span, and PREVIOUS.
inline std::vector<EditTarget> historical_part_targets(const LamModel& model,
                                                       const TemporalFact& fact) {
  std::vector<EditTarget> out;
  const auto& s = fact.subject;
  const auto& r = fact.relation;
  const auto& o = fact.object;
  const Eigen::VectorXd e_o = model.entities().vec(o);
  const int end = fact.effective_end(model.config().horizon);
  const int last = std::max(fact.t_start, end - 1);
  for (int y = fact.t_start; y <= last; ++y)
    out.push_back(detail::make_target(model.obj_key(s, r, y), e_o,
                                      TargetTag::historical_object, s, r, o,
                                      std::to_string(y)));
  out.push_back(detail::make_target(
      model.span_key(s, r, o, false), model.times().vec(model.year_token(fact.t_start)),
      TargetTag::span_start, s, r, o, "span_start=" + std::to_string(fact.t_start)));
  out.push_back(detail::make_target(
      model.span_key(s, r, o, true), model.times().vec(model.year_token(end)),
      TargetTag::span_end, s, r, o, "span_end=" + std::to_string(end)));
  out.push_back(detail::make_target(model.obj_key(s, r, kPreviousToken), e_o,
                                    TargetTag::previous_relative, s, r, o,
                                    kPreviousToken));
  return out;
}

// Targets for an extending edit: object keys over the newly covered years,
// the moved span end, and CURRENT re-asserted.
inline std::vector<EditTarget> extension_targets(const LamModel& model,
                                                 const EditOp& op) {
  std::vector<EditTarget> out;
  const auto& horizon = model.config().horizon;
  const auto& s = op.subject;
  const auto& r = op.relation;
  const auto& o = op.new_fact.object;
  const Eigen::VectorXd e_o = model.entities().vec(o);
  const int old_end = op.old_fact.t_end.value_or(horizon.hi);
  const int new_end = op.new_fact.t_end.value_or(horizon.hi);
  for (int y = old_end + 1; y <= new_end; ++y)
    out.push_back(detail::make_target(model.obj_key(s, r, y), e_o,
                                      TargetTag::current_object, s, r, o,
                                      std::to_string(y)));
  out.push_back(detail::make_target(
      model.span_key(s, r, o, true), model.times().vec(model.year_token(new_end)),
      TargetTag::span_end, s, r, o, "span_end=" + std::to_string(new_end)));
  out.push_back(detail::make_target(model.obj_key(s, r, kCurrentToken), e_o,
                                    TargetTag::current_relative, s, r, o,
                                    kCurrentToken));
  return out;
}

enum class CompileMode { baseline, meto_current_part };

// Baseline compilation emits only new-knowledge targets; nothing re-asserts
// the superseded fact. meto_current_part is the current-fact half reused by
// the joint METO compilation.
inline std::vector<EditTarget> compile_targets(const LamModel& model,
                                               const EditOp& op, CompileMode) {
  if (is_extending(op, model.config().horizon))
    return extension_targets(model, op);
  return current_part_targets(model, span_as_fact(op, op.new_fact));
}

// --- model-time location + METO extraction ----------------------------------

// Latest-to-earliest scan; the first fact whose explicit midpoint query
// returns its own object (alias-aware) is the model time.
inline std::optional<int> locate_model_time(const LamModel& model,
                                            const FactChain& chain,
                                            const AliasTable& aliases = {}) {
  for (int i = int(chain.facts.size()) - 1; i >= 0; --i) {
    const auto& fact = chain.facts[i];
    const int y = midpoint_year(fact, model.config().horizon);
    try {
      const Answer a =
          model.query({chain.subject, chain.relation, TimeRef::of_year(y)});
      if (match_answer(a.object, fact.object, aliases)) return i;
    } catch (const std::exception&) {
      // unknown vocabulary counts as a miss
    }
  }
  return std::nullopt;
}

struct MetoTargets {
  std::vector<TemporalFact> c_m;
  std::vector<TemporalFact> c_m_plus;
  std::vector<EditTarget> c_t;
  std::vector<int> step_offsets;  // c_t slice boundaries, one slice per step

  int steps() const {
    return step_offsets.empty() ? 0 : int(step_offsets.size()) - 1;
  }

  std::vector<EditTarget> step(int k) const {
    return {c_t.begin() + step_offsets.at(k), c_t.begin() + step_offsets.at(k + 1)};
  }
};

inline MetoTargets meto_extract(const LamModel& model, const FactChain& chain,
                                const AliasTable& aliases = {}) {
  const auto idx = locate_model_time(model, chain, aliases);
  if (!idx)
    throw std::runtime_error("model time not located for chain (" +
                             chain.subject + ", " + chain.relation + ")");
  MetoTargets t;
  t.c_m.push_back(chain.facts[*idx]);
  for (std::size_t i = *idx + 1; i < chain.facts.size(); ++i)
    t.c_m_plus.push_back(chain.facts[i]);
  return t;
}

// Fill c_t: one step per newly captured fact, each step re-asserting the
// predecessor (historical years, closed span, PREVIOUS) before installing the
// new fact (years, span, CURRENT). PREVIOUS re-points per step.
inline void meto_compile(MetoTargets& targets, const LamModel& model) {
  targets.c_t.clear();
  targets.step_offsets.clear();
  targets.step_offsets.push_back(0);
  if (targets.c_m.empty()) throw std::runtime_error("meto_compile: empty c_m");

  std::vector<TemporalFact> facts = targets.c_m;
  facts.insert(facts.end(), targets.c_m_plus.begin(), targets.c_m_plus.end());

  auto append = [&](std::vector<EditTarget> part) {
    for (auto& t : part) targets.c_t.push_back(std::move(t));
  };

  if (targets.c_m_plus.empty()) {
    append(historical_part_targets(model, facts[0]));
    targets.step_offsets.push_back(int(targets.c_t.size()));
    return;
  }

  for (std::size_t k = 1; k < facts.size(); ++k) {
    TemporalFact hist = facts[k - 1];
    if (!hist.t_end) hist.t_end = facts[k].t_start;
    append(historical_part_targets(model, hist));
    append(current_part_targets(model, facts[k]));
    targets.step_offsets.push_back(int(targets.c_t.size()));
  }
}

// --- editors -----------------------------------------------------------------

namespace detail {

inline double residual(const Eigen::MatrixXd& W, const EditTarget& t) {
  return (W * t.key - t.value).norm();
}

// Rank-one Cholesky update: L·Lᵀ + x·xᵀ, in place.
inline void chol_update(Eigen::MatrixXd& L, Eigen::VectorXd x) {
  const int n = int(L.rows());
  for (int k = 0; k < n; ++k) {
    const double lkk = L(k, k);
    const double r = std::sqrt(lkk * lkk + x(k) * x(k));
    const double c = r / lkk;
    const double s = x(k) / lkk;
    L(k, k) = r;
    if (k + 1 < n) {
      L.col(k).tail(n - k - 1) =
          (L.col(k).tail(n - k - 1) + s * x.tail(n - k - 1)) / c;
      x.tail(n - k - 1) =
          c * x.tail(n - k - 1) - s * L.col(k).tail(n - k - 1);
    }
  }
}

inline void require_targets(const std::vector<EditTarget>& targets) {
  if (targets.empty()) throw std::runtime_error("editor requires targets");
}

}  // namespace detail

// Sequential preconditioned rank-one insertions sharing one Cholesky factor
// of C; the factor is kept current as C absorbs the inserted keys.
inline void edit_r1_with_factor(LamModel& model,
                                const std::vector<EditTarget>& targets,
                                Eigen::MatrixXd& L, EditLog& log) {
  detail::require_targets(targets);
  auto& W = model.W();
  auto solve = [&L](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = L.triangularView<Eigen::Lower>().solve(x);
    return Eigen::VectorXd(
        L.transpose().triangularView<Eigen::Upper>().solve(y));
  };
  for (const auto& t : targets) {
    EditLogEntry e;
    e.target_tag = tag_name(t.tag);
    e.provenance = t.provenance;
    e.pre_residual = detail::residual(W, t);
    const Eigen::VectorXd u = solve(t.key);
    const double den = u.dot(t.key);
    if (std::abs(den) < 1e-12) {
      e.skipped = true;
      e.note = "singular direction";
      e.post_residual = e.pre_residual;
      log.add(e);
      continue;
    }
    W += (t.value - W * t.key) * (u / den).transpose();
    e.post_residual = detail::residual(W, t);
    log.add(e);
  }
  for (const auto& t : targets) {
    model.C() += t.key * t.key.transpose();
    detail::chol_update(L, t.key);
  }
}

inline void edit_r1(LamModel& model, const std::vector<EditTarget>& targets,
                    EditLog& log) {
  detail::require_targets(targets);
  Eigen::LLT<Eigen::MatrixXd> llt(model.C());
  Eigen::MatrixXd L = llt.matrixL();
  edit_r1_with_factor(model, targets, L, log);
}

// Closed-form batch insertion: ΔW = R·K*ᵀ·(C + K*K*ᵀ + λ_e·I)⁻¹.
inline void edit_batch(LamModel& model, const std::vector<EditTarget>& targets,
                       const EditorConfig& cfg, EditLog& log) {
  detail::require_targets(targets);
  const int d = model.config().d;
  const int m = int(targets.size());
  if (m > d)
    throw std::runtime_error("batch edit capacity exceeded: " +
                             std::to_string(m) + " targets at d=" +
                             std::to_string(d));
  auto& W = model.W();
  Eigen::MatrixXd K(d, m), V(d, m);
  for (int i = 0; i < m; ++i) {
    K.col(i) = targets[i].key;
    V.col(i) = targets[i].value;
  }
  std::vector<double> pre(m);
  for (int i = 0; i < m; ++i) pre[i] = detail::residual(W, targets[i]);

  const Eigen::MatrixXd R = V - W * K;
  const Eigen::MatrixXd M =
      model.C() + K * K.transpose() +
      cfg.batch.lambda_e * Eigen::MatrixXd::Identity(d, d);
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  const Eigen::MatrixXd X = llt.solve(K);
  const double solve_residual = (M * X - K).norm() / std::max(1.0, K.norm());
  W += R * X.transpose();
  model.C() += K * K.transpose();

  for (int i = 0; i < m; ++i) {
    EditLogEntry e;
    e.target_tag = tag_name(targets[i].tag);
    e.provenance = targets[i].provenance;
    e.pre_residual = pre[i];
    e.post_residual = detail::residual(W, targets[i]);
    if (i == 0 && solve_residual > 1e-6) {
      std::ostringstream note;
      note << "numerical warning: solve residual " << solve_residual;
      e.note = note.str();
    }
    log.add(e);
  }
}

// Norm-budgeted gradient descent on the target least squares. The update is
// tracked in factored form ΔW = U·Kᵀ, which keeps every step in O(m²·d).
inline void edit_cft(LamModel& model, const std::vector<EditTarget>& targets,
                     const EditorConfig& cfg, EditLog& log) {
  detail::require_targets(targets);
  if (cfg.cft.eps <= 0.0) throw std::runtime_error("cft eps must be positive");
  if (cfg.cft.steps < 1) throw std::runtime_error("cft steps must be >= 1");
  const int d = model.config().d;
  const int m = int(targets.size());
  auto& W = model.W();
  Eigen::MatrixXd K(d, m), V(d, m);
  for (int i = 0; i < m; ++i) {
    K.col(i) = targets[i].key;
    V.col(i) = targets[i].value;
  }
  std::vector<double> pre(m);
  for (int i = 0; i < m; ++i) pre[i] = detail::residual(W, targets[i]);

  const Eigen::MatrixXd G = K.transpose() * K;         // m×m
  const Eigen::MatrixXd R0 = V - W * K;                // d×m residuals at U=0
  Eigen::MatrixXd U = Eigen::MatrixXd::Zero(d, m);
  bool aborted = false;
  for (int step = 0; step < cfg.cft.steps; ++step) {
    const Eigen::MatrixXd E = U * G - R0;  // per-target residual matrix
    const double loss = E.squaredNorm();
    if (!std::isfinite(loss)) {
      aborted = true;
      break;
    }
    U -= (2.0 * cfg.cft.learning_rate) * E;
    const double norm = std::sqrt(
        std::max(0.0, (U * G).cwiseProduct(U).sum()));  // ‖U·Kᵀ‖_F
    if (!std::isfinite(norm)) {
      aborted = true;
      break;
    }
    if (norm > cfg.cft.eps) U *= cfg.cft.eps / norm;
  }
  if (aborted) {
    EditLogEntry e;
    e.target_tag = "abort";
    e.provenance = targets.front().provenance;
    e.skipped = true;
    e.note = "diverged to non-finite values; model restored";
    log.add(e);
    return;
  }
  W += U * K.transpose();
  for (int i = 0; i < m; ++i) {
    EditLogEntry e;
    e.target_tag = tag_name(targets[i].tag);
    e.provenance = targets[i].provenance;
    e.pre_residual = pre[i];
    e.post_residual = detail::residual(W, targets[i]);
    log.add(e);
  }
}

// --- application -------------------------------------------------------------

struct EditPlan {
  std::vector<std::vector<EditTarget>> steps;
  std::optional<MetoTargets> meto;
};

// Reconstruct the chain segment a record's edits describe: the first edit's
// old fact followed by each edit's new fact.
inline FactChain chain_from_edits(const std::vector<EditOp>& edits) {
  FactChain chain;
  chain.subject = edits.front().subject;
  chain.relation = edits.front().relation;
  chain.facts.push_back(span_as_fact(edits.front(), edits.front().old_fact));
  for (const auto& op : edits)
    chain.facts.push_back(span_as_fact(op, op.new_fact));
  return chain;
}

inline EditPlan make_edit_plan(const LamModel& model,
                               const std::vector<EditOp>& edits,
                               const EditorConfig& cfg,
                               const AliasTable& aliases = {}) {
  EditPlan plan;
  if (edits.empty()) return plan;
  const auto& horizon = model.config().horizon;
  if (!cfg.meto) {
    for (const auto& op : edits)
      plan.steps.push_back(compile_targets(model, op, CompileMode::baseline));
    return plan;
  }
  if (edits.size() == 1 && is_extending(edits.front(), horizon)) {
    plan.steps.push_back(extension_targets(model, edits.front()));
    return plan;
  }
  MetoTargets targets = meto_extract(model, chain_from_edits(edits), aliases);
  meto_compile(targets, model);
  for (int k = 0; k < targets.steps(); ++k) plan.steps.push_back(targets.step(k));
  plan.meto = std::move(targets);
  return plan;
}

// One edit step: a single editor invocation, or meto_passes repeated sweeps
// under METO. Repeated sweeps converge on the joint interpolant over the
// step's whole target set instead of leaving only the last-written group
// intact. Non-final sweeps log only anomalies.
inline void apply_step(LamModel& model, const std::vector<EditTarget>& targets,
                       const EditorConfig& cfg, EditLog& log) {
  const Eigen::MatrixXd W0 = model.W();
  const Eigen::MatrixXd C0 = model.C();
  const int passes = cfg.meto ? std::max(1, cfg.meto_passes) : 1;
  try {
    std::optional<Eigen::MatrixXd> factor;
    if (cfg.method == EditorConfig::Method::r1) {
      Eigen::LLT<Eigen::MatrixXd> llt(model.C());
      factor = Eigen::MatrixXd(llt.matrixL());
    }
    for (int pass = 0; pass < passes; ++pass) {
      EditLog sweep;
      switch (cfg.method) {
        case EditorConfig::Method::cft:
          edit_cft(model, targets, cfg, sweep);
          break;
        case EditorConfig::Method::r1:
          edit_r1_with_factor(model, targets, *factor, sweep);
          break;
        case EditorConfig::Method::batch:
          edit_batch(model, targets, cfg, sweep);
          break;
      }
      const bool last = pass + 1 == passes;
      for (const auto& e : sweep.entries)
        if (last || e.skipped || !e.note.empty()) log.add(e);
    }
  } catch (...) {
    model.W() = W0;
    model.C() = C0;
    throw;
  }
}

inline EditLog apply_edit(LamModel& model, const std::vector<EditOp>& edits,
                          const EditorConfig& cfg, const AliasTable& aliases = {}) {
  EditLog log;
  const EditPlan plan = make_edit_plan(model, edits, cfg, aliases);
  for (const auto& step : plan.steps) apply_step(model, step, cfg, log);
  return log;
}

inline EditLog apply_edit(LamModel& model, const EditOp& op,
                          const EditorConfig& cfg, const AliasTable& aliases = {}) {
  return apply_edit(model, std::vector<EditOp>{op}, cfg, aliases);
}

}
