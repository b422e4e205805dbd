#pragma once

#include <algorithm>
#include <cstring>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "tke/codebook.hpp"
#include "tke/query.hpp"
#include "tke/rng.hpp"
#include "tke/temporal_kb.hpp"
#include "tke/version.hpp"

namespace tke {

inline constexpr const char* kCurrentToken = "CURRENT";
inline constexpr const char* kPreviousToken = "PREVIOUS";
inline constexpr const char* kSpanStartToken = "SPAN_START";
inline constexpr const char* kSpanEndToken = "SPAN_END";

struct ModelConfig {
  int d = 256;
  std::uint64_t seed = 42;
  double lambda = 7.68;  // ridge strength; auto_lambda(d) for other d
  double alpha = 0.4;    // span-consistency blend for explicit-year queries
  HorizonRange horizon{1900, 2028};
};

inline double auto_lambda(int d) { return 0.03 * d; }

struct Answer {
  std::string object;
  double score = 0.0;
  double runner_up_margin = 0.0;
};

struct SpanPrediction {
  int start = 0;
  int end = 0;
  bool low_confidence = false;
};

// Associative memory W over deterministic codebooks, with the key
// second-moment matrix C used by preconditioned editors.
class LamModel {
 public:
  LamModel(const ModelConfig& cfg, const std::vector<std::string>& entities,
           const std::vector<std::string>& relations)
      : cfg_(cfg),
        entities_(cfg.d, cfg.seed, "entity"),
        relations_(cfg.d, cfg.seed, "relation"),
        times_(cfg.d, cfg.seed, "time"),
        W_(Eigen::MatrixXd::Zero(cfg.d, cfg.d)),
        C_(Eigen::MatrixXd::Identity(cfg.d, cfg.d) * cfg.lambda) {
    for (int y = cfg.horizon.lo; y <= cfg.horizon.hi; ++y)
      times_.add(std::to_string(y));
    n_years_ = times_.size();
    times_.add(kCurrentToken);
    times_.add(kPreviousToken);
    times_.add(kSpanStartToken);
    times_.add(kSpanEndToken);
    for (const auto& e : entities) entities_.add(e);
    for (const auto& r : relations) relations_.add(r);
  }

  const ModelConfig& config() const { return cfg_; }
  const Codebook& entities() const { return entities_; }
  const Codebook& relations() const { return relations_; }
  const Codebook& times() const { return times_; }
  Eigen::MatrixXd& W() { return W_; }
  const Eigen::MatrixXd& W() const { return W_; }
  Eigen::MatrixXd& C() { return C_; }
  const Eigen::MatrixXd& C() const { return C_; }

  Eigen::VectorXd obj_key(const std::string& subject, const std::string& relation,
                          const std::string& time_token) const {
    Eigen::VectorXd k = entities_.vec(subject) + relations_.vec(relation) +
                        times_.vec(time_token);
    return k.normalized();
  }

  Eigen::VectorXd obj_key(const std::string& subject, const std::string& relation,
                          int year) const {
    return obj_key(subject, relation, year_token(year));
  }

  Eigen::VectorXd span_key(const std::string& subject, const std::string& relation,
                           const std::string& object, bool end_boundary) const {
    Eigen::VectorXd k = entities_.vec(subject) + relations_.vec(relation) +
                        entities_.vec(object) +
                        times_.vec(end_boundary ? kSpanEndToken : kSpanStartToken);
    return k.normalized();
  }

  std::string year_token(int year) const {
    if (year < cfg_.horizon.lo || year > cfg_.horizon.hi)
      throw std::runtime_error("year outside horizon: " + std::to_string(year));
    return std::to_string(year);
  }

  using InitFact = std::pair<TemporalFact, std::optional<std::string>>;

  // Ridge solution over the association set of the given model-time facts:
  // W = V·Kᵀ·(K·Kᵀ + λI)⁻¹, C = K·Kᵀ + λI. Replaces any prior state.
  void initialize_from_facts(const std::vector<InitFact>& facts) {
    std::vector<Eigen::VectorXd> keys;
    std::vector<Eigen::VectorXd> values;
    auto put = [&](Eigen::VectorXd k, Eigen::VectorXd v) {
      keys.push_back(std::move(k));
      values.push_back(std::move(v));
    };
    for (const auto& [fact, previous] : facts) {
      const auto& s = fact.subject;
      const auto& r = fact.relation;
      const Eigen::VectorXd e_o = entities_.vec(fact.object);
      const int last = fact.effective_end(cfg_.horizon);
      for (int y = fact.t_start; y <= last; ++y) put(obj_key(s, r, y), e_o);
      put(obj_key(s, r, kCurrentToken), e_o);
      if (previous) put(obj_key(s, r, kPreviousToken), entities_.vec(*previous));
      put(span_key(s, r, fact.object, false), times_.vec(year_token(fact.t_start)));
      put(span_key(s, r, fact.object, true), times_.vec(year_token(last)));
    }
    const int d = cfg_.d;
    const int m = int(keys.size());
    Eigen::MatrixXd K(d, m), V(d, m);
    for (int i = 0; i < m; ++i) {
      K.col(i) = keys[i];
      V.col(i) = values[i];
    }
    C_ = K * K.transpose() + cfg_.lambda * Eigen::MatrixXd::Identity(d, d);
    Eigen::LLT<Eigen::MatrixXd> llt(C_);
    W_ = llt.solve((V * K.transpose()).transpose()).transpose();
  }

  Answer query(const StructuredQuery& q) const {
    Eigen::VectorXd key;
    switch (q.time_ref.kind) {
      case TimeRef::Kind::year:
        key = obj_key(q.subject, q.relation, q.time_ref.year);
        break;
      case TimeRef::Kind::current:
        key = obj_key(q.subject, q.relation, kCurrentToken);
        break;
      case TimeRef::Kind::previous:
        key = obj_key(q.subject, q.relation, kPreviousToken);
        break;
    }
    const int n = entities_.size();
    if (n == 0) throw std::runtime_error("empty entity codebook");
    Eigen::VectorXd read = W_ * key;
    const double norm = read.norm();
    Eigen::VectorXd score;
    if (norm > 0.0)
      score = entities_.matrix().transpose() * (read / norm);
    else
      score = Eigen::VectorXd::Zero(n);

    if (q.time_ref.kind == TimeRef::Kind::year && cfg_.alpha > 0.0) {
      // Only candidates within alpha of the raw leader can change the
      // argmax, so span decoding is restricted to that shortlist.
      const double lead = score.maxCoeff();
      for (int i = 0; i < n; ++i) {
        if (score(i) < lead - cfg_.alpha - 1e-12) continue;
        const SpanPrediction span =
            predict_span(q.subject, q.relation, entities_.id(i));
        if (span.start <= q.time_ref.year && q.time_ref.year <= span.end)
          score(i) += cfg_.alpha;
      }
    }

    int best = 0;
    score.maxCoeff(&best);
    double runner = -2.0;
    for (int i = 0; i < n; ++i)
      if (i != best) runner = std::max(runner, score(i));
    Answer a;
    a.object = entities_.id(best);
    a.score = score(best);
    a.runner_up_margin = n > 1 ? score(best) - runner : 0.0;
    return a;
  }

  SpanPrediction predict_span(const std::string& subject,
                              const std::string& relation,
                              const std::string& object) const {
    const auto decode = [&](bool end_boundary) {
      Eigen::VectorXd read = W_ * span_key(subject, relation, object, end_boundary);
      const double norm = read.norm();
      if (norm == 0.0) return std::pair<int, double>{cfg_.horizon.lo, 0.0};
      Eigen::VectorXd score =
          times_.matrix().leftCols(n_years_).transpose() * (read / norm);
      int best = 0;
      const double top = score.maxCoeff(&best);
      return std::pair<int, double>{cfg_.horizon.lo + best, top};
    };
    const auto [start, start_score] = decode(false);
    const auto [end, end_score] = decode(true);
    SpanPrediction p;
    p.start = std::min(start, end);
    p.end = std::max(start, end);
    p.low_confidence = std::min(start_score, end_score) < 0.3;
    return p;
  }

  std::uint64_t state_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto fold = [&h](const void* data, std::size_t bytes) {
      h = fnv1a64(std::string_view(static_cast<const char*>(data), bytes), h);
    };
    fold(W_.data(), sizeof(double) * W_.size());
    fold(C_.data(), sizeof(double) * C_.size());
    for (const auto& id : entities_.ids()) h = fnv1a64(id, h);
    for (const auto& id : relations_.ids()) h = fnv1a64(id, h);
    return h;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out.write("TKEM", 4);
    detail_put(out, std::int32_t{model_format_version});
    detail_put(out, std::int32_t{cfg_.d});
    detail_put(out, std::uint64_t{cfg_.seed});
    detail_put(out, cfg_.lambda);
    detail_put(out, cfg_.alpha);
    detail_put(out, std::int32_t{cfg_.horizon.lo});
    detail_put(out, std::int32_t{cfg_.horizon.hi});
    detail_put_ids(out, entities_.ids());
    detail_put_ids(out, relations_.ids());
    detail_put_matrix(out, W_);
    detail_put_matrix(out, C_);
    if (!out) throw std::runtime_error("write failure: " + path);
  }

  static LamModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read model file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TKEM", 4) != 0)
      throw std::runtime_error("not a model file: " + path);
    const auto version = detail_get<std::int32_t>(in);
    if (version != model_format_version)
      throw std::runtime_error("unsupported model format version " +
                               std::to_string(version));
    ModelConfig cfg;
    cfg.d = detail_get<std::int32_t>(in);
    cfg.seed = detail_get<std::uint64_t>(in);
    cfg.lambda = detail_get<double>(in);
    cfg.alpha = detail_get<double>(in);
    cfg.horizon.lo = detail_get<std::int32_t>(in);
    cfg.horizon.hi = detail_get<std::int32_t>(in);
    const auto entities = detail_get_ids(in);
    const auto relations = detail_get_ids(in);
    LamModel model(cfg, entities, relations);
    detail_get_matrix(in, model.W_);
    detail_get_matrix(in, model.C_);
    if (!in) throw std::runtime_error("truncated model file: " + path);
    return model;
  }

 private:
  template <class T>
  static void detail_put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }

  template <class T>
  static T detail_get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("truncated model file");
    return v;
  }

  static void detail_put_ids(std::ostream& out, const std::vector<std::string>& ids) {
    detail_put(out, std::uint64_t{ids.size()});
    for (const auto& id : ids) {
      detail_put(out, std::uint64_t{id.size()});
      out.write(id.data(), std::streamsize(id.size()));
    }
  }

  static std::vector<std::string> detail_get_ids(std::istream& in) {
    const auto count = detail_get<std::uint64_t>(in);
    std::vector<std::string> ids(count);
    for (auto& id : ids) {
      const auto len = detail_get<std::uint64_t>(in);
      id.resize(len);
      in.read(id.data(), std::streamsize(len));
      if (!in) throw std::runtime_error("truncated model file");
    }
    return ids;
  }

  static void detail_put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    using RowMajor =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMajor r = m;
    out.write(reinterpret_cast<const char*>(r.data()),
              std::streamsize(sizeof(double) * r.size()));
  }

  static void detail_get_matrix(std::istream& in, Eigen::MatrixXd& m) {
    using RowMajor =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMajor r(m.rows(), m.cols());
    in.read(reinterpret_cast<char*>(r.data()),
            std::streamsize(sizeof(double) * r.size()));
    m = r;
  }

  ModelConfig cfg_;
  Codebook entities_;
  Codebook relations_;
  Codebook times_;
  int n_years_ = 0;
  Eigen::MatrixXd W_;
  Eigen::MatrixXd C_;
};

inline LamModel new_model(const ModelConfig& cfg,
                          const std::vector<std::string>& entities,
                          const std::vector<std::string>& relations) {
  if (cfg.d < 32)
    throw std::runtime_error("model dimension must be at least 32");
  if (cfg.lambda <= 0.0) throw std::runtime_error("lambda must be positive");
  if (cfg.horizon.lo > cfg.horizon.hi)
    throw std::runtime_error("empty horizon range");
  return LamModel(cfg, entities, relations);
}

}
