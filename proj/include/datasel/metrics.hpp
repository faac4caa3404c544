#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "datasel/corpus.hpp"
#include "datasel/lda.hpp"
#include "datasel/repr.hpp"
#include "datasel/util.hpp"

namespace datasel {

// ---------------------------------------------------------------------------
// Similarity measures between discrete distributions / vectors.
// Divergences use the natural logarithm throughout.
// ---------------------------------------------------------------------------

inline void check_same_dim(std::size_t a, std::size_t b, const char* what) {
  require(a == b, what, ": dimension mismatch (", a, " vs ", b, ")");
}

// Adds epsilon to every entry and renormalizes.
inline ProbVector epsilon_smooth(const ProbVector& p, double epsilon) {
  require(epsilon > 0.0, "epsilon_smooth: epsilon must be > 0");
  std::vector<double> q(p.p);
  const double total = 1.0 + epsilon * static_cast<double>(q.size());
  for (double& x : q) x = (x + epsilon) / total;
  return ProbVector(std::move(q));
}

// (1/2)[KL(P||M) + KL(Q||M)] with M = (P+Q)/2; 0*ln(0/x) terms are 0.
// Bounded by ln 2.
inline double jensen_shannon(const ProbVector& p, const ProbVector& q) {
  check_same_dim(p.size(), q.size(), "jensen_shannon");
  double kl_pm = 0.0, kl_qm = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_pm += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) kl_qm += q[i] * std::log(q[i] / m);
  }
  return 0.5 * (kl_pm + kl_qm);
}

// (1/(alpha-1)) ln(sum p_i^alpha / q_i^(alpha-1)). Both inputs are
// epsilon-smoothed first; the raw form is undefined where q_i = 0.
inline double renyi_divergence(const ProbVector& p, const ProbVector& q, double alpha,
                               double epsilon = 1e-10) {
  check_same_dim(p.size(), q.size(), "renyi_divergence");
  require(alpha != 1.0, "renyi_divergence: alpha must differ from 1");
  const ProbVector ps = epsilon_smooth(p, epsilon);
  const ProbVector qs = epsilon_smooth(q, epsilon);
  double sum = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    sum += std::pow(ps[i], alpha) / std::pow(qs[i], alpha - 1.0);
  }
  return std::log(sum) / (alpha - 1.0);
}

// ln(sum sqrt(P_i Q_i)), kept with this sign convention: identical
// distributions give 0, divergent pairs go negative. Disjoint supports are
// clamped at -ln(1/epsilon).
inline double bhattacharyya(const ProbVector& p, const ProbVector& q, double epsilon = 1e-10) {
  check_same_dim(p.size(), q.size(), "bhattacharyya");
  double coef = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) coef += std::sqrt(p[i] * q[i]);
  const double floor = -std::log(1.0 / epsilon);
  if (coef <= epsilon) return floor;
  return std::max(std::log(coef), floor);
}

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
  check_same_dim(u.size(), v.size(), "cosine_similarity");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  require(nu > 0.0 && nv > 0.0, "cosine_similarity: zero vector");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline double euclidean_distance(const std::vector<double>& u, const std::vector<double>& v) {
  check_same_dim(u.size(), v.size(), "euclidean_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double variational_distance(const std::vector<double>& u, const std::vector<double>& v) {
  check_same_dim(u.size(), v.size(), "variational_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += std::abs(u[i] - v[i]);
  return s;
}

// ---------------------------------------------------------------------------
// Diversity measures over an example's word types.
// ---------------------------------------------------------------------------

inline double shannon_entropy(const ProbVector& p) {
  double h = 0.0;
  for (double x : p.p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

inline double simpson_index(const ProbVector& p) {
  double s = 0.0;
  for (double x : p.p) s += x * x;
  return -s;
}

// (1/(alpha-1)) ln(sum p_i^alpha), as written; the sign is absorbed by the
// learned weights.
inline double renyi_entropy(const ProbVector& p, double alpha) {
  require(alpha != 1.0, "renyi_entropy: alpha must differ from 1");
  double s = 0.0;
  for (double x : p.p) {
    if (x > 0.0) s += std::pow(x, alpha);
  }
  return std::log(s) / (alpha - 1.0);
}

struct DiversityFeatures {
  double num_types = 0.0;
  double type_token_ratio = 0.0;
  double entropy = 0.0;
  double simpson = 0.0;
  double renyi = 0.0;
  double quadratic = 0.0;

  std::vector<double> as_vector() const {
    return {num_types, type_token_ratio, entropy, simpson, renyi, quadratic};
  }
};

// #types and TTR count raw token types. The probability-based measures use
// the corpus-level p(w) of the example's in-vocabulary types, renormalized
// over those types. Quadratic entropy sums cos(v_i, v_j) p_i p_j over all
// ordered type pairs (diagonal included); pairs lacking usable embeddings
// are skipped.
inline DiversityFeatures diversity_features(const std::vector<std::string>& tokens,
                                            const Vocabulary& vocab,
                                            const EmbeddingTable* table, double alpha = 0.99) {
  require(!tokens.empty(), "diversity_features: empty token sequence");
  std::set<std::string> types(tokens.begin(), tokens.end());

  DiversityFeatures out;
  out.num_types = static_cast<double>(types.size());
  out.type_token_ratio = out.num_types / static_cast<double>(tokens.size());

  std::vector<const std::string*> in_vocab;
  std::vector<double> probs;
  for (const auto& t : types) {
    if (auto p = vocab.prob_of(t)) {
      in_vocab.push_back(&t);
      probs.push_back(*p);
    }
  }
  require(!in_vocab.empty(), "diversity_features: no in-vocabulary types");
  const ProbVector p = ProbVector::from_counts(probs);

  out.entropy = shannon_entropy(p);
  out.simpson = simpson_index(p);
  out.renyi = renyi_entropy(p, alpha);

  if (table && table->size() > 0) {
    std::vector<const DenseVector*> vecs(in_vocab.size(), nullptr);
    std::vector<double> norms(in_vocab.size(), 0.0);
    for (std::size_t i = 0; i < in_vocab.size(); ++i) {
      if (const DenseVector* v = table->find(*in_vocab[i])) {
        double n2 = 0.0;
        for (double x : *v) n2 += x * x;
        if (n2 > 0.0) {
          vecs[i] = v;
          norms[i] = std::sqrt(n2);
        }
      }
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      if (!vecs[i]) continue;
      for (std::size_t j = 0; j < vecs.size(); ++j) {
        if (!vecs[j]) continue;
        double dot = 0.0;
        for (std::size_t d = 0; d < vecs[i]->size(); ++d) dot += (*vecs[i])[d] * (*vecs[j])[d];
        quad += (dot / (norms[i] * norms[j])) * p[i] * p[j];
      }
    }
    out.quadratic = quad;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature bank assembly.
// ---------------------------------------------------------------------------

enum class ReprKind { term, topic, embedding };

// Distribution kinds get all six measures; embeddings may be negative, so
// they only get the three geometric ones.
inline std::vector<double> similarity_features(const ProbVector& example, const ProbVector& target,
                                               double alpha = 0.99, double epsilon = 1e-10) {
  return {jensen_shannon(example, target),
          renyi_divergence(example, target, alpha, epsilon),
          bhattacharyya(example, target, epsilon),
          cosine_similarity(example.p, target.p),
          euclidean_distance(example.p, target.p),
          variational_distance(example.p, target.p)};
}

inline std::vector<double> similarity_features(const DenseVector& example,
                                               const DenseVector& target) {
  return {cosine_similarity(example, target), euclidean_distance(example, target),
          variational_distance(example, target)};
}

inline std::vector<double> similarity_features(ReprKind kind, const std::vector<double>& example,
                                               const std::vector<double>& target,
                                               double alpha = 0.99, double epsilon = 1e-10) {
  if (kind == ReprKind::embedding) return similarity_features(example, target);
  return similarity_features(ProbVector(example), ProbVector(target), alpha, epsilon);
}

// Which feature sets enter the matrix. Column order is frozen (see
// column_names) and versioned through id() so persisted weight vectors stay
// aligned with the matrices they are applied to.
struct FeatureConfig {
  bool sim_term = true;
  bool sim_topic = false;
  bool sim_embedding = false;
  bool diversity = true;
  double renyi_alpha = 0.99;
  double epsilon = 1e-10;

  void validate() const {
    require(sim_term || sim_topic || sim_embedding || diversity,
            "FeatureConfig: no feature sets enabled");
    require(renyi_alpha != 1.0, "FeatureConfig: renyi_alpha must differ from 1");
    require(epsilon > 0.0, "FeatureConfig: epsilon must be > 0");
  }

  std::vector<std::string> sets() const {
    std::vector<std::string> s;
    if (sim_term) s.push_back("sim-term");
    if (sim_topic) s.push_back("sim-topic");
    if (sim_embedding) s.push_back("sim-emb");
    if (diversity) s.push_back("div");
    return s;
  }

  std::string id() const {
    std::ostringstream os;
    os << "fmt1;sets=" << join(sets(), "+") << ";alpha=" << renyi_alpha;
    return os.str();
  }

  std::vector<std::string> column_names() const {
    validate();
    std::vector<std::string> cols;
    const char* divergent[] = {"js", "renyi", "bhatt", "cos", "euc", "var"};
    if (sim_term) {
      for (const char* m : divergent) cols.push_back(std::string("sim_term_") + m);
    }
    if (sim_topic) {
      for (const char* m : divergent) cols.push_back(std::string("sim_topic_") + m);
    }
    if (sim_embedding) {
      for (const char* m : {"cos", "euc", "var"}) cols.push_back(std::string("sim_emb_") + m);
    }
    if (diversity) {
      for (const char* m : {"num_types", "ttr", "entropy", "simpson", "renyi", "quadratic"}) {
        cols.push_back(std::string("div_") + m);
      }
    }
    return cols;
  }
};

struct TargetRepresentation {
  std::optional<ProbVector> term;
  std::optional<ProbVector> topic;
  std::optional<DenseVector> embedding;
};

// z-normalized feature matrix phi(X) with the raw per-column statistics it
// was normalized with. Constant columns normalize to all zeros.
struct FeatureMatrix {
  std::string config_id;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
  Eigen::VectorXd mean;
  Eigen::VectorXd stdev;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  static FeatureMatrix from_raw(std::string config_id, std::vector<std::string> columns,
                                Eigen::MatrixXd raw,
                                const std::vector<std::string>* row_ids = nullptr) {
    require(static_cast<std::size_t>(raw.cols()) == columns.size(),
            "FeatureMatrix: column count mismatch");
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        if (!std::isfinite(raw(i, j))) {
          const std::string row = row_ids ? (*row_ids)[static_cast<std::size_t>(i)]
                                          : std::to_string(i);
          fail("FeatureMatrix: non-finite value in feature '", columns[static_cast<std::size_t>(j)],
               "' for example ", row);
        }
      }
    }
    FeatureMatrix fm;
    fm.config_id = std::move(config_id);
    fm.columns = std::move(columns);
    const auto n = static_cast<double>(raw.rows());
    fm.mean = raw.colwise().mean();
    fm.stdev = Eigen::VectorXd(raw.cols());
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
      const double var = (raw.col(j).array() - fm.mean(j)).square().sum() / n;
      const double sd = std::sqrt(var);
      if (sd < 1e-12) {
        fm.stdev(j) = 0.0;
        raw.col(j).setZero();
      } else {
        fm.stdev(j) = sd;
        raw.col(j) = (raw.col(j).array() - fm.mean(j)) / sd;
      }
    }
    fm.values = std::move(raw);
    return fm;
  }

  // Columnar text dump: config and stats as comment lines, then a header row
  // and one row per example id.
  std::string to_tsv(const std::vector<std::string>& ids) const {
    require(ids.size() == rows(), "FeatureMatrix::to_tsv: id count mismatch");
    std::ostringstream os;
    os << "#config\t" << config_id << "\n#mean";
    for (Eigen::Index j = 0; j < mean.size(); ++j) os << '\t' << mean(j);
    os << "\n#stdev";
    for (Eigen::Index j = 0; j < stdev.size(); ++j) os << '\t' << stdev(j);
    os << "\nid";
    for (const auto& c : columns) os << '\t' << c;
    os << '\n';
    for (std::size_t i = 0; i < rows(); ++i) {
      os << ids[i];
      for (std::size_t j = 0; j < cols(); ++j) os << '\t' << values(static_cast<Eigen::Index>(i),
                                                                    static_cast<Eigen::Index>(j));
      os << '\n';
    }
    return os.str();
  }
};

// Assembles the enabled feature columns for every pool example against the
// target representation, then z-normalizes with the pool's own statistics.
inline FeatureMatrix build_feature_matrix(const std::vector<Example>& pool,
                                          const Vocabulary& vocab, const LdaModel* lda,
                                          const EmbeddingTable* embeddings,
                                          const TargetRepresentation& target,
                                          const FeatureConfig& cfg) {
  cfg.validate();
  require(!pool.empty(), "build_feature_matrix: empty pool");
  if (cfg.sim_term) require(target.term.has_value(), "build_feature_matrix: missing target term representation");
  if (cfg.sim_topic) {
    require(lda != nullptr, "build_feature_matrix: topic features need an LDA model");
    require(target.topic.has_value(), "build_feature_matrix: missing target topic representation");
  }
  if (cfg.sim_embedding) {
    require(embeddings != nullptr, "build_feature_matrix: embedding features need an embedding table");
    require(target.embedding.has_value(), "build_feature_matrix: missing target embedding representation");
  }

  const auto columns = cfg.column_names();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(pool.size()),
                      static_cast<Eigen::Index>(columns.size()));
  std::vector<std::string> ids;
  ids.reserve(pool.size());

  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Example& ex = pool[i];
    ids.push_back(ex.id);
    Eigen::Index j = 0;
    auto put = [&](const std::vector<double>& vals) {
      for (double v : vals) raw(static_cast<Eigen::Index>(i), j++) = v;
    };
    try {
      if (cfg.sim_term) {
        put(similarity_features(term_distribution(ex.tokens, vocab), *target.term,
                                cfg.renyi_alpha, cfg.epsilon));
      }
      if (cfg.sim_topic) {
        put(similarity_features(infer_topics(*lda, ex.tokens, vocab), *target.topic,
                                cfg.renyi_alpha, cfg.epsilon));
      }
      if (cfg.sim_embedding) {
        put(similarity_features(embed_example(ex.tokens, *embeddings, vocab), *target.embedding));
      }
      if (cfg.diversity) {
        put(diversity_features(ex.tokens, vocab, embeddings, cfg.renyi_alpha).as_vector());
      }
    } catch (const Error& e) {
      fail("build_feature_matrix: example ", ex.id, ": ", e.what());
    }
  }
  return FeatureMatrix::from_raw(cfg.id(), columns, std::move(raw), &ids);
}

// ---------------------------------------------------------------------------
// Eq.-1 scoring: S = phi(X) w^T.
// ---------------------------------------------------------------------------

struct WeightVector {
  Eigen::VectorXd w;

  WeightVector() = default;
  explicit WeightVector(Eigen::VectorXd values) : w(std::move(values)) {
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      require(std::isfinite(w(i)) && w(i) >= -1.0 && w(i) <= 1.0,
              "WeightVector: entry ", i, " outside [-1, 1]");
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(w.size()); }
};

inline Eigen::VectorXd score_examples(const FeatureMatrix& matrix, const WeightVector& weights) {
  require(matrix.cols() == weights.size(), "score_examples: matrix has ", matrix.cols(),
          " columns but weight vector has ", weights.size());
  return matrix.values * weights.w;
}

}  // namespace datasel
