#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "datasel/bayesopt.hpp"
#include "datasel/corpus.hpp"
#include "datasel/metrics.hpp"
#include "datasel/tasks.hpp"
#include "datasel/util.hpp"

namespace datasel {

struct SelectionResult {
  std::vector<std::string> ids;   // ordered as selected
  std::vector<int> indices;       // positions in the pool, same order as ids
  std::vector<double> scores;     // score of each selected example
  std::string provenance;
};

inline std::vector<Example> gather(const std::vector<Example>& pool,
                                   const std::vector<int>& indices) {
  std::vector<Example> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(pool[static_cast<std::size_t>(i)]);
  return out;
}

namespace detail {

// Descending score, ties by ascending pool index.
inline std::vector<int> rank_descending(const Eigen::VectorXd& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  });
  return order;
}

}  // namespace detail

// Top-n by descending score with stable index tie-breaks. In stratified mode
// the quota is n/num_classes per class (remainder to the lexicographically
// earliest classes) and the merged result keeps global score order.
inline SelectionResult select_top_n(const Eigen::VectorXd& scores,
                                    const std::vector<Example>& pool, std::size_t n,
                                    const std::optional<std::vector<int>>& stratify_labels =
                                        std::nullopt) {
  require(static_cast<std::size_t>(scores.size()) == pool.size(),
          "select_top_n: score/pool size mismatch");
  require(n <= pool.size(), "select_top_n: n=", n, " exceeds pool size ", pool.size());
  const auto order = detail::rank_descending(scores);

  std::vector<int> picked;
  if (!stratify_labels) {
    picked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    const auto& labels = *stratify_labels;
    require(labels.size() == pool.size(), "select_top_n: label/pool size mismatch");
    std::map<int, std::size_t> quota;
    for (int l : labels) quota[l] = 0;
    const std::size_t classes = quota.size();
    std::size_t base = n / classes, rem = n % classes;
    for (auto& [label, q] : quota) {
      q = base + (rem > 0 ? 1 : 0);
      if (rem > 0) --rem;
    }
    std::map<int, std::size_t> taken;
    for (int idx : order) {
      const int label = labels[static_cast<std::size_t>(idx)];
      if (taken[label] < quota[label]) {
        picked.push_back(idx);
        ++taken[label];
      }
    }
    for (const auto& [label, q] : quota) {
      require(taken[label] == q, "select_top_n: class ", label, " has only ", taken[label],
              " examples, need ", q);
    }
    std::sort(picked.begin(), picked.end(), [&](int a, int b) {
      if (scores(a) != scores(b)) return scores(a) > scores(b);
      return a < b;
    });
  }

  SelectionResult out;
  out.indices = std::move(picked);
  out.ids.reserve(n);
  out.scores.reserve(n);
  for (int i : out.indices) {
    out.ids.push_back(pool[static_cast<std::size_t>(i)].id);
    out.scores.push_back(scores(i));
  }
  return out;
}

inline SelectionResult select_with_weights(const FeatureMatrix& matrix,
                                           const std::vector<Example>& pool, std::size_t n,
                                           const WeightVector& weights,
                                           const std::optional<std::vector<int>>& stratify_labels =
                                               std::nullopt) {
  auto result = select_top_n(score_examples(matrix, weights), pool, n, stratify_labels);
  std::ostringstream prov;
  prov << "weights;config=" << matrix.config_id;
  result.provenance = prov.str();
  return result;
}

// ---------------------------------------------------------------------------
// Baselines.
// ---------------------------------------------------------------------------

inline SelectionResult baseline_random(const std::vector<Example>& pool, std::size_t n,
                                       std::uint64_t seed) {
  require(n <= pool.size(), "baseline_random: n=", n, " exceeds pool size ", pool.size());
  Rng rng(seed);
  const auto picked = sample_without_replacement(pool.size(), n, rng);
  SelectionResult out;
  out.provenance = "random(seed=" + std::to_string(seed) + ")";
  for (auto i : picked) {
    out.indices.push_back(static_cast<int>(i));
    out.ids.push_back(pool[i].id);
    out.scores.push_back(0.0);
  }
  return out;
}

// The n examples most similar to the target by Jensen-Shannon divergence
// between term distributions (ascending divergence, index tie-breaks).
inline SelectionResult baseline_js_examples(const std::vector<Example>& pool,
                                            const ProbVector& target_term, std::size_t n,
                                            const Vocabulary& vocab) {
  require(n <= pool.size(), "baseline_js_examples: n=", n, " exceeds pool size ", pool.size());
  Eigen::VectorXd neg_js(static_cast<Eigen::Index>(pool.size()));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    neg_js(static_cast<Eigen::Index>(i)) =
        -jensen_shannon(term_distribution(pool[i].tokens, vocab), target_term);
  }
  auto out = select_top_n(neg_js, pool, n);
  for (double& s : out.scores) s = -s;  // report raw divergences
  out.provenance = "js-examples";
  return out;
}

// n examples sampled uniformly from the source domain whose aggregate term
// distribution is closest to the target by Jensen-Shannon divergence; domain
// ties go to the lexicographically smaller id.
inline SelectionResult baseline_js_domain(
    const std::map<std::string, const DomainCorpus*>& sources, const ProbVector& target_term,
    std::size_t n, std::uint64_t seed, const Vocabulary& vocab) {
  require(!sources.empty(), "baseline_js_domain: no source domains");
  std::string best_domain;
  double best_js = 0.0;
  for (const auto& [name, corpus] : sources) {  // std::map iterates in id order
    const double js = jensen_shannon(domain_representation(*corpus, vocab), target_term);
    if (best_domain.empty() || js < best_js) {
      best_domain = name;
      best_js = js;
    }
  }
  const DomainCorpus& chosen = *sources.at(best_domain);
  require(chosen.labeled.size() >= n, "baseline_js_domain: most similar domain '", best_domain,
          "' has ", chosen.labeled.size(), " labeled examples, need ", n);
  Rng rng(seed);
  const auto picked = sample_without_replacement(chosen.labeled.size(), n, rng);
  SelectionResult out;
  out.provenance = "js-domain(domain=" + best_domain + ",seed=" + std::to_string(seed) + ")";
  // indices refer to the chosen domain's labeled list
  for (auto i : picked) {
    out.indices.push_back(static_cast<int>(i));
    out.ids.push_back(chosen.labeled[i].id);
    out.scores.push_back(best_js);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Task training glue.
// ---------------------------------------------------------------------------

struct TaskSetup {
  TaskKind kind = TaskKind::sentiment;
  SentimentHyper sentiment;
  TaggerConfig tagger;
  std::size_t tfidf_features = 10000;
  std::string external_command;                     // {train}/{dev} placeholders
  TaskKind external_format = TaskKind::sentiment;   // file format for the hook
  std::string workdir = ".";
};

inline double train_and_evaluate(const TaskSetup& setup, std::vector<Example> train,
                                 const std::vector<Example>& eval_set, std::uint64_t seed) {
  require(!eval_set.empty(), "train_and_evaluate: empty evaluation set");
  // canonicalize by id so J depends on the selected set, not its ranking order
  std::sort(train.begin(), train.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  switch (setup.kind) {
    case TaskKind::sentiment: {
      auto vectorizer = TfidfVectorizer::fit(train, setup.tfidf_features);
      SentimentHyper hyper = setup.sentiment;
      hyper.seed = seed;
      auto model = LinearClassifier::train(train, vectorizer, hyper);
      return sentiment_accuracy(model, vectorizer, eval_set);
    }
    case TaskKind::pos: {
      TaggerConfig cfg = setup.tagger;
      cfg.seed = seed;
      auto model = PerceptronTagger::train(train, cfg);
      return tagging_accuracy(model, eval_set);
    }
    case TaskKind::external: {
      ExternalEvaluator evaluator(setup.external_command, setup.external_format, setup.workdir);
      return evaluator(train, eval_set);
    }
  }
  fail("train_and_evaluate: unknown task kind");
}

inline std::optional<std::vector<int>> stratify_labels_for(const TaskSetup& setup,
                                                           const std::vector<Example>& pool) {
  if (setup.kind != TaskKind::sentiment) return std::nullopt;
  std::vector<int> labels;
  labels.reserve(pool.size());
  for (const auto& ex : pool) labels.push_back(ex.polarity());
  return labels;
}

// The black-box objective: w -> J(model trained on the top n by Eq.-1 score,
// evaluated on the validation set). Deterministic for a fixed task seed.
inline BlackBoxObjective data_selection_objective(const FeatureMatrix& matrix,
                                                  const std::vector<Example>& pool, std::size_t n,
                                                  const TaskSetup& task,
                                                  const std::vector<Example>& validation,
                                                  std::uint64_t task_seed) {
  require(n <= pool.size(), "data_selection_objective: n=", n, " exceeds pool size ", pool.size());
  require(matrix.rows() == pool.size(), "data_selection_objective: matrix/pool size mismatch");
  require(!validation.empty(), "data_selection_objective: empty validation set");
  auto labels = stratify_labels_for(task, pool);
  return [&matrix, &pool, n, task, &validation, task_seed,
          labels = std::move(labels)](const Eigen::VectorXd& w) {
    const auto selection = select_with_weights(matrix, pool, n, WeightVector(w), labels);
    return train_and_evaluate(task, gather(pool, selection.indices), validation, task_seed);
  };
}

// ---------------------------------------------------------------------------
// Experiment drivers.
// ---------------------------------------------------------------------------

struct RunRow {
  std::uint64_t seed = 0;
  double value = 0.0;
  std::optional<double> validation;
};

struct ExperimentReport {
  std::string method;
  std::string target;
  std::string task;
  std::vector<RunRow> rows;
  double mean = 0.0;
  std::optional<double> variance;

  void finalize() {
    require(!rows.empty(), "ExperimentReport: no runs");
    std::vector<double> values;
    values.reserve(rows.size());
    for (const auto& r : rows) values.push_back(r.value);
    mean = mean_of(values);
    if (rows.size() > 1) {
      variance = sample_variance(values);
    } else {
      variance.reset();
    }
  }
};

struct WeightRun {
  std::uint64_t seed = 0;
  Eigen::VectorXd w;
  double validation = 0.0;
  double test = 0.0;
};

// Persisted product of a learned run: the per-seed weight vectors plus the
// feature-config identifier they are aligned with.
struct WeightArtifact {
  std::string config_id;
  std::string task;
  std::string target;
  std::vector<std::string> columns;
  std::vector<WeightRun> runs;
  std::size_t best_index = 0;  // argmax validation value

  const WeightRun& best() const {
    require(!runs.empty(), "WeightArtifact: no runs");
    return runs[best_index];
  }
};

struct RunContext {
  const std::vector<Example>* pool = nullptr;  // pooled source labeled examples
  std::map<std::string, const DomainCorpus*> sources;
  const DomainCorpus* target = nullptr;
  const Vocabulary* vocab = nullptr;
  const LdaModel* lda = nullptr;
  const EmbeddingTable* embeddings = nullptr;
  const Split* target_split = nullptr;  // validation + held-out test
  TargetRepresentation target_repr;
  FeatureConfig features;
  BoConfig bo;
  TaskSetup task;
  std::size_t selection_n = 0;
  std::vector<std::uint64_t> seeds;

  void validate() const {
    require(pool && !pool->empty(), "RunContext: empty pool");
    require(vocab, "RunContext: missing vocabulary");
    require(target_split && !target_split->validation.empty(),
            "RunContext: missing validation split");
    require(!target_split->pool.empty(), "RunContext: empty target test split");
    require(!seeds.empty(), "RunContext: no seeds");
    require(selection_n > 0, "RunContext: selection_n must be positive");
    require(target, "RunContext: missing target corpus");
  }

  FeatureMatrix build_matrix() const {
    return build_feature_matrix(*pool, *vocab, lda, embeddings, target_repr, features);
  }
};

struct LearnedSelectionResult {
  ExperimentReport report;
  WeightArtifact weights;
  SelectionResult best_selection;
  std::vector<ObservationSet> histories;  // one BO history per seed
};

// Full learned-selection protocol: BO over w in [-1,1]^l against validation
// J, then retrain under the best w and report on the held-out test split.
inline LearnedSelectionResult run_learned_selection(const RunContext& ctx) {
  ctx.validate();
  const FeatureMatrix matrix = ctx.build_matrix();
  const auto strat = stratify_labels_for(ctx.task, *ctx.pool);

  LearnedSelectionResult out;
  out.report.method = "learned";
  out.report.target = ctx.target->domain;
  out.report.task = task_kind_name(ctx.task.kind);
  out.weights.config_id = matrix.config_id;
  out.weights.task = task_kind_name(ctx.task.kind);
  out.weights.target = ctx.target->domain;
  out.weights.columns = matrix.columns;

  std::vector<SelectionResult> selections;
  for (const std::uint64_t seed : ctx.seeds) {
    auto objective = data_selection_objective(matrix, *ctx.pool, ctx.selection_n, ctx.task,
                                              ctx.target_split->validation, seed);
    BoConfig bo = ctx.bo;
    bo.seed = seed;
    bo.maximize = true;
    auto result = optimize(objective, Bounds::cube(static_cast<int>(matrix.cols()), -1.0, 1.0), bo);

    auto selection = select_with_weights(matrix, *ctx.pool, ctx.selection_n,
                                         WeightVector(result.best.input), strat);
    const double test_value = train_and_evaluate(
        ctx.task, gather(*ctx.pool, selection.indices), ctx.target_split->pool, seed);

    out.report.rows.push_back(RunRow{seed, test_value, result.best.value});
    out.weights.runs.push_back(WeightRun{seed, result.best.input, result.best.value, test_value});
    out.histories.push_back(std::move(result.history));
    selections.push_back(std::move(selection));
  }

  out.weights.best_index = 0;
  for (std::size_t i = 1; i < out.weights.runs.size(); ++i) {
    if (out.weights.runs[i].validation > out.weights.runs[out.weights.best_index].validation) {
      out.weights.best_index = i;
    }
  }
  out.best_selection = selections[out.weights.best_index];
  out.report.finalize();
  return out;
}

struct TransferOutcome {
  ExperimentReport report;
  SelectionResult selection;
};

// Applies a frozen weight vector in a new setting: the feature matrix and its
// z-normalization are recomputed on the new pool, then selection and task
// training proceed without any BO run. The feature-config identifiers must
// match so columns stay aligned.
inline TransferOutcome apply_transferred_weights(const RunContext& ctx,
                                                 const WeightArtifact& weights) {
  ctx.validate();
  require(weights.config_id == ctx.features.id(),
          "apply_transferred_weights: feature config mismatch (weights: ", weights.config_id,
          ", target setting: ", ctx.features.id(), ")");
  const FeatureMatrix matrix = ctx.build_matrix();
  const auto strat = stratify_labels_for(ctx.task, *ctx.pool);
  const WeightVector w(weights.best().w);

  TransferOutcome out;
  out.selection = select_with_weights(matrix, *ctx.pool, ctx.selection_n, w, strat);
  out.selection.provenance += ";transfer(from=" + weights.task + "/" + weights.target + ")";
  out.report.method = "transfer";
  out.report.target = ctx.target->domain;
  out.report.task = task_kind_name(ctx.task.kind);
  const auto selected = gather(*ctx.pool, out.selection.indices);
  for (const std::uint64_t seed : ctx.seeds) {
    out.report.rows.push_back(
        RunRow{seed, train_and_evaluate(ctx.task, selected, ctx.target_split->pool, seed), {}});
  }
  out.report.finalize();
  return out;
}

// Trains on the full pooled source data.
inline ExperimentReport run_all_source(const RunContext& ctx) {
  ctx.validate();
  ExperimentReport report;
  report.method = "all-source";
  report.target = ctx.target->domain;
  report.task = task_kind_name(ctx.task.kind);
  for (const std::uint64_t seed : ctx.seeds) {
    report.rows.push_back(
        RunRow{seed, train_and_evaluate(ctx.task, *ctx.pool, ctx.target_split->pool, seed), {}});
  }
  report.finalize();
  return report;
}

// Maps selected ids back to pool examples (used where a selection's indices
// do not refer to the pooled list, e.g. js-domain).
inline std::vector<Example> selected_from_ids(const RunContext& ctx,
                                              const std::vector<std::string>& ids) {
  std::unordered_map<std::string, int> index;
  index.reserve(ctx.pool->size());
  for (std::size_t i = 0; i < ctx.pool->size(); ++i) index.emplace((*ctx.pool)[i].id, static_cast<int>(i));
  std::vector<Example> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    require(it != index.end(), "selected id ", id, " not found in the pool");
    out.push_back((*ctx.pool)[static_cast<std::size_t>(it->second)]);
  }
  return out;
}

inline ExperimentReport run_baseline(const RunContext& ctx, const std::string& method) {
  ctx.validate();
  ExperimentReport report;
  report.method = method;
  report.target = ctx.target->domain;
  report.task = task_kind_name(ctx.task.kind);

  if (method == "all-source") return run_all_source(ctx);

  for (const std::uint64_t seed : ctx.seeds) {
    SelectionResult selection;
    if (method == "random") {
      selection = baseline_random(*ctx.pool, ctx.selection_n, seed);
    } else if (method == "js-examples") {
      require(ctx.target_repr.term.has_value(), "run_baseline: js-examples needs a target term representation");
      selection = baseline_js_examples(*ctx.pool, *ctx.target_repr.term, ctx.selection_n, *ctx.vocab);
    } else if (method == "js-domain") {
      require(ctx.target_repr.term.has_value(), "run_baseline: js-domain needs a target term representation");
      selection = baseline_js_domain(ctx.sources, *ctx.target_repr.term, ctx.selection_n, seed,
                                     *ctx.vocab);
      // js-domain indices refer to the chosen domain, not the pooled list
      const auto selected = selected_from_ids(ctx, selection.ids);
      report.rows.push_back(
          RunRow{seed, train_and_evaluate(ctx.task, selected, ctx.target_split->pool, seed), {}});
      continue;
    } else {
      fail("run_baseline: unknown method '", method, "'");
    }
    report.rows.push_back(RunRow{
        seed,
        train_and_evaluate(ctx.task, gather(*ctx.pool, selection.indices), ctx.target_split->pool,
                           seed),
        {}});
  }
  report.finalize();
  return report;
}

}  // namespace datasel
