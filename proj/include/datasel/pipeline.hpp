#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "datasel/io.hpp"
#include "datasel/select.hpp"

namespace datasel {

namespace fs = std::filesystem;

struct DomainPaths {
  std::string labeled;
  std::string unlabeled;  // empty when the domain has no unlabeled data
};

// Run configuration. Paper-protocol defaults are pre-filled: alpha 0.99,
// 50 LDA topics / 10 iterations, 300 BO iterations, 100 validation examples,
// n 1600 (sentiment) or 2000 (tagging).
struct Manifest {
  std::string base_dir;  // manifest location; relative paths resolve against it
  TaskKind task = TaskKind::sentiment;
  std::string target;
  std::map<std::string, DomainPaths> domains;
  std::string embeddings_path;
  std::size_t vocab_size = 10000;
  std::size_t validation_size = 100;
  std::uint64_t split_seed = 13;
  std::size_t selection_n = 0;  // 0 = task default
  std::vector<std::uint64_t> seeds;
  FeatureConfig features;
  LdaConfig lda;
  BoConfig bo;
  SentimentHyper sentiment;
  TaggerConfig tagger;
  std::size_t tfidf_features = 10000;
  std::string external_command;
  bool lowercase = true;
  bool lowercase_set = false;
  std::string output_dir = "out";
  double embedding_smoothing = 1e-3;

  std::string resolve(const std::string& path) const {
    if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / path).string();
  }

  bool effective_lowercase() const {
    if (lowercase_set) return lowercase;
    return task != TaskKind::pos;  // CoNLL tokens keep surface case
  }

  std::size_t effective_n() const {
    if (selection_n > 0) return selection_n;
    return task == TaskKind::sentiment ? 1600 : 2000;
  }

  std::vector<std::uint64_t> effective_seeds() const {
    if (!seeds.empty()) return seeds;
    if (task == TaskKind::sentiment) {
      std::vector<std::uint64_t> s(10);
      std::iota(s.begin(), s.end(), std::uint64_t{1});
      return s;
    }
    return {1};
  }

  TaskSetup task_setup() const {
    TaskSetup setup;
    setup.kind = task;
    setup.sentiment = sentiment;
    setup.tagger = tagger;
    setup.tfidf_features = tfidf_features;
    setup.external_command = external_command;
    setup.external_format = TaskKind::sentiment;
    setup.workdir = output_dir;
    return setup;
  }

  void validate() const {
    require(!target.empty(), "manifest: no target domain set");
    require(domains.count(target) == 1, "manifest: target domain '", target,
            "' is not among the listed domains");
    require(domains.size() >= 2, "manifest: need at least one source domain besides the target");
    require(validation_size > 0, "manifest: validation_size must be positive");
    if (task == TaskKind::external) {
      require(!external_command.empty(), "manifest: external task needs an external_command");
    }
  }
};

inline TaskKind task_kind_from_string(const std::string& s) {
  if (s == "sentiment") return TaskKind::sentiment;
  if (s == "pos") return TaskKind::pos;
  if (s == "external") return TaskKind::external;
  fail("unknown task kind '", s, "' (expected sentiment|pos|external)");
}

inline FeatureConfig feature_config_from_sets(const std::vector<std::string>& sets,
                                              double alpha = 0.99, double epsilon = 1e-10) {
  FeatureConfig cfg;
  cfg.sim_term = cfg.sim_topic = cfg.sim_embedding = cfg.diversity = false;
  cfg.renyi_alpha = alpha;
  cfg.epsilon = epsilon;
  for (const auto& s : sets) {
    if (s == "sim-term") cfg.sim_term = true;
    else if (s == "sim-topic") cfg.sim_topic = true;
    else if (s == "sim-emb") cfg.sim_embedding = true;
    else if (s == "div") cfg.diversity = true;
    else fail("unknown feature set '", s, "' (expected sim-term|sim-topic|sim-emb|div)");
  }
  cfg.validate();
  return cfg;
}

inline Manifest manifest_from_json(const json& j, const std::string& base_dir) {
  Manifest m;
  m.base_dir = base_dir;
  m.task = task_kind_from_string(j.value("task", "sentiment"));
  m.target = j.at("target").get<std::string>();
  for (const auto& [name, spec] : j.at("domains").items()) {
    DomainPaths paths;
    if (spec.is_string()) {
      paths.labeled = spec.get<std::string>();
    } else {
      paths.labeled = spec.at("labeled").get<std::string>();
      paths.unlabeled = spec.value("unlabeled", "");
    }
    m.domains.emplace(name, std::move(paths));
  }
  m.embeddings_path = j.value("embeddings", "");
  m.vocab_size = j.value("vocab_size", std::size_t{10000});
  m.validation_size = j.value("validation_size", std::size_t{100});
  m.split_seed = j.value("split_seed", std::uint64_t{13});
  m.selection_n = j.value("n", std::size_t{0});
  if (j.contains("seeds")) m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

  std::vector<std::string> sets{"sim-term", "div"};
  double alpha = 0.99, epsilon = 1e-10;
  if (j.contains("features")) {
    const auto& f = j.at("features");
    if (f.is_array()) {
      sets = f.get<std::vector<std::string>>();
    } else {
      sets = f.value("sets", sets);
      alpha = f.value("alpha", alpha);
      epsilon = f.value("epsilon", epsilon);
    }
  }
  m.features = feature_config_from_sets(sets, alpha, epsilon);

  if (j.contains("lda")) {
    const auto& l = j.at("lda");
    m.lda.topics = l.value("topics", 50);
    m.lda.iterations = l.value("iterations", 10);
    m.lda.alpha = l.value("alpha", 0.0);
    m.lda.beta = l.value("beta", 0.01);
    m.lda.seed = l.value("seed", std::uint64_t{7});
    m.lda.infer_sweeps = l.value("infer_sweeps", 20);
  } else {
    m.lda.seed = 7;
  }

  if (j.contains("bo")) {
    const auto& b = j.at("bo");
    m.bo.iterations = b.value("iterations", 300);
    m.bo.initial = b.value("initial", 10);
    m.bo.candidates = b.value("candidates", 5000);
    m.bo.perturbations = b.value("perturbations", 50);
  }

  if (j.contains("task_config")) {
    const auto& t = j.at("task_config");
    m.sentiment.epochs = t.value("epochs", 10);
    m.sentiment.learning_rate = t.value("learning_rate", 0.1);
    m.tagger.iterations = t.value("tagger_iterations", 5);
    m.tagger.learning_rate = t.value("tagger_learning_rate", 0.2);
    m.tfidf_features = t.value("max_features", std::size_t{10000});
  }
  m.external_command = j.value("external_command", "");
  if (j.contains("lowercase")) {
    m.lowercase = j.at("lowercase").get<bool>();
    m.lowercase_set = true;
  }
  m.output_dir = j.value("output_dir", "out");
  m.embedding_smoothing = j.value("embedding_smoothing", 1e-3);
  m.validate();
  return m;
}

inline Manifest load_manifest(const std::string& path) {
  const auto parent = fs::path(path).parent_path().string();
  try {
    return manifest_from_json(json::parse(read_text_file(path)), parent);
  } catch (const json::exception& e) {
    fail("manifest ", path, ": ", e.what());
  }
}

// ---------------------------------------------------------------------------
// Data preparation and artifact cache.
// ---------------------------------------------------------------------------

struct PipelineData {
  std::map<std::string, DomainCorpus> domains;
  std::vector<Example> pool;  // source labeled examples, domains in id order
  Vocabulary vocab;
  std::optional<LdaModel> lda;
  std::optional<EmbeddingTable> embeddings;
  Split target_split;
  TargetRepresentation target_repr;
};

namespace detail {

inline std::uint64_t cache_key(const Manifest& m) {
  std::uint64_t h = fnv1a("datasel-cache-v1");
  auto mix = [&h](const std::string& s) { h = fnv1a(s, h); };
  mix(std::to_string(m.vocab_size));
  mix(m.effective_lowercase() ? "lc1" : "lc0");
  mix(task_kind_name(m.task));
  const bool need_lda = m.features.sim_topic;
  mix(need_lda ? "lda1" : "lda0");
  if (need_lda) {
    mix(std::to_string(m.lda.topics));
    mix(std::to_string(m.lda.iterations));
    mix(std::to_string(m.lda.alpha));
    mix(std::to_string(m.lda.beta));
    mix(std::to_string(m.lda.seed));
    mix(std::to_string(m.lda.infer_sweeps));
  }
  for (const auto& [name, paths] : m.domains) {
    mix(name);
    mix(read_text_file(m.resolve(paths.labeled)));
    if (!paths.unlabeled.empty()) mix(read_text_file(m.resolve(paths.unlabeled)));
  }
  return h;
}

inline std::string cache_dir(const Manifest& m) {
  return (fs::path(m.output_dir) / "cache").string();
}

}  // namespace detail

inline std::map<std::string, DomainCorpus> load_domains(const Manifest& m) {
  TokenizeConfig tok{m.effective_lowercase()};
  std::map<std::string, DomainCorpus> out;
  for (const auto& [name, paths] : m.domains) {
    DomainCorpus corpus;
    const std::string labeled_path = m.resolve(paths.labeled);
    if (m.task == TaskKind::pos) {
      corpus = load_tagged_conll(labeled_path, name);
    } else {
      corpus = load_labeled_reviews(labeled_path, name, tok);
    }
    if (!paths.unlabeled.empty()) {
      corpus.unlabeled = load_unlabeled_lines(m.resolve(paths.unlabeled), name, tok);
    }
    out.emplace(name, std::move(corpus));
  }
  return out;
}

// Loads corpora and builds (or loads from cache) the vocabulary and LDA
// model, then derives the target split and target representations.
inline PipelineData prepare_data(const Manifest& m, bool use_cache = false) {
  PipelineData data;
  data.domains = load_domains(m);

  const bool need_lda = m.features.sim_topic;
  const bool need_embeddings = m.features.sim_embedding || m.features.diversity;

  bool cache_hit = false;
  if (use_cache) {
    const auto dir = detail::cache_dir(m);
    const auto stamp_path = (fs::path(dir) / "stamp.json").string();
    if (fs::exists(stamp_path)) {
      const auto stamp = json::parse(read_text_file(stamp_path));
      if (stamp.value("key", std::string{}) == std::to_string(detail::cache_key(m))) {
        data.vocab = vocabulary_from_json(json::parse(read_text_file(
            (fs::path(dir) / "vocab.json").string())));
        const auto lda_path = (fs::path(dir) / "lda.json").string();
        if (need_lda) {
          require(fs::exists(lda_path),
                  "cache is missing the LDA model; re-run ingest with topic features enabled");
          data.lda = lda_from_json(json::parse(read_text_file(lda_path)));
        }
        cache_hit = true;
      }
    }
    require(cache_hit, "no valid ingest cache under ", detail::cache_dir(m),
            "; run the ingest command first");
  }

  if (!cache_hit) {
    std::vector<const DomainCorpus*> all;
    for (const auto& [name, corpus] : data.domains) all.push_back(&corpus);
    data.vocab = Vocabulary::build(all, m.vocab_size);
    if (need_lda) {
      // source labeled + unlabeled plus target unlabeled; target labeled
      // text stays out of topic training
      std::vector<DomainCorpus> lda_views;
      for (const auto& [name, corpus] : data.domains) {
        DomainCorpus view;
        view.domain = name;
        if (name != m.target) view.labeled = corpus.labeled;
        view.unlabeled = corpus.unlabeled;
        lda_views.push_back(std::move(view));
      }
      std::vector<const DomainCorpus*> ptrs;
      for (const auto& v : lda_views) ptrs.push_back(&v);
      data.lda = train_lda(ptrs, data.vocab, m.lda);
    }
  }

  if (need_embeddings && !m.embeddings_path.empty()) {
    data.embeddings = EmbeddingTable::load(m.resolve(m.embeddings_path), m.embedding_smoothing);
  }
  require(!m.features.sim_embedding || data.embeddings.has_value(),
          "embedding similarity features need an embeddings file in the manifest");

  for (const auto& [name, corpus] : data.domains) {
    if (name == m.target) continue;
    for (const auto& ex : corpus.labeled) data.pool.push_back(ex);
  }
  require(!data.pool.empty(), "no source labeled examples");

  const DomainCorpus& target = data.domains.at(m.target);
  data.target_split = split_validation(target, m.validation_size, m.split_seed);

  // target representation: labeled pool (validation excluded) + unlabeled
  DomainCorpus repr_view;
  repr_view.domain = target.domain;
  repr_view.labeled = data.target_split.pool;
  repr_view.unlabeled = target.unlabeled;
  data.target_repr.term = domain_representation(repr_view, data.vocab);
  if (need_lda || m.features.sim_embedding) {
    std::vector<std::string> all_tokens;
    for (const auto* part : {&repr_view.labeled, &repr_view.unlabeled}) {
      for (const auto& ex : *part) {
        all_tokens.insert(all_tokens.end(), ex.tokens.begin(), ex.tokens.end());
      }
    }
    if (data.lda) data.target_repr.topic = infer_topics(*data.lda, all_tokens, data.vocab);
    if (m.features.sim_embedding) {
      data.target_repr.embedding = embed_example(all_tokens, *data.embeddings, data.vocab);
    }
  }
  return data;
}

// Validates inputs, prepares artifacts, and writes the content-hash keyed
// cache. Rerunning without input changes reuses the cache.
inline bool ingest(const Manifest& m, std::string* message = nullptr) {
  const auto dir = detail::cache_dir(m);
  fs::create_directories(dir);
  const auto key = std::to_string(detail::cache_key(m));
  const auto stamp_path = (fs::path(dir) / "stamp.json").string();
  const bool need_lda = m.features.sim_topic;
  if (fs::exists(stamp_path)) {
    const auto stamp = json::parse(read_text_file(stamp_path));
    const bool lda_ok = !need_lda || fs::exists((fs::path(dir) / "lda.json").string());
    if (stamp.value("key", std::string{}) == key && lda_ok) {
      if (message) *message = "cache hit (" + dir + "), nothing to do";
      return false;
    }
  }
  const PipelineData data = prepare_data(m, /*use_cache=*/false);
  write_text_file((fs::path(dir) / "vocab.json").string(),
                  vocabulary_to_json(data.vocab).dump() + "\n");
  if (data.lda) {
    write_text_file((fs::path(dir) / "lda.json").string(), lda_to_json(*data.lda).dump() + "\n");
  }
  write_text_file(stamp_path, json{{"key", key}}.dump() + "\n");
  if (message) {
    *message = "ingested " + std::to_string(data.domains.size()) + " domains, |V|=" +
               std::to_string(data.vocab.size()) + (data.lda ? ", LDA trained" : "") +
               ", cache at " + dir;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Method dispatch.
// ---------------------------------------------------------------------------

struct MethodOutputs {
  ExperimentReport report;
  std::optional<WeightArtifact> weights;
  std::optional<SelectionResult> selection;
  std::vector<ObservationSet> histories;
  std::vector<std::uint64_t> history_seeds;
};

inline RunContext make_context(const Manifest& m, const PipelineData& data) {
  RunContext ctx;
  ctx.pool = &data.pool;
  for (const auto& [name, corpus] : data.domains) {
    if (name != m.target) ctx.sources.emplace(name, &corpus);
  }
  ctx.target = &data.domains.at(m.target);
  ctx.vocab = &data.vocab;
  ctx.lda = data.lda ? &*data.lda : nullptr;
  ctx.embeddings = data.embeddings ? &*data.embeddings : nullptr;
  ctx.target_split = &data.target_split;
  ctx.target_repr = data.target_repr;
  ctx.features = m.features;
  ctx.bo = m.bo;
  ctx.task = m.task_setup();
  ctx.selection_n = m.effective_n();
  ctx.seeds = m.effective_seeds();
  return ctx;
}

inline MethodOutputs run_method(const Manifest& m, const PipelineData& data,
                                const std::string& method,
                                const std::optional<WeightArtifact>& transfer_weights = {}) {
  const RunContext ctx = make_context(m, data);
  MethodOutputs out;
  if (method == "learned") {
    auto result = run_learned_selection(ctx);
    out.report = std::move(result.report);
    out.weights = std::move(result.weights);
    out.selection = std::move(result.best_selection);
    out.histories = std::move(result.histories);
    out.history_seeds = ctx.seeds;
  } else if (method == "transfer") {
    require(transfer_weights.has_value(), "transfer method needs a weights artifact");
    auto result = apply_transferred_weights(ctx, *transfer_weights);
    out.report = std::move(result.report);
    out.selection = std::move(result.selection);
  } else if (method == "random" || method == "js-examples" || method == "js-domain" ||
             method == "all-source") {
    out.report = run_baseline(ctx, method);
  } else {
    fail("unknown method '", method,
         "' (expected random|js-examples|js-domain|learned|all-source|transfer)");
  }
  return out;
}

// Writes report_<method>.{txt,jsonl}; learned runs additionally persist the
// weight artifact, per-seed BO histories, and the best selection's ids.
inline void write_outputs(const Manifest& m, const std::string& method,
                          const MethodOutputs& outputs) {
  fs::create_directories(m.output_dir);
  const fs::path dir(m.output_dir);
  write_text_file((dir / ("report_" + method + ".txt")).string(),
                  report_to_text(outputs.report));
  write_text_file((dir / ("report_" + method + ".jsonl")).string(),
                  report_to_jsonl(outputs.report));
  if (outputs.weights) {
    save_weights((dir / ("weights_" + method + ".json")).string(), *outputs.weights);
  }
  if (outputs.selection) {
    std::ostringstream ids;
    for (const auto& id : outputs.selection->ids) ids << id << '\n';
    write_text_file((dir / ("selected_" + method + ".txt")).string(), ids.str());
  }
  for (std::size_t i = 0; i < outputs.histories.size(); ++i) {
    const auto seed = outputs.history_seeds[i];
    write_text_file((dir / ("history_" + method + "_seed" + std::to_string(seed) + ".tsv")).string(),
                    history_to_tsv(outputs.histories[i]));
  }
}

// ---------------------------------------------------------------------------
// Best-so-far curve extraction (plot-ready table).
// ---------------------------------------------------------------------------

// Merges one or more history files into an iteration-vs-best table, one
// column per input file.
inline std::string curve_table(const std::vector<std::string>& history_paths,
                               const std::vector<std::string>& labels) {
  require(!history_paths.empty(), "curve: no history files");
  require(labels.size() == history_paths.size(), "curve: label/file count mismatch");
  std::vector<std::vector<std::string>> best_columns;
  std::size_t max_rows = 0;
  for (const auto& path : history_paths) {
    std::istringstream in(read_text_file(path));
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "curve: empty history ", path);
    std::istringstream header(line);
    std::vector<std::string> names;
    std::string cell;
    while (std::getline(header, cell, '\t')) names.push_back(cell);
    const auto it = std::find(names.begin(), names.end(), "best");
    require(it != names.end(), "curve: history ", path, " has no 'best' column");
    const std::size_t best_idx = static_cast<std::size_t>(it - names.begin());
    std::vector<std::string> col;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::vector<std::string> cells;
      while (std::getline(row, cell, '\t')) cells.push_back(cell);
      require(cells.size() > best_idx, "curve: malformed row in ", path);
      col.push_back(cells[best_idx]);
    }
    max_rows = std::max(max_rows, col.size());
    best_columns.push_back(std::move(col));
  }
  std::ostringstream os;
  os << "iteration";
  for (const auto& label : labels) os << '\t' << label;
  os << '\n';
  for (std::size_t i = 0; i < max_rows; ++i) {
    os << i;
    for (const auto& col : best_columns) {
      os << '\t';
      if (i < col.size()) os << col[i];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace datasel
