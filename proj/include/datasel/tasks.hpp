#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "datasel/corpus.hpp"
#include "datasel/util.hpp"

namespace datasel {

// ---------------------------------------------------------------------------
// tf-idf vectorizer over unigrams + bigrams.
// ---------------------------------------------------------------------------

class TfidfVectorizer {
 public:
  TfidfVectorizer() = default;

  // Keeps the max_features most frequent n-grams (collection frequency,
  // ties lexicographic). idf = ln(N / (1 + df)) + 1.
  static TfidfVectorizer fit(const std::vector<Example>& examples, std::size_t max_features) {
    require(!examples.empty(), "TfidfVectorizer::fit: no examples");
    require(max_features > 0, "TfidfVectorizer::fit: max_features must be positive");
    std::unordered_map<std::string, std::uint64_t> counts;
    std::unordered_map<std::string, std::uint64_t> df;
    std::vector<std::string> grams;
    for (const auto& ex : examples) {
      grams.clear();
      collect_ngrams(ex.tokens, grams);
      for (const auto& g : grams) ++counts[g];
      std::sort(grams.begin(), grams.end());
      grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
      for (const auto& g : grams) ++df[g];
    }
    std::vector<std::pair<std::string, std::uint64_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (items.size() > max_features) items.resize(max_features);

    TfidfVectorizer out;
    out.num_documents_ = examples.size();
    const double n = static_cast<double>(examples.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto& gram = items[i].first;
      out.index_.emplace(gram, static_cast<int>(i));
      out.idf_.push_back(std::log(n / (1.0 + static_cast<double>(df[gram]))) + 1.0);
      out.document_frequency_.push_back(df[gram]);
    }
    return out;
  }

  // Sparse l2-normalized tf-idf vector, entries sorted by feature index.
  std::vector<std::pair<int, double>> transform(const std::vector<std::string>& tokens) const {
    std::vector<std::string> grams;
    collect_ngrams(tokens, grams);
    std::unordered_map<int, double> tf;
    for (const auto& g : grams) {
      auto it = index_.find(g);
      if (it != index_.end()) tf[it->second] += 1.0;
    }
    std::vector<std::pair<int, double>> vec(tf.begin(), tf.end());
    std::sort(vec.begin(), vec.end());
    double norm2 = 0.0;
    for (auto& [idx, v] : vec) {
      v *= idf_[static_cast<std::size_t>(idx)];
      norm2 += v * v;
    }
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& [idx, v] : vec) v *= inv;
    }
    return vec;
  }

  std::size_t size() const { return index_.size(); }
  std::size_t num_documents() const { return num_documents_; }

  std::uint64_t document_frequency(const std::string& gram) const {
    auto it = index_.find(gram);
    return it == index_.end() ? 0 : document_frequency_[static_cast<std::size_t>(it->second)];
  }

 private:
  static void collect_ngrams(const std::vector<std::string>& tokens,
                             std::vector<std::string>& out) {
    out.reserve(out.size() + 2 * tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      out.push_back(tokens[i]);
      if (i + 1 < tokens.size()) out.push_back(tokens[i] + " " + tokens[i + 1]);
    }
  }

  std::unordered_map<std::string, int> index_;
  std::vector<double> idf_;
  std::vector<std::uint64_t> document_frequency_;
  std::size_t num_documents_ = 0;
};

// ---------------------------------------------------------------------------
// Linear sentiment classifier: hinge-loss SGD with weight averaging.
// ---------------------------------------------------------------------------

struct SentimentHyper {
  int epochs = 10;
  double learning_rate = 0.1;
  std::uint64_t seed = 1;
};

class LinearClassifier {
 public:
  static LinearClassifier train(const std::vector<Example>& examples,
                                const TfidfVectorizer& vectorizer, const SentimentHyper& hyper) {
    require(!examples.empty(), "LinearClassifier::train: no examples");
    bool has_pos = false, has_neg = false;
    for (const auto& ex : examples) {
      require(ex.has_polarity(), "LinearClassifier::train: example ", ex.id, " has no polarity");
      (ex.polarity() == 1 ? has_pos : has_neg) = true;
    }
    require(has_pos && has_neg, "LinearClassifier::train: training set has a single class");

    const std::size_t dim = vectorizer.size();
    std::vector<std::vector<std::pair<int, double>>> vectors(examples.size());
    std::vector<double> labels(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
      vectors[i] = vectorizer.transform(examples[i].tokens);
      labels[i] = examples[i].polarity() == 1 ? 1.0 : -1.0;
    }

    std::vector<double> w(dim, 0.0), w_acc(dim, 0.0);
    std::vector<std::int64_t> stamp(dim, 0);
    double bias = 0.0, bias_acc = 0.0;
    std::int64_t bias_stamp = 0;
    std::int64_t now = 0;

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(hyper.seed);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t oi : order) {
        ++now;
        const auto& x = vectors[oi];
        const double y = labels[oi];
        double s = bias;
        for (const auto& [idx, v] : x) s += w[static_cast<std::size_t>(idx)] * v;
        if (y * s < 1.0) {
          for (const auto& [idx, v] : x) {
            auto i = static_cast<std::size_t>(idx);
            w_acc[i] += static_cast<double>(now - stamp[i]) * w[i];
            stamp[i] = now;
            w[i] += hyper.learning_rate * y * v;
          }
          bias_acc += static_cast<double>(now - bias_stamp) * bias;
          bias_stamp = now;
          bias += hyper.learning_rate * y;
        }
      }
    }

    LinearClassifier model;
    model.weights_.resize(dim);
    const double total = static_cast<double>(now);
    for (std::size_t i = 0; i < dim; ++i) {
      w_acc[i] += static_cast<double>(now - stamp[i]) * w[i];
      model.weights_[i] = w_acc[i] / total;
    }
    bias_acc += static_cast<double>(now - bias_stamp) * bias;
    model.bias_ = bias_acc / total;
    return model;
  }

  double decision(const std::vector<std::pair<int, double>>& x) const {
    double s = bias_;
    for (const auto& [idx, v] : x) s += weights_[static_cast<std::size_t>(idx)] * v;
    return s;
  }

  // 1 when the decision value is >= 0; an empty feature vector falls back to
  // the bias sign.
  int predict(const std::vector<std::pair<int, double>>& x) const {
    return decision(x) >= 0.0 ? 1 : 0;
  }

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
};

inline double sentiment_accuracy(const LinearClassifier& model, const TfidfVectorizer& vectorizer,
                                 const std::vector<Example>& examples) {
  require(!examples.empty(), "sentiment_accuracy: empty evaluation set");
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    if (model.predict(vectorizer.transform(ex.tokens)) == ex.polarity()) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// ---------------------------------------------------------------------------
// Greedy averaged structured perceptron POS tagger.
// ---------------------------------------------------------------------------

struct TaggerConfig {
  int iterations = 5;
  double learning_rate = 0.2;
  std::uint64_t seed = 1;
};

class PerceptronTagger {
 public:
  static PerceptronTagger train(const std::vector<Example>& sentences, const TaggerConfig& cfg) {
    require(!sentences.empty(), "PerceptronTagger::train: empty training set");
    PerceptronTagger model;
    {
      std::set<std::string> tag_set;
      for (const auto& s : sentences) {
        require(s.has_tags() && s.tags().size() == s.tokens.size(),
                "PerceptronTagger::train: sentence ", s.id, " lacks an aligned tag sequence");
        for (const auto& t : s.tags()) tag_set.insert(t);
      }
      model.tags_.assign(tag_set.begin(), tag_set.end());
      for (std::size_t i = 0; i < model.tags_.size(); ++i) {
        model.tag_index_[model.tags_[i]] = static_cast<int>(i);
      }
    }
    const std::size_t T = model.tags_.size();

    std::unordered_map<std::string, TrainEntry> table;
    std::int64_t now = 0;
    std::vector<std::string> feats;
    std::vector<double> scores(T);

    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(cfg.seed);

    auto upd = [&](const std::string& f, std::size_t tag, double delta) {
      auto& e = table[f];
      if (e.w.empty()) {
        e.w.assign(T, 0.0);
        e.acc.assign(T, 0.0);
        e.stamp.assign(T, 0);
      }
      e.acc[tag] += static_cast<double>(now - e.stamp[tag]) * e.w[tag];
      e.stamp[tag] = now;
      e.w[tag] += delta;
    };

    for (int it = 0; it < cfg.iterations; ++it) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t si : order) {
        const auto& sent = sentences[si];
        const auto& gold = sent.tags();
        std::string prev_tag = "<s>";
        for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
          ++now;
          extract_features(sent.tokens, i, prev_tag, feats);
          std::fill(scores.begin(), scores.end(), 0.0);
          for (const auto& f : feats) {
            auto it2 = table.find(f);
            if (it2 == table.end() || it2->second.w.empty()) continue;
            for (std::size_t t = 0; t < T; ++t) scores[t] += it2->second.w[t];
          }
          std::size_t guess = 0;
          for (std::size_t t = 1; t < T; ++t) {
            if (scores[t] > scores[guess]) guess = t;
          }
          const auto gold_idx = static_cast<std::size_t>(model.tag_index_.at(gold[i]));
          if (guess != gold_idx) {
            for (const auto& f : feats) {
              upd(f, gold_idx, cfg.learning_rate);
              upd(f, guess, -cfg.learning_rate);
            }
          }
          prev_tag = model.tags_[guess];
        }
      }
    }

    const double total = static_cast<double>(now);
    for (auto& [f, e] : table) {
      std::vector<double> avg(T);
      bool nonzero = false;
      for (std::size_t t = 0; t < T; ++t) {
        e.acc[t] += static_cast<double>(now - e.stamp[t]) * e.w[t];
        avg[t] = e.acc[t] / total;
        if (avg[t] != 0.0) nonzero = true;
      }
      if (nonzero) model.weights_.emplace(f, std::move(avg));
    }
    return model;
  }

  std::vector<std::string> tag(const std::vector<std::string>& tokens) const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    std::vector<std::string> feats;
    std::vector<double> scores(tags_.size());
    std::string prev_tag = "<s>";
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      extract_features(tokens, i, prev_tag, feats);
      std::fill(scores.begin(), scores.end(), 0.0);
      for (const auto& f : feats) {
        auto it = weights_.find(f);
        if (it == weights_.end()) continue;
        for (std::size_t t = 0; t < scores.size(); ++t) scores[t] += it->second[t];
      }
      std::size_t guess = 0;
      for (std::size_t t = 1; t < scores.size(); ++t) {
        if (scores[t] > scores[guess]) guess = t;
      }
      prev_tag = tags_[guess];
      out.push_back(prev_tag);
    }
    return out;
  }

  const std::vector<std::string>& tags() const { return tags_; }

 private:
  struct TrainEntry {
    std::vector<double> w, acc;
    std::vector<std::int64_t> stamp;
  };

  static std::string lower_ascii(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
  }

  // Templates: current/prev/next word, lowercased word, previous predicted
  // tag, capitalization flag, digit flag, prefixes and suffixes of lengths
  // 1-3.
  static void extract_features(const std::vector<std::string>& tokens, std::size_t i,
                               const std::string& prev_tag, std::vector<std::string>& out) {
    out.clear();
    const std::string& w = tokens[i];
    const std::string lw = lower_ascii(w);
    out.push_back("bias");
    out.push_back("w=" + w);
    out.push_back("lw=" + lw);
    out.push_back("prev=" + (i > 0 ? lower_ascii(tokens[i - 1]) : std::string("<s>")));
    out.push_back("next=" + (i + 1 < tokens.size() ? lower_ascii(tokens[i + 1]) : std::string("</s>")));
    out.push_back("ptag=" + prev_tag);
    if (!w.empty() && w[0] >= 'A' && w[0] <= 'Z') out.push_back("cap");
    for (char c : w) {
      if (c >= '0' && c <= '9') {
        out.push_back("digit");
        break;
      }
    }
    for (std::size_t n = 1; n <= 3 && n <= lw.size(); ++n) {
      out.push_back("pre" + std::to_string(n) + "=" + lw.substr(0, n));
      out.push_back("suf" + std::to_string(n) + "=" + lw.substr(lw.size() - n));
    }
  }

  std::vector<std::string> tags_;
  std::unordered_map<std::string, int> tag_index_;
  std::unordered_map<std::string, std::vector<double>> weights_;
};

inline double tagging_accuracy(const PerceptronTagger& model,
                               const std::vector<Example>& sentences) {
  require(!sentences.empty(), "tagging_accuracy: empty evaluation set");
  std::size_t correct = 0, total = 0;
  for (const auto& sent : sentences) {
    const auto predicted = model.tag(sent.tokens);
    const auto& gold = sent.tags();
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (predicted[i] == gold[i]) ++correct;
      ++total;
    }
  }
  require(total > 0, "tagging_accuracy: no tokens");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Objective wrapper and external evaluator hook.
// ---------------------------------------------------------------------------

enum class TaskKind { sentiment, pos, external };

inline std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::sentiment: return "sentiment";
    case TaskKind::pos: return "pos";
    case TaskKind::external: return "external";
  }
  return "?";
}

struct Objective {
  TaskKind kind = TaskKind::sentiment;
  const std::vector<Example>* evaluation = nullptr;

  void validate() const {
    require(evaluation != nullptr && !evaluation->empty(), "Objective: empty evaluation set");
  }
};

inline double evaluate(const Objective& objective, const LinearClassifier& model,
                       const TfidfVectorizer& vectorizer) {
  objective.validate();
  require(objective.kind == TaskKind::sentiment,
          "evaluate: classifier given for a ", task_kind_name(objective.kind), " objective");
  return sentiment_accuracy(model, vectorizer, *objective.evaluation);
}

inline double evaluate(const Objective& objective, const PerceptronTagger& model) {
  objective.validate();
  require(objective.kind == TaskKind::pos, "evaluate: tagger given for a ",
          task_kind_name(objective.kind), " objective");
  return tagging_accuracy(model, *objective.evaluation);
}

// Runs `command` (placeholders {train} and {dev} replaced by file paths in the
// loader formats), expecting a single real number on stdout.
class ExternalEvaluator {
 public:
  ExternalEvaluator(std::string command_template, TaskKind data_format, std::string workdir)
      : template_(std::move(command_template)),
        format_(data_format),
        workdir_(std::move(workdir)) {
    require(template_.find("{train}") != std::string::npos,
            "ExternalEvaluator: command template lacks a {train} placeholder");
    require(template_.find("{dev}") != std::string::npos,
            "ExternalEvaluator: command template lacks a {dev} placeholder");
  }

  double operator()(const std::vector<Example>& selected,
                    const std::vector<Example>& validation) const {
    const std::string train_path = workdir_ + "/selected.txt";
    const std::string dev_path = workdir_ + "/validation.txt";
    write(train_path, selected);
    write(dev_path, validation);
    std::string cmd = template_;
    replace_all(cmd, "{train}", train_path);
    replace_all(cmd, "{dev}", dev_path);

    std::string output;
    FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
    require(pipe != nullptr, "ExternalEvaluator: failed to launch: ", cmd);
    std::array<char, 4096> buf;
    while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) output += buf.data();
    const int status = pclose(pipe);
    require(status == 0, "ExternalEvaluator: command exited with status ", status, ": ", cmd,
            "\noutput: ", output);

    // strict parse: the trimmed output must be exactly one real number
    std::size_t a = output.find_first_not_of(" \t\r\n");
    std::size_t b = output.find_last_not_of(" \t\r\n");
    require(a != std::string::npos, "ExternalEvaluator: empty output from: ", cmd);
    const std::string trimmed = output.substr(a, b - a + 1);
    char* end = nullptr;
    const double value = std::strtod(trimmed.c_str(), &end);
    require(end == trimmed.c_str() + trimmed.size(),
            "ExternalEvaluator: cannot parse objective value from output: ", output);
    return value;
  }

 private:
  void write(const std::string& path, const std::vector<Example>& examples) const {
    if (format_ == TaskKind::pos) {
      save_tagged_conll(path, examples);
    } else {
      save_labeled_reviews(path, examples);
    }
  }

  static void replace_all(std::string& s, const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  }

  std::string template_;
  TaskKind format_;
  std::string workdir_;
};

inline ExternalEvaluator external_evaluator(const std::string& command_template,
                                            TaskKind data_format, const std::string& workdir) {
  return ExternalEvaluator(command_template, data_format, workdir);
}

}  // namespace datasel
