#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "datasel/corpus.hpp"
#include "datasel/repr.hpp"
#include "datasel/util.hpp"

namespace datasel {

struct LdaConfig {
  int topics = 50;
  int iterations = 10;
  double alpha = 0.0;  // <= 0 means 50/K
  double beta = 0.01;
  std::uint64_t seed = 1;
  int infer_sweeps = 20;
};

// Collapsed Gibbs LDA. Training sweeps documents in corpus order, so a fixed
// seed gives bit-identical counts. Inference folds a document in against
// frozen topic-word counts.
class LdaModel {
 public:
  LdaModel() = default;

  LdaModel(int topics, int vocab_size, double alpha, double beta, std::uint64_t seed,
           int infer_sweeps, std::vector<std::vector<int>> word_topic,
           std::vector<std::int64_t> topic_total)
      : topics_(topics),
        vocab_size_(vocab_size),
        alpha_(alpha),
        beta_(beta),
        seed_(seed),
        infer_sweeps_(infer_sweeps),
        word_topic_(std::move(word_topic)),
        topic_total_(std::move(topic_total)) {
    require(topics_ >= 1, "LdaModel: topics must be >= 1");
    require(static_cast<int>(word_topic_.size()) == vocab_size_, "LdaModel: count shape mismatch");
    require(static_cast<int>(topic_total_.size()) == topics_, "LdaModel: topic totals mismatch");
  }

  int topics() const { return topics_; }
  int vocab_size() const { return vocab_size_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  std::uint64_t seed() const { return seed_; }
  int infer_sweeps() const { return infer_sweeps_; }
  const std::vector<std::vector<int>>& word_topic_counts() const { return word_topic_; }
  const std::vector<std::int64_t>& topic_totals() const { return topic_total_; }

  double topic_word_prob(int k, int v) const {
    return (word_topic_[static_cast<std::size_t>(v)][static_cast<std::size_t>(k)] + beta_) /
           (static_cast<double>(topic_total_[static_cast<std::size_t>(k)]) +
            static_cast<double>(vocab_size_) * beta_);
  }

  // Fold-in Gibbs over a token-id document; topic-word counts stay frozen.
  // All-OOV documents (empty id list) fall back to the uniform distribution.
  ProbVector infer(const std::vector<int>& doc_ids) const {
    const std::size_t K = static_cast<std::size_t>(topics_);
    if (doc_ids.empty()) {
      return ProbVector(std::vector<double>(K, 1.0 / static_cast<double>(K)));
    }
    // Deterministic per (model seed, document content).
    std::uint64_t h = seed_;
    h = fnv1a(doc_ids.data(), doc_ids.size() * sizeof(int), h ^ 0x9E3779B97F4A7C15ULL);
    Rng rng(h);

    std::vector<int> z(doc_ids.size());
    std::vector<double> doc_topic(K, 0.0);
    for (std::size_t i = 0; i < doc_ids.size(); ++i) {
      z[i] = static_cast<int>(uniform_index(rng, K));
      doc_topic[static_cast<std::size_t>(z[i])] += 1.0;
    }
    std::vector<double> cumulative(K);
    for (int sweep = 0; sweep < infer_sweeps_; ++sweep) {
      for (std::size_t i = 0; i < doc_ids.size(); ++i) {
        const int v = doc_ids[i];
        doc_topic[static_cast<std::size_t>(z[i])] -= 1.0;
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          total += (doc_topic[k] + alpha_) * topic_word_prob(static_cast<int>(k), v);
          cumulative[k] = total;
        }
        const double u = uniform_real(rng, 0.0, total);
        std::size_t k = 0;
        while (k + 1 < K && cumulative[k] < u) ++k;
        z[i] = static_cast<int>(k);
        doc_topic[k] += 1.0;
      }
    }
    std::vector<double> theta(K);
    const double denom = static_cast<double>(doc_ids.size()) + static_cast<double>(K) * alpha_;
    for (std::size_t k = 0; k < K; ++k) theta[k] = (doc_topic[k] + alpha_) / denom;
    return ProbVector(std::move(theta));
  }

 private:
  int topics_ = 0;
  int vocab_size_ = 0;
  double alpha_ = 0.0;
  double beta_ = 0.01;
  std::uint64_t seed_ = 1;
  int infer_sweeps_ = 20;
  std::vector<std::vector<int>> word_topic_;  // V x K
  std::vector<std::int64_t> topic_total_;     // K
};

inline std::vector<int> tokens_to_ids(const std::vector<std::string>& tokens,
                                      const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) {
    const int idx = vocab.index_of(tok);
    if (idx >= 0) ids.push_back(idx);
  }
  return ids;
}

inline LdaModel train_lda(const std::vector<std::vector<int>>& docs, int vocab_size,
                          const LdaConfig& cfg) {
  require(cfg.topics >= 1, "train_lda: topics must be >= 1");
  require(vocab_size >= 1, "train_lda: empty vocabulary");
  std::size_t total_tokens = 0;
  for (const auto& d : docs) total_tokens += d.size();
  require(total_tokens > 0, "train_lda: corpus has no in-vocabulary tokens");

  const std::size_t K = static_cast<std::size_t>(cfg.topics);
  const double alpha = cfg.alpha > 0.0 ? cfg.alpha : 50.0 / static_cast<double>(cfg.topics);
  const double beta = cfg.beta;
  const double v_beta = static_cast<double>(vocab_size) * beta;

  std::vector<std::vector<int>> word_topic(static_cast<std::size_t>(vocab_size),
                                           std::vector<int>(K, 0));
  std::vector<std::int64_t> topic_total(K, 0);
  std::vector<std::vector<int>> doc_topic(docs.size(), std::vector<int>(K, 0));
  std::vector<std::vector<int>> z(docs.size());

  Rng rng(cfg.seed);
  for (std::size_t m = 0; m < docs.size(); ++m) {
    z[m].resize(docs[m].size());
    for (std::size_t i = 0; i < docs[m].size(); ++i) {
      const int k = static_cast<int>(uniform_index(rng, K));
      z[m][i] = k;
      ++doc_topic[m][static_cast<std::size_t>(k)];
      ++word_topic[static_cast<std::size_t>(docs[m][i])][static_cast<std::size_t>(k)];
      ++topic_total[static_cast<std::size_t>(k)];
    }
  }

  std::vector<double> cumulative(K);
  for (int sweep = 0; sweep < cfg.iterations; ++sweep) {
    for (std::size_t m = 0; m < docs.size(); ++m) {
      for (std::size_t i = 0; i < docs[m].size(); ++i) {
        const int v = docs[m][i];
        const std::size_t old_k = static_cast<std::size_t>(z[m][i]);
        --doc_topic[m][old_k];
        --word_topic[static_cast<std::size_t>(v)][old_k];
        --topic_total[old_k];
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const double p =
              (doc_topic[m][k] + alpha) *
              (word_topic[static_cast<std::size_t>(v)][k] + beta) /
              (static_cast<double>(topic_total[k]) + v_beta);
          total += p;
          cumulative[k] = total;
        }
        const double u = uniform_real(rng, 0.0, total);
        std::size_t k = 0;
        while (k + 1 < K && cumulative[k] < u) ++k;
        z[m][i] = static_cast<int>(k);
        ++doc_topic[m][k];
        ++word_topic[static_cast<std::size_t>(v)][k];
        ++topic_total[k];
      }
    }
  }

  return LdaModel(cfg.topics, vocab_size, alpha, beta, cfg.seed, cfg.infer_sweeps,
                  std::move(word_topic), std::move(topic_total));
}

// Convenience wrapper: one LDA document per example, OOV tokens dropped,
// examples with no in-vocabulary tokens skipped.
inline LdaModel train_lda(const std::vector<const DomainCorpus*>& corpora, const Vocabulary& vocab,
                          const LdaConfig& cfg) {
  require(!corpora.empty(), "train_lda: no corpora");
  std::vector<std::vector<int>> docs;
  for (const auto* corpus : corpora) {
    for (const auto* part : {&corpus->labeled, &corpus->unlabeled}) {
      for (const auto& ex : *part) {
        auto ids = tokens_to_ids(ex.tokens, vocab);
        if (!ids.empty()) docs.push_back(std::move(ids));
      }
    }
  }
  require(!docs.empty(), "train_lda: corpora contain no in-vocabulary tokens");
  return train_lda(docs, static_cast<int>(vocab.size()), cfg);
}

inline ProbVector infer_topics(const LdaModel& model, const std::vector<std::string>& tokens,
                               const Vocabulary& vocab) {
  return model.infer(tokens_to_ids(tokens, vocab));
}

}  // namespace datasel
