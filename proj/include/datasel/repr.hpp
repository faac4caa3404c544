#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "datasel/corpus.hpp"
#include "datasel/util.hpp"

namespace datasel {

// A discrete distribution: entries >= 0, sum 1 within 1e-9.
struct ProbVector {
  std::vector<double> p;

  ProbVector() = default;

  explicit ProbVector(std::vector<double> values) : p(std::move(values)) {
    double sum = 0.0;
    for (double x : p) {
      require(x >= 0.0 && std::isfinite(x), "ProbVector: entries must be finite and >= 0");
      sum += x;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "ProbVector: entries sum to ", sum, ", expected 1");
  }

  static ProbVector from_counts(const std::vector<double>& counts) {
    double total = 0.0;
    for (double c : counts) {
      require(c >= 0.0 && std::isfinite(c), "ProbVector::from_counts: negative count");
      total += c;
    }
    require(total > 0.0, "ProbVector::from_counts: all counts are zero");
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) p[i] = counts[i] / total;
    return ProbVector(std::move(p));
  }

  std::size_t size() const { return p.size(); }
  double operator[](std::size_t i) const { return p[i]; }
};

using DenseVector = std::vector<double>;

// Relative frequency of in-vocabulary tokens over V.
inline ProbVector term_distribution(const std::vector<std::string>& tokens,
                                    const Vocabulary& vocab) {
  std::vector<double> counts(vocab.size(), 0.0);
  std::size_t hits = 0;
  for (const auto& tok : tokens) {
    const int idx = vocab.index_of(tok);
    if (idx >= 0) {
      counts[static_cast<std::size_t>(idx)] += 1.0;
      ++hits;
    }
  }
  require(hits > 0, "term_distribution: no in-vocabulary tokens");
  return ProbVector::from_counts(counts);
}

// Term distribution over the concatenation of a domain's labeled + unlabeled tokens.
inline ProbVector domain_representation(const DomainCorpus& corpus, const Vocabulary& vocab) {
  std::vector<double> counts(vocab.size(), 0.0);
  std::size_t hits = 0;
  for (const auto* part : {&corpus.labeled, &corpus.unlabeled}) {
    for (const auto& ex : *part) {
      for (const auto& tok : ex.tokens) {
        const int idx = vocab.index_of(tok);
        if (idx >= 0) {
          counts[static_cast<std::size_t>(idx)] += 1.0;
          ++hits;
        }
      }
    }
  }
  require(hits > 0, "domain_representation: domain '", corpus.domain,
          "' has no in-vocabulary tokens");
  return ProbVector::from_counts(counts);
}

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  EmbeddingTable(std::unordered_map<std::string, DenseVector> vectors, std::size_t dim,
                 double smoothing)
      : vectors_(std::move(vectors)), dim_(dim), smoothing_(smoothing) {
    require(smoothing_ > 0.0, "EmbeddingTable: smoothing factor must be > 0");
    for (const auto& [w, v] : vectors_) {
      require(v.size() == dim_, "EmbeddingTable: vector for '", w, "' has dimension ", v.size(),
              ", expected ", dim_);
    }
  }

  // Text format: one `word v1 v2 ... vd` per line; duplicate word -> last wins.
  static EmbeddingTable load(const std::string& path, double smoothing = 1e-3) {
    std::ifstream in(path);
    require(in.good(), "EmbeddingTable::load: cannot open ", path);
    std::unordered_map<std::string, DenseVector> vectors;
    std::size_t dim = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = detail::chomp(line);
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string word;
      row >> word;
      DenseVector vec;
      double x;
      while (row >> x) vec.push_back(x);
      require(!vec.empty(), "EmbeddingTable::load: ", path, ":", lineno, ": no vector values");
      if (dim == 0) dim = vec.size();
      require(vec.size() == dim, "EmbeddingTable::load: ", path, ":", lineno, ": dimension ",
              vec.size(), " differs from ", dim);
      vectors[word] = std::move(vec);
    }
    return EmbeddingTable(std::move(vectors), dim, smoothing);
  }

  const DenseVector* find(const std::string& w) const {
    auto it = vectors_.find(w);
    return it == vectors_.end() ? nullptr : &it->second;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  double smoothing() const { return smoothing_; }

 private:
  std::unordered_map<std::string, DenseVector> vectors_;
  std::size_t dim_ = 0;
  double smoothing_ = 1e-3;
};

// Probability-weighted embedding average: (1/n) sum_i v_{w_i} * sqrt(a / p(w_i)),
// n counting only contributing tokens; tokens lacking an embedding or an
// in-vocabulary probability are skipped.
inline DenseVector embed_example(const std::vector<std::string>& tokens,
                                 const EmbeddingTable& table, const Vocabulary& word_probs) {
  DenseVector acc(table.dim(), 0.0);
  std::size_t n = 0;
  const double a = table.smoothing();
  for (const auto& tok : tokens) {
    const DenseVector* vec = table.find(tok);
    if (!vec) continue;
    const auto p = word_probs.prob_of(tok);
    if (!p || *p <= 0.0) continue;
    const double w = std::sqrt(a / *p);
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += w * (*vec)[d];
    ++n;
  }
  require(n > 0, "embed_example: no token has both an embedding and a vocabulary probability");
  for (double& x : acc) x /= static_cast<double>(n);
  return acc;
}

}  // namespace datasel
