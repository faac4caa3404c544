#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "datasel/util.hpp"

namespace datasel {

// A task label: absent, a binary polarity, or a per-token tag sequence.
using Label = std::variant<std::monostate, int, std::vector<std::string>>;

struct Example {
  std::string id;
  std::vector<std::string> tokens;
  Label label;
  std::string domain;

  bool has_label() const { return !std::holds_alternative<std::monostate>(label); }
  bool has_polarity() const { return std::holds_alternative<int>(label); }
  bool has_tags() const { return std::holds_alternative<std::vector<std::string>>(label); }
  int polarity() const { return std::get<int>(label); }
  const std::vector<std::string>& tags() const { return std::get<std::vector<std::string>>(label); }
};

struct DomainCorpus {
  std::string domain;
  std::vector<Example> labeled;
  std::vector<Example> unlabeled;
};

struct TokenizeConfig {
  bool lowercase = true;
};

namespace detail {

inline bool is_space_codepoint(std::uint32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 code point starting at i, advancing i past it.
// Malformed bytes are passed through one at a time.
inline std::uint32_t next_codepoint(const std::string& s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  std::uint32_t cp = b0;
  if (b0 >= 0xF0) { len = 4; cp = b0 & 0x07u; }
  else if (b0 >= 0xE0) { len = 3; cp = b0 & 0x0Fu; }
  else if (b0 >= 0xC0) { len = 2; cp = b0 & 0x1Fu; }
  if (len > 1) {
    if (i + len > s.size()) { ++i; return b0; }
    for (std::size_t k = 1; k < len; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + k]);
      if ((bk & 0xC0u) != 0x80u) { ++i; return b0; }
      cp = (cp << 6) | (bk & 0x3Fu);
    }
  }
  i += len;
  return cp;
}

}  // namespace detail

// Whitespace split with optional ASCII lowercasing; punctuation survives as tokens.
inline std::vector<std::string> tokenize(const std::string& text, const TokenizeConfig& cfg = {}) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const std::uint32_t cp = detail::next_codepoint(text, i);
    if (detail::is_space_codepoint(cp)) {
      if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
      continue;
    }
    for (std::size_t b = start; b < i; ++b) {
      char c = text[b];
      if (cfg.lowercase && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace detail {

inline std::string filename_stem(const std::string& path) {
  const auto slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return name;
}

inline std::string chomp(std::string line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
  return line;
}

}  // namespace detail

// One example per non-blank line: `<label>\t<text>` with label in {0,1}.
inline DomainCorpus load_labeled_reviews(const std::string& path, const std::string& domain = "",
                                         const TokenizeConfig& cfg = {}) {
  std::ifstream in(path);
  require(in.good(), "load_labeled_reviews: cannot open ", path);
  DomainCorpus corpus;
  corpus.domain = domain.empty() ? detail::filename_stem(path) : domain;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::chomp(line);
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    require(tab != std::string::npos, "load_labeled_reviews: ", path, ":", lineno,
            ": missing tab separator");
    const std::string label_str = line.substr(0, tab);
    require(label_str == "0" || label_str == "1", "load_labeled_reviews: ", path, ":", lineno,
            ": label must be 0 or 1, got '", label_str, "'");
    Example ex;
    ex.domain = corpus.domain;
    ex.id = corpus.domain + "/L" + std::to_string(corpus.labeled.size());
    ex.tokens = tokenize(line.substr(tab + 1), cfg);
    require(!ex.tokens.empty(), "load_labeled_reviews: ", path, ":", lineno, ": empty text");
    ex.label = label_str == "1" ? 1 : 0;
    corpus.labeled.push_back(std::move(ex));
  }
  return corpus;
}

// Two-column tab-separated token/tag rows; blank lines separate sentences.
// Tokens keep their surface form (the tagger uses case features).
inline DomainCorpus load_tagged_conll(const std::string& path, const std::string& domain = "") {
  std::ifstream in(path);
  require(in.good(), "load_tagged_conll: cannot open ", path);
  DomainCorpus corpus;
  corpus.domain = domain.empty() ? detail::filename_stem(path) : domain;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
  auto flush = [&]() {
    if (tokens.empty()) return;
    Example ex;
    ex.domain = corpus.domain;
    ex.id = corpus.domain + "/L" + std::to_string(corpus.labeled.size());
    ex.tokens = std::move(tokens);
    ex.label = std::move(tags);
    corpus.labeled.push_back(std::move(ex));
    tokens.clear();
    tags.clear();
  };
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::chomp(line);
    if (line.empty()) {
      flush();
      continue;
    }
    const auto tab = line.find('\t');
    require(tab != std::string::npos && line.find('\t', tab + 1) == std::string::npos,
            "load_tagged_conll: ", path, ":", lineno, ": expected exactly 2 tab-separated columns");
    std::string token = line.substr(0, tab);
    std::string tag = line.substr(tab + 1);
    require(!token.empty() && !tag.empty(), "load_tagged_conll: ", path, ":", lineno,
            ": empty column");
    tokens.push_back(std::move(token));
    tags.push_back(std::move(tag));
  }
  flush();
  return corpus;
}

// Loads examples without labels, one document per non-blank line.
inline std::vector<Example> load_unlabeled_lines(const std::string& path, const std::string& domain,
                                                 const TokenizeConfig& cfg = {}) {
  std::ifstream in(path);
  require(in.good(), "load_unlabeled_lines: cannot open ", path);
  std::vector<Example> out;
  std::string line;
  while (std::getline(in, line)) {
    line = detail::chomp(line);
    if (line.empty()) continue;
    Example ex;
    ex.domain = domain;
    ex.id = domain + "/U" + std::to_string(out.size());
    ex.tokens = tokenize(line, cfg);
    if (ex.tokens.empty()) continue;
    out.push_back(std::move(ex));
  }
  return out;
}

inline void save_labeled_reviews(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  require(out.good(), "save_labeled_reviews: cannot open ", path, " for writing");
  for (const auto& ex : examples) {
    out << (ex.has_polarity() ? ex.polarity() : 0) << '\t' << join(ex.tokens, " ") << '\n';
  }
}

inline void save_tagged_conll(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream out(path);
  require(out.good(), "save_tagged_conll: cannot open ", path, " for writing");
  for (const auto& ex : examples) {
    const auto& tags = ex.tags();
    require(tags.size() == ex.tokens.size(), "save_tagged_conll: tag/token length mismatch in ",
            ex.id);
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      out << ex.tokens[i] << '\t' << tags[i] << '\n';
    }
    out << '\n';
  }
}

class Vocabulary {
 public:
  Vocabulary() = default;

  Vocabulary(std::vector<std::string> types, std::vector<double> probs)
      : types_(std::move(types)), probs_(std::move(probs)) {
    require(types_.size() == probs_.size(), "Vocabulary: type/prob size mismatch");
    double sum = 0.0;
    for (double p : probs_) {
      require(p >= 0.0, "Vocabulary: negative probability");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "Vocabulary: probabilities sum to ", sum);
    for (std::size_t i = 0; i < types_.size(); ++i) index_.emplace(types_[i], static_cast<int>(i));
  }

  // Keeps the max_size most frequent types, ties broken lexicographically;
  // probabilities are relative frequencies over the retained occurrences.
  static Vocabulary build(const std::vector<const DomainCorpus*>& corpora, std::size_t max_size) {
    require(max_size > 0, "Vocabulary::build: max_size must be positive");
    require(!corpora.empty(), "Vocabulary::build: no corpora");
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto* corpus : corpora) {
      for (const auto* part : {&corpus->labeled, &corpus->unlabeled}) {
        for (const auto& ex : *part) {
          for (const auto& tok : ex.tokens) ++counts[tok];
        }
      }
    }
    require(!counts.empty(), "Vocabulary::build: corpora contain no tokens");
    std::vector<std::pair<std::string, std::uint64_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (items.size() > max_size) items.resize(max_size);
    std::uint64_t total = 0;
    for (const auto& it : items) total += it.second;
    std::vector<std::string> types;
    std::vector<double> probs;
    types.reserve(items.size());
    probs.reserve(items.size());
    for (auto& it : items) {
      types.push_back(std::move(it.first));
      probs.push_back(static_cast<double>(it.second) / static_cast<double>(total));
    }
    return Vocabulary(std::move(types), std::move(probs));
  }

  std::size_t size() const { return types_.size(); }
  const std::vector<std::string>& types() const { return types_; }
  const std::vector<double>& probs() const { return probs_; }

  // -1 when out of vocabulary.
  int index_of(const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? -1 : it->second;
  }

  double prob(int idx) const { return probs_[static_cast<std::size_t>(idx)]; }

  std::optional<double> prob_of(const std::string& w) const {
    const int idx = index_of(w);
    if (idx < 0) return std::nullopt;
    return probs_[static_cast<std::size_t>(idx)];
  }

 private:
  std::vector<std::string> types_;
  std::vector<double> probs_;
  std::unordered_map<std::string, int> index_;
};

struct Split {
  std::vector<Example> validation;
  std::vector<Example> pool;
};

// Uniform sample without replacement; validation keeps draw order, pool keeps corpus order.
inline Split split_validation(const DomainCorpus& corpus, std::size_t size, std::uint64_t seed) {
  require(corpus.labeled.size() >= size, "split_validation: requested ", size,
          " validation examples but only ", corpus.labeled.size(), " labeled available");
  Rng rng(seed);
  const auto picked = sample_without_replacement(corpus.labeled.size(), size, rng);
  std::vector<bool> in_validation(corpus.labeled.size(), false);
  Split split;
  split.validation.reserve(size);
  for (auto i : picked) {
    in_validation[i] = true;
    split.validation.push_back(corpus.labeled[i]);
  }
  for (std::size_t i = 0; i < corpus.labeled.size(); ++i) {
    if (!in_validation[i]) split.pool.push_back(corpus.labeled[i]);
  }
  return split;
}

}  // namespace datasel
