#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <set>

#include "datasel/corpus.hpp"
#include "support/tempdir.hpp"

using namespace datasel;
using testsupport::TempDir;

namespace {
void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}
}  // namespace

TEST_CASE("tokenize splits on whitespace with lowercasing") {
  CHECK(tokenize("Great DVD !") == std::vector<std::string>{"great", "dvd", "!"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("a  b") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("a\tb\nc") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("tokenize respects the lowercase flag") {
  TokenizeConfig cfg;
  cfg.lowercase = false;
  CHECK(tokenize("Great DVD", cfg) == std::vector<std::string>{"Great", "DVD"});
}

TEST_CASE("tokenize handles unicode whitespace and preserves punctuation") {
  // U+00A0 no-break space and U+2003 em space act as separators
  CHECK(tokenize("a\xC2\xA0z") == std::vector<std::string>{"a", "z"});
  CHECK(tokenize("a\xE2\x80\x83z") == std::vector<std::string>{"a", "z"});
  CHECK(tokenize("don't stop!") == std::vector<std::string>{"don't", "stop!"});
  // non-ASCII letters pass through untouched
  CHECK(tokenize("caf\xC3\xA9 bar") == std::vector<std::string>{"caf\xC3\xA9", "bar"});
}

TEST_CASE("load_labeled_reviews parses valid files") {
  TempDir dir("corpus");
  write_file(dir.file("books.tsv"), "1\tGreat book !\n0\tterrible waste\n\n1\tloved it\n");
  const auto corpus = load_labeled_reviews(dir.file("books.tsv"));
  REQUIRE(corpus.labeled.size() == 3);
  CHECK(corpus.domain == "books");
  CHECK(corpus.labeled[0].polarity() == 1);
  CHECK(corpus.labeled[0].tokens == std::vector<std::string>{"great", "book", "!"});
  CHECK(corpus.labeled[1].polarity() == 0);
  CHECK(corpus.labeled[2].id == "books/L2");
}

TEST_CASE("load_labeled_reviews rejects malformed lines with line numbers") {
  TempDir dir("corpus");
  SECTION("label outside {0,1}") {
    write_file(dir.file("bad.tsv"), "1\tfine\n2\tok\n");
    CHECK_THROWS_WITH(load_labeled_reviews(dir.file("bad.tsv")),
                      Catch::Matchers::ContainsSubstring(":2:"));
  }
  SECTION("missing tab") {
    write_file(dir.file("bad.tsv"), "1 no tab here\n");
    CHECK_THROWS_WITH(load_labeled_reviews(dir.file("bad.tsv")),
                      Catch::Matchers::ContainsSubstring(":1:"));
  }
  SECTION("missing file") { CHECK_THROWS(load_labeled_reviews(dir.file("nope.tsv"))); }
}

TEST_CASE("load_labeled_reviews on an empty file yields an empty corpus") {
  TempDir dir("corpus");
  write_file(dir.file("empty.tsv"), "");
  CHECK(load_labeled_reviews(dir.file("empty.tsv")).labeled.empty());
}

TEST_CASE("load_tagged_conll parses sentence blocks") {
  TempDir dir("corpus");
  write_file(dir.file("t.conll"),
             "The\tDET\ndog\tNOUN\nbarks\tVERB\n\nA\tDET\ncat\tNOUN\nsat\tVERB\ndown\tADV\n.\tPUNCT\n\n\n");
  const auto corpus = load_tagged_conll(dir.file("t.conll"));
  REQUIRE(corpus.labeled.size() == 2);
  CHECK(corpus.labeled[0].tokens.size() == 3);
  CHECK(corpus.labeled[1].tokens.size() == 5);
  CHECK(corpus.labeled[0].tags() == std::vector<std::string>{"DET", "NOUN", "VERB"});
  CHECK(corpus.labeled[0].tokens[0] == "The");  // surface case kept
}

TEST_CASE("load_tagged_conll rejects rows without two columns") {
  TempDir dir("corpus");
  write_file(dir.file("bad.conll"), "The\tDET\ndog\n");
  CHECK_THROWS_WITH(load_tagged_conll(dir.file("bad.conll")),
                    Catch::Matchers::ContainsSubstring(":2:"));
}

TEST_CASE("corpus round-trips through save and load") {
  TempDir dir("corpus");
  SECTION("reviews") {
    write_file(dir.file("a.tsv"), "1\tgood stuff here\n0\tbad news\n1\tx y z !\n");
    const auto original = load_labeled_reviews(dir.file("a.tsv"), "a");
    save_labeled_reviews(dir.file("b.tsv"), original.labeled);
    const auto reloaded = load_labeled_reviews(dir.file("b.tsv"), "a");
    REQUIRE(reloaded.labeled.size() == original.labeled.size());
    for (std::size_t i = 0; i < original.labeled.size(); ++i) {
      CHECK(reloaded.labeled[i].id == original.labeled[i].id);
      CHECK(reloaded.labeled[i].tokens == original.labeled[i].tokens);
      CHECK(reloaded.labeled[i].polarity() == original.labeled[i].polarity());
    }
  }
  SECTION("conll") {
    write_file(dir.file("a.conll"), "The\tDET\ndog\tNOUN\n\nIt\tPRON\nran\tVERB\n\n");
    const auto original = load_tagged_conll(dir.file("a.conll"), "a");
    save_tagged_conll(dir.file("b.conll"), original.labeled);
    const auto reloaded = load_tagged_conll(dir.file("b.conll"), "a");
    REQUIRE(reloaded.labeled.size() == original.labeled.size());
    for (std::size_t i = 0; i < original.labeled.size(); ++i) {
      CHECK(reloaded.labeled[i].tokens == original.labeled[i].tokens);
      CHECK(reloaded.labeled[i].tags() == original.labeled[i].tags());
    }
  }
}

namespace {
DomainCorpus corpus_from_docs(const std::vector<std::vector<std::string>>& docs) {
  DomainCorpus corpus;
  corpus.domain = "d";
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Example ex;
    ex.domain = "d";
    ex.id = "d/L" + std::to_string(i);
    ex.tokens = docs[i];
    ex.label = static_cast<int>(i % 2);
    corpus.labeled.push_back(std::move(ex));
  }
  return corpus;
}
}  // namespace

TEST_CASE("build_vocabulary keeps the most frequent types") {
  const auto corpus = corpus_from_docs({{"a", "a", "b"}, {"a", "b", "c"}});
  // counts: a:3 b:2 c:1
  const auto vocab = Vocabulary::build({&corpus}, 2);
  REQUIRE(vocab.size() == 2);
  CHECK(vocab.types() == std::vector<std::string>{"a", "b"});
  CHECK(vocab.prob(0) == Catch::Approx(0.6).margin(1e-12));
  CHECK(vocab.prob(1) == Catch::Approx(0.4).margin(1e-12));
}

TEST_CASE("build_vocabulary breaks frequency ties lexicographically") {
  const auto corpus = corpus_from_docs({{"zeta", "beta"}});
  const auto vocab = Vocabulary::build({&corpus}, 1);
  REQUIRE(vocab.size() == 1);
  CHECK(vocab.types()[0] == "beta");
}

TEST_CASE("build_vocabulary keeps everything when the cap is large") {
  const auto corpus = corpus_from_docs({{"a", "b", "c", "c"}});
  const auto vocab = Vocabulary::build({&corpus}, 100);
  CHECK(vocab.size() == 3);
  double sum = 0.0;
  for (std::size_t i = 0; i < vocab.size(); ++i) sum += vocab.prob(static_cast<int>(i));
  CHECK(sum == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("build_vocabulary rejects max_size zero") {
  const auto corpus = corpus_from_docs({{"a"}});
  CHECK_THROWS(Vocabulary::build({&corpus}, 0));
}

TEST_CASE("vocabulary probabilities always form a distribution") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<std::string>> docs;
    const std::size_t n_docs = 1 + uniform_index(rng, 8);
    for (std::size_t d = 0; d < n_docs; ++d) {
      std::vector<std::string> doc;
      const std::size_t len = 1 + uniform_index(rng, 30);
      for (std::size_t i = 0; i < len; ++i) {
        doc.push_back(std::string(1, static_cast<char>('a' + uniform_index(rng, 12))));
      }
      docs.push_back(std::move(doc));
    }
    const auto corpus = corpus_from_docs(docs);
    const auto vocab = Vocabulary::build({&corpus}, 1 + uniform_index(rng, 10));
    double sum = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      CHECK(vocab.prob(static_cast<int>(i)) >= 0.0);
      sum += vocab.prob(static_cast<int>(i));
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("split_validation partitions deterministically") {
  std::vector<std::vector<std::string>> docs;
  for (int i = 0; i < 200; ++i) docs.push_back({"tok" + std::to_string(i)});
  const auto corpus = corpus_from_docs(docs);

  const auto split = split_validation(corpus, 100, 7);
  CHECK(split.validation.size() == 100);
  CHECK(split.pool.size() == 100);

  // partition: disjoint ids covering all labeled examples
  std::set<std::string> ids;
  for (const auto& ex : split.validation) ids.insert(ex.id);
  for (const auto& ex : split.pool) ids.insert(ex.id);
  CHECK(ids.size() == 200);

  const auto again = split_validation(corpus, 100, 7);
  REQUIRE(again.validation.size() == split.validation.size());
  for (std::size_t i = 0; i < split.validation.size(); ++i) {
    CHECK(again.validation[i].id == split.validation[i].id);
  }

  const auto other = split_validation(corpus, 100, 8);
  bool differs = false;
  for (std::size_t i = 0; i < split.validation.size(); ++i) {
    if (other.validation[i].id != split.validation[i].id) differs = true;
  }
  CHECK(differs);
}

TEST_CASE("split_validation edge cases") {
  const auto corpus = corpus_from_docs({{"a"}, {"b"}, {"c"}});
  const auto empty = split_validation(corpus, 0, 1);
  CHECK(empty.validation.empty());
  CHECK(empty.pool.size() == 3);
  CHECK_THROWS(split_validation(corpus, 4, 1));
}
