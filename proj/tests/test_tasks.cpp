#include <catch2/catch_amalgamated.hpp>

#include "datasel/tasks.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace datasel;
using testsupport::TempDir;

namespace {

Example doc(const std::string& id, const std::vector<std::string>& tokens, int label) {
  Example ex;
  ex.id = id;
  ex.domain = "d";
  ex.tokens = tokens;
  ex.label = label;
  return ex;
}

// Linearly separable fixture: positives contain "good", negatives "bad".
std::vector<Example> separable_fixture(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> filler{"the", "movie", "plot", "it", "was", "very"};
  Rng rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<std::string> tokens;
    const std::size_t len = 4 + uniform_index(rng, 6);
    for (std::size_t k = 0; k < len; ++k) {
      tokens.push_back(filler[uniform_index(rng, filler.size())]);
    }
    tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, tokens.size())),
                  label == 1 ? "good" : "bad");
    out.push_back(doc("d/L" + std::to_string(i), tokens, label));
  }
  return out;
}

}  // namespace

TEST_CASE("tf-idf document frequencies are counted per document") {
  const std::vector<Example> docs{doc("0", {"a", "b"}, 0), doc("1", {"a", "c"}, 1)};
  const auto vec = TfidfVectorizer::fit(docs, 100);
  CHECK(vec.document_frequency("a") == 2);
  CHECK(vec.document_frequency("b") == 1);
  CHECK(vec.document_frequency("c") == 1);
  CHECK(vec.document_frequency("a b") == 1);  // bigram
  CHECK(vec.num_documents() == 2);
}

TEST_CASE("tf-idf keeps only the most frequent n-grams under the cap") {
  const std::vector<Example> docs{doc("0", {"a", "a", "b"}, 0), doc("1", {"a"}, 1)};
  const auto vec = TfidfVectorizer::fit(docs, 1);
  CHECK(vec.size() == 1);
  // "a" is the most frequent gram; everything else is dropped
  CHECK(vec.transform({"b"}).empty());
  CHECK_FALSE(vec.transform({"a"}).empty());
}

TEST_CASE("identical documents map to identical tf-idf vectors") {
  const std::vector<Example> docs{doc("0", {"x", "y", "x"}, 0), doc("1", {"x", "y", "x"}, 1)};
  const auto vec = TfidfVectorizer::fit(docs, 100);
  CHECK(vec.transform(docs[0].tokens) == vec.transform(docs[1].tokens));
}

TEST_CASE("tf-idf vectors are l2-normalized") {
  const auto docs = separable_fixture(20, 1);
  const auto vec = TfidfVectorizer::fit(docs, 1000);
  for (const auto& d : docs) {
    double norm2 = 0.0;
    for (const auto& [idx, v] : vec.transform(d.tokens)) norm2 += v * v;
    CHECK(norm2 == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("sentiment classifier separates a separable fixture") {
  const auto train = separable_fixture(60, 2);
  const auto vec = TfidfVectorizer::fit(train, 1000);
  const auto model = LinearClassifier::train(train, vec, SentimentHyper{10, 0.1, 7});
  CHECK(sentiment_accuracy(model, vec, train) == 1.0);
}

TEST_CASE("sentiment training is deterministic per seed") {
  const auto train = separable_fixture(40, 3);
  const auto vec = TfidfVectorizer::fit(train, 1000);
  const auto a = LinearClassifier::train(train, vec, SentimentHyper{5, 0.1, 42});
  const auto b = LinearClassifier::train(train, vec, SentimentHyper{5, 0.1, 42});
  CHECK(a.weights() == b.weights());
  CHECK(a.bias() == b.bias());
  const auto c = LinearClassifier::train(train, vec, SentimentHyper{5, 0.1, 43});
  CHECK(a.weights() != c.weights());
}

TEST_CASE("empty-feature documents fall back to the bias sign") {
  const auto train = separable_fixture(40, 4);
  const auto vec = TfidfVectorizer::fit(train, 1000);
  const auto model = LinearClassifier::train(train, vec, SentimentHyper{});
  const auto empty = vec.transform({"totally-unseen-token"});
  CHECK(empty.empty());
  CHECK(model.predict(empty) == (model.bias() >= 0.0 ? 1 : 0));
}

TEST_CASE("single-class training sets are rejected") {
  std::vector<Example> docs{doc("0", {"a"}, 1), doc("1", {"b"}, 1)};
  const auto vec = TfidfVectorizer::fit(docs, 100);
  CHECK_THROWS(LinearClassifier::train(docs, vec, SentimentHyper{}));
}

TEST_CASE("tagger memorizes a single sentence") {
  Example sent;
  sent.id = "s/L0";
  sent.domain = "s";
  sent.tokens = {"the", "dog", "runs", "."};
  sent.label = std::vector<std::string>{"DET", "NOUN", "VERB", "PUNCT"};
  const auto model = PerceptronTagger::train({sent}, TaggerConfig{5, 0.2, 1});
  CHECK(tagging_accuracy(model, {sent}) == 1.0);
}

TEST_CASE("tagger never crashes on unseen words") {
  const auto train = testsupport::make_tagged_corpus(50, 5);
  const auto model = PerceptronTagger::train(train, TaggerConfig{5, 0.2, 1});
  const auto tags = model.tag({"Zyzzyva", "qwertyuiop", "."});
  CHECK(tags.size() == 3);
  for (const auto& t : tags) CHECK_FALSE(t.empty());
}

TEST_CASE("tagger beats the per-token majority baseline on held-out data") {
  const auto corpus = testsupport::make_tagged_corpus(250, 6);
  const std::vector<Example> train(corpus.begin(), corpus.begin() + 200);
  const std::vector<Example> test(corpus.begin() + 200, corpus.end());
  const auto model = PerceptronTagger::train(train, TaggerConfig{5, 0.2, 1});
  const double tagger_acc = tagging_accuracy(model, test);
  const double majority_acc = testsupport::majority_tag_accuracy(train, test);
  INFO("tagger=" << tagger_acc << " majority=" << majority_acc);
  CHECK(tagger_acc > majority_acc);
}

TEST_CASE("tagger training accuracy does not degrade over iterations on a separable fixture") {
  const auto train = testsupport::make_tagged_corpus(80, 7);
  double prev = 0.0;
  for (int iters : {1, 3, 5}) {
    const auto model = PerceptronTagger::train(train, TaggerConfig{iters, 0.2, 3});
    const double acc = tagging_accuracy(model, train);
    CHECK(acc >= prev - 0.02);
    prev = acc;
  }
  CHECK(prev > 0.9);
}

TEST_CASE("evaluate dispatches by objective kind and stays within [0,1]") {
  const auto train = separable_fixture(40, 8);
  const auto vec = TfidfVectorizer::fit(train, 1000);
  const auto model = LinearClassifier::train(train, vec, SentimentHyper{});

  Objective objective;
  objective.kind = TaskKind::sentiment;
  objective.evaluation = &train;
  const double acc = evaluate(objective, model, vec);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(acc == 1.0);  // perfect model on its separable training set

  objective.kind = TaskKind::pos;
  CHECK_THROWS(evaluate(objective, model, vec));

  const std::vector<Example> empty;
  Objective bad;
  bad.kind = TaskKind::sentiment;
  bad.evaluation = &empty;
  CHECK_THROWS(evaluate(bad, model, vec));
}

TEST_CASE("POS accuracy counts tokens, not sentences") {
  Example s1, s2;
  s1.tokens = {"a"};
  s1.label = std::vector<std::string>{"X"};
  s2.tokens = std::vector<std::string>(9, "b");
  s2.label = std::vector<std::string>(9, "Y");
  // model that tags everything "Y": train on s2 only
  s2.id = "s/L0";
  const auto model = PerceptronTagger::train({s2}, TaggerConfig{1, 0.2, 1});
  const double acc = tagging_accuracy(model, {s1, s2});
  CHECK(acc == Catch::Approx(0.9));
}

TEST_CASE("constant predictor scores one half on a balanced set") {
  // all-identical docs force identical predictions
  std::vector<Example> eval_set;
  for (int i = 0; i < 10; ++i) eval_set.push_back(doc(std::to_string(i), {"same", "text"}, i % 2));
  const auto train = separable_fixture(20, 9);
  const auto vec = TfidfVectorizer::fit(train, 1000);
  const auto model = LinearClassifier::train(train, vec, SentimentHyper{});
  CHECK(sentiment_accuracy(model, vec, eval_set) == Catch::Approx(0.5));
}

TEST_CASE("external evaluator runs commands and parses a single real") {
  TempDir dir("ext");
  const auto train = separable_fixture(6, 10);
  const auto validation = separable_fixture(4, 11);

  SECTION("echo returns its value") {
    ExternalEvaluator ev("echo 0.5 # {train} {dev}", TaskKind::sentiment, dir.str());
    CHECK(ev(train, validation) == Catch::Approx(0.5));
  }

  SECTION("non-zero exit is surfaced with output") {
    ExternalEvaluator ev("cat {train} {dev} > /dev/null && exit 1", TaskKind::sentiment, dir.str());
    CHECK_THROWS_WITH(ev(train, validation), Catch::Matchers::ContainsSubstring("status"));
  }

  SECTION("unparsable output is an error") {
    ExternalEvaluator ev("echo not-a-number # {train} {dev}", TaskKind::sentiment, dir.str());
    CHECK_THROWS(ev(train, validation));
  }

  SECTION("missing placeholders are rejected up front") {
    CHECK_THROWS(ExternalEvaluator("echo 1", TaskKind::sentiment, dir.str()));
    CHECK_THROWS(ExternalEvaluator("echo {train}", TaskKind::sentiment, dir.str()));
  }

  SECTION("the selected-data file round-trips through the corpus loader") {
    ExternalEvaluator ev("echo 1.0 # {train} {dev}", TaskKind::sentiment, dir.str());
    ev(train, validation);
    const auto reloaded = load_labeled_reviews(dir.file("selected.txt"), "d");
    REQUIRE(reloaded.labeled.size() == train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      CHECK(reloaded.labeled[i].tokens == train[i].tokens);
      CHECK(reloaded.labeled[i].polarity() == train[i].polarity());
    }
  }
}
