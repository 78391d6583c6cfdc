#include <doctest.h>

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "taas/corpus.hpp"
#include "taas/error.hpp"
#include "testutil.hpp"

using taas::DocumentPair;
using taas::TopicVocabulary;
using taas::Vocabulary;

namespace {

std::vector<DocumentPair> mini_pairs() {
  // Document counts: c appears 3 times, a and b twice each, so the ranked
  // order is c, then a before b on the lexicographic tie.
  return {{"b b a c c", "c a", "d1"}, {"", "", "d2"}};
}

}  // namespace

TEST_SUITE_BEGIN("corpus");

TEST_CASE("tokenizer lowercases and splits punctuation") {
  CHECK(taas::tokenize("The cat sat.") ==
        std::vector<std::string>{"the", "cat", "sat", "."});
  CHECK(taas::tokenize("Hello,  world!") ==
        std::vector<std::string>{"hello", ",", "world", "!"});
  CHECK(taas::tokenize("don't") == std::vector<std::string>{"don", "'", "t"});
  CHECK(taas::tokenize("3.5%") == std::vector<std::string>{"3", ".", "5", "%"});
  CHECK(taas::tokenize("") == std::vector<std::string>{});
  CHECK(taas::tokenize("  \t\n ") == std::vector<std::string>{});
}

TEST_CASE("tokenizer treats unicode spaces as separators") {
  // U+00A0 no-break space and U+2003 em space between words.
  CHECK(taas::tokenize("a\xc2\xa0m\xe2\x80\x83z") ==
        std::vector<std::string>{"a", "m", "z"});
}

TEST_CASE("join_tokens is a plain space join") {
  CHECK(taas::join_tokens({"a", "b", "."}) == "a b .");
  CHECK(taas::join_tokens({}) == "");
}

TEST_CASE("loading tolerates bad records and reports them") {
  taas::LoadResult res = taas::load_jsonl(testutil::data_file("mixed_records.jsonl"));
  REQUIRE(res.pairs.size() == 4);
  CHECK(res.pairs[0].id == "good-1");
  CHECK_FALSE(res.pairs[0].inference_only());
  CHECK(res.pairs[1].id == "no-summary");
  CHECK(res.pairs[1].inference_only());
  CHECK(res.pairs[2].id == "6");  // line number fallback (blank line counts)
  CHECK(res.pairs[3].id == "7");  // numeric id kept as text
  CHECK(res.diagnostics.size() == 2);
}

TEST_CASE("a line that is not JSON aborts with its location") {
  std::string msg = testutil::message_of<taas::config_error>(
      [] { taas::load_jsonl(testutil::data_file("bad_json.jsonl")); });
  CHECK(msg.find(":2") != std::string::npos);
}

TEST_CASE("missing corpus file is a config error") {
  CHECK_THROWS_AS(taas::load_jsonl("/nonexistent/nowhere.jsonl"),
                  taas::config_error);
}

TEST_CASE("vocabulary ranks by frequency then lexicographically") {
  Vocabulary v = Vocabulary::build(mini_pairs(), 100);
  CHECK(v.token_of(Vocabulary::kPad) == "<pad>");
  CHECK(v.token_of(Vocabulary::kUnk) == "<unk>");
  CHECK(v.token_of(Vocabulary::kBos) == "<bos>");
  CHECK(v.token_of(Vocabulary::kEos) == "<eos>");
  CHECK(v.token_of(Vocabulary::kCls) == "<cls>");
  // Summary tokens count too: c = 2+1, a = 1+1, b = 2; the a/b tie is
  // broken lexicographically.
  CHECK(v.id_of("c") == 5);
  CHECK(v.id_of("a") == 6);
  CHECK(v.id_of("b") == 7);
  CHECK(v.size() == 8);
}

TEST_CASE("vocabulary cap includes the specials") {
  Vocabulary v = Vocabulary::build(mini_pairs(), 7);
  CHECK(v.size() == 7);
  CHECK(v.id_of("c") == 5);
  CHECK(v.id_of("a") == 6);
  CHECK(v.id_of("b") == Vocabulary::kUnk);  // capped out
  CHECK_THROWS_AS(Vocabulary::build(mini_pairs(), 5), taas::config_error);
}

TEST_CASE("vocabulary honors min_count") {
  Vocabulary v = Vocabulary::build(mini_pairs(), 100, 3);
  CHECK(v.size() == 6);  // specials + c
  CHECK(v.id_of("c") == 5);
  CHECK(v.id_of("a") == Vocabulary::kUnk);
}

TEST_CASE("encode maps unknowns to UNK and decode drops specials") {
  Vocabulary v = Vocabulary::build(mini_pairs(), 100);
  std::vector<int> ids = v.encode({"c", "zebra", "b"});
  CHECK(ids == std::vector<int>{5, Vocabulary::kUnk, 7});
  std::vector<int> round{Vocabulary::kBos, 5, Vocabulary::kUnk, 7, Vocabulary::kEos};
  CHECK(v.decode(round) == std::vector<std::string>{"c", "b"});
}

TEST_CASE("vocabulary files round trip and reject tampering") {
  testutil::TempDir tmp("vocab");
  Vocabulary v = Vocabulary::build(mini_pairs(), 100);
  v.save(tmp.file("vocab.txt"));
  Vocabulary back = Vocabulary::load(tmp.file("vocab.txt"));
  CHECK(back.size() == v.size());
  CHECK(back.id_of("a") == v.id_of("a"));

  std::ofstream bad(tmp.file("bad.txt"));
  bad << "<pad>\n<unk>\n<bos>\nwrong\n<cls>\nc\n";
  bad.close();
  CHECK_THROWS_AS(Vocabulary::load(tmp.file("bad.txt")), taas::config_error);
}

TEST_CASE("topic vocabulary drops stopwords, punctuation, and summary terms") {
  std::vector<DocumentPair> pairs{
      {"The cat sat on the mat . The cat ate early", "zebra ran", "d1"}};
  TopicVocabulary tv = TopicVocabulary::build(pairs, 100);
  CHECK(tv.id_of("cat") >= 0);
  CHECK(tv.id_of("mat") >= 0);
  CHECK(tv.id_of("the") == -1);    // stopword
  CHECK(tv.id_of(".") == -1);      // no letters
  CHECK(tv.id_of("zebra") == -1);  // summary-only token
}

TEST_CASE("topic vocabulary with custom stopwords and empty result") {
  std::vector<DocumentPair> pairs{{"alpha beta alpha", "s", "d1"}};
  std::set<std::string> stop{"alpha", "beta"};
  CHECK_THROWS_AS(TopicVocabulary::build(pairs, 100, 1, stop), taas::config_error);
  TopicVocabulary tv = TopicVocabulary::build(pairs, 100, 1, {});
  CHECK(tv.size() == 2);
  CHECK(tv.id_of("alpha") == 0);  // more frequent, so ranked first
}

TEST_CASE("stopword files are one word per line") {
  testutil::TempDir tmp("stop");
  std::ofstream(tmp.file("stop.txt")) << "alpha\nbeta\n\n";
  std::set<std::string> words = taas::load_stopwords(tmp.file("stop.txt"));
  CHECK(words == std::set<std::string>{"alpha", "beta"});
  CHECK_THROWS_AS(taas::load_stopwords(tmp.file("missing.txt")),
                  taas::config_error);
  CHECK(taas::default_stopwords().count("the") == 1);
  CHECK(taas::default_stopwords().count("cat") == 0);
}

TEST_CASE("bag of words counts topic-vocabulary tokens only") {
  std::vector<DocumentPair> pairs{{"cat mat cat unseen", "s", "d1"}};
  TopicVocabulary tv = TopicVocabulary::build(pairs, 100);
  DocumentPair doc{"cat cat mat novel the", "", "q"};
  std::vector<double> bow = taas::to_bow(doc, tv);
  REQUIRE(bow.size() == tv.size());
  CHECK(bow[tv.id_of("cat")] == 2.0);
  CHECK(bow[tv.id_of("mat")] == 1.0);
}

TEST_CASE("document and summary encodings add their frame tokens") {
  Vocabulary v = Vocabulary::build(mini_pairs(), 100);
  std::vector<int> doc = taas::encode_document("c a b c a b", v, 4);
  REQUIRE(doc.size() == 4);  // CLS + 3 tokens after truncation
  CHECK(doc[0] == Vocabulary::kCls);
  CHECK(doc[1] == v.id_of("c"));

  std::vector<int> sum = taas::encode_summary("c a b c", v, 3);
  REQUIRE(sum.size() == 4);  // 3 tokens + EOS
  CHECK(sum.back() == Vocabulary::kEos);
}

TEST_CASE("batches pad to the longest row with exact masks") {
  std::vector<DocumentPair> pairs{
      {"c a b", "c", "p1"}, {"c", "a c", "p2"}, {"a b c a b", "b a c", "p3"}};
  Vocabulary v = Vocabulary::build(pairs, 100);
  TopicVocabulary tv = TopicVocabulary::build(
      pairs, 100, 1, std::set<std::string>{});
  auto batches = taas::make_batches(pairs, v, tv, 2, 16, 8, 0);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0].size() == 2);
  CHECK(batches[1].size() == 1);

  std::size_t total_docs = 0;
  for (const auto& b : batches) {
    total_docs += b.size();
    REQUIRE(b.input_mask.rows == b.size());
    for (std::size_t d = 0; d < b.size(); ++d) {
      REQUIRE(b.input_ids[d].size() == b.input_mask.cols);
      for (std::size_t i = 0; i < b.input_ids[d].size(); ++i) {
        const bool pad = b.input_ids[d][i] == Vocabulary::kPad;
        CHECK(b.input_mask(d, i) == (pad ? 0.0 : 1.0));
      }
      CHECK(b.input_ids[d][0] == Vocabulary::kCls);
      bool saw_eos = false;
      for (std::size_t i = 0; i < b.target_ids[d].size(); ++i) {
        const bool pad = b.target_ids[d][i] == Vocabulary::kPad;
        CHECK(b.target_mask(d, i) == (pad ? 0.0 : 1.0));
        saw_eos = saw_eos || b.target_ids[d][i] == Vocabulary::kEos;
      }
      CHECK(saw_eos);
    }
    CHECK(b.bow.rows == b.size());
    CHECK(b.bow.cols == tv.size());
  }
  CHECK(total_docs == 3);
}

TEST_CASE("batch shuffling is a pure function of the seed") {
  std::vector<DocumentPair> pairs;
  for (int i = 0; i < 12; ++i)
    pairs.push_back({"a b c word" + std::to_string(i), "a b", "id" + std::to_string(i)});
  Vocabulary v = Vocabulary::build(pairs, 100);
  TopicVocabulary tv = TopicVocabulary::build(pairs, 100, 1, std::set<std::string>{});

  auto run = [&](std::uint64_t seed) {
    std::vector<std::string> order;
    for (const auto& b : taas::make_batches(pairs, v, tv, 5, 16, 8, seed))
      for (const auto& id : b.ids) order.push_back(id);
    return order;
  };
  CHECK(run(3) == run(3));
  CHECK(run(3) != run(4));

  std::vector<std::string> sorted = run(3);
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::string> expect;
  for (int i = 0; i < 12; ++i) expect.push_back("id" + std::to_string(i));
  std::sort(expect.begin(), expect.end());
  CHECK(sorted == expect);  // a permutation, nothing dropped
}

TEST_CASE("batches refuse inference-only records") {
  std::vector<DocumentPair> pairs{{"a b c", "", "p1"}};
  Vocabulary v = Vocabulary::build(pairs, 100);
  TopicVocabulary tv =
      TopicVocabulary::build(pairs, 100, 1, std::set<std::string>{});
  CHECK_THROWS_AS(taas::make_batches(pairs, v, tv, 2, 16, 8, 0),
                  std::invalid_argument);
}

TEST_SUITE_END();
