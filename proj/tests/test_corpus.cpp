#include "aph/corpus.hpp"

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "aph/rng.hpp"
#include "doctest.h"
#include "support/temp_dir.hpp"

using aph::align_reviews;
using aph::CorpusError;
using aph::DatasetSplit;
using aph::filter_min_reviews;
using aph::Lexicon;
using aph::load_conllu;
using aph::load_lexicon;
using aph::load_reviews;
using aph::ParsedSentence;
using aph::ReviewRecord;
using aph::Rng;
using aph::split_dataset;
using aph::SynonymTable;
using aph::write_reviews;
using aph::testing::TempDir;

namespace {

std::vector<ReviewRecord> random_records(int n_users, int n_items, int n, Rng& rng) {
  std::vector<ReviewRecord> out;
  for (int j = 0; j < n; ++j) {
    ReviewRecord r;
    r.user_id = "u" + std::to_string(rng.below_int(n_users));
    r.item_id = "i" + std::to_string(rng.below_int(n_items));
    r.rating = 1.0 + rng.below_int(5);
    r.text = "t";
    r.review_id = "r" + std::to_string(j);
    out.push_back(std::move(r));
  }
  return out;
}

// Reference k-core: remove one deficient record at a time. The core is
// unique, so any removal order must agree with the batch implementation.
std::vector<ReviewRecord> kcore_one_at_a_time(std::vector<ReviewRecord> records, int k) {
  while (true) {
    std::unordered_map<std::string, int> uc, ic;
    for (const auto& r : records) {
      ++uc[r.user_id];
      ++ic[r.item_id];
    }
    auto deficient = std::find_if(records.begin(), records.end(), [&](const ReviewRecord& r) {
      return uc[r.user_id] < k || ic[r.item_id] < k;
    });
    if (deficient == records.end()) return records;
    records.erase(deficient);
  }
}

}  // namespace

TEST_CASE("load_reviews maps fields and keeps file order") {
  TempDir dir;
  std::string path = dir.file("r.jsonl",
      "{\"user\":\"u1\",\"item\":\"i1\",\"rating\":5,\"text\":\"Amazing sound\"}\n"
      "{\"user\":\"u2\",\"item\":\"i1\",\"rating\":2.5,\"text\":\"meh\",\"review_id\":\"r9\"}\n");
  auto records = load_reviews(path);
  REQUIRE(records.size() == 2);
  CHECK(records[0].user_id == "u1");
  CHECK(records[0].rating == 5.0);
  CHECK(records[0].review_id == "");
  CHECK(records[1].rating == 2.5);
  CHECK(records[1].review_id == "r9");
}

TEST_CASE("load_reviews rejects malformed lines with their line number") {
  TempDir dir;
  CHECK(load_reviews(dir.file("empty.jsonl", "")).empty());
  CHECK_THROWS_AS(load_reviews(dir.path("absent.jsonl")), CorpusError);

  auto line_of_error = [&](const std::string& contents) {
    std::string path = dir.file("bad.jsonl", contents);
    try {
      load_reviews(path);
    } catch (const CorpusError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  std::string good = "{\"user\":\"u\",\"item\":\"i\",\"rating\":3,\"text\":\"t\"}\n";
  CHECK(line_of_error(good + "{\"user\":\"u\",\"item\":\"i\",\"text\":\"t\"}\n")
            .find(":2:") != std::string::npos);
  CHECK(line_of_error("{\"user\":\"u\",\"item\":\"i\",\"rating\":\"five\",\"text\":\"t\"}\n")
            .find("rating") != std::string::npos);
  CHECK(line_of_error("{\"user\":\"u\",\"item\":\"i\",\"rating\":6,\"text\":\"t\"}\n")
            .find("[1,5]") != std::string::npos);
  CHECK(line_of_error("not json\n").find(":1:") != std::string::npos);
  CHECK(line_of_error("{\"user\":\"\",\"item\":\"i\",\"rating\":3,\"text\":\"t\"}\n")
            .find("empty") != std::string::npos);
}

TEST_CASE("review round trip through disk is identity") {
  TempDir dir;
  Rng rng(11);
  auto records = random_records(5, 5, 40, rng);
  records[3].text = "tabs\tand \"quotes\" and\nnewlines";
  records[4].rating = 3.5;
  std::string path = dir.path("out.jsonl");
  write_reviews(path, records);
  auto reloaded = load_reviews(path);
  CHECK(reloaded == records);
}

TEST_CASE("load_conllu parses blocks, comments and skips ranges") {
  TempDir dir;
  std::string path = dir.file("p.conllu",
      "# review_id = r1\n"
      "# text = Amazing sound\n"
      "1\tAmazing\tamazing\tADJ\t_\t_\t2\tamod\t_\t_\n"
      "2\tsound\tsound\tNOUN\t_\t_\t0\troot\t_\t_\n"
      "\n"
      "# review_id = r2\n"
      "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_\n"
      "2\tn't\tnot\tPART\t_\t_\t3\tneg\t_\t_\n"
      "3\twork\twork\tVERB\t_\t_\t0\troot\t_\t_\n");
  auto sents = load_conllu(path);
  REQUIRE(sents.size() == 2);
  CHECK(sents[0].review_id == "r1");
  CHECK(sents[0].comments.size() == 2);
  REQUIRE(sents[0].tokens.size() == 2);
  CHECK(sents[0].tokens[0].lemma == "amazing");
  CHECK(sents[0].tokens[0].deprel == "amod");
  CHECK(sents[0].tokens[0].head == 2);
  CHECK(sents[0].tokens[1].head == 0);
  // The 1-2 range line is dropped; its parts remain.
  REQUIRE(sents[1].tokens.size() == 3);
  CHECK(sents[1].tokens[1].lemma == "not");
  CHECK(load_conllu(dir.file("blank.conllu", "\n\n")).empty());
}

TEST_CASE("load_conllu validates structure") {
  TempDir dir;
  auto expect_error = [&](const std::string& body, const std::string& needle) {
    std::string path = dir.file("bad.conllu", body);
    try {
      load_conllu(path);
      FAIL("expected error for ", needle);
    } catch (const CorpusError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error(
      "1\ta\ta\tNOUN\t_\t_\t99\troot\t_\t_\n"
      "2\tb\tb\tNOUN\t_\t_\t1\tamod\t_\t_\n"
      "3\tc\tc\tNOUN\t_\t_\t1\tamod\t_\t_\n",
      "out of range");
  expect_error(
      "1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n"
      "1\tb\tb\tNOUN\t_\t_\t1\tamod\t_\t_\n",
      "duplicate token id");
  expect_error(
      "1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n"
      "2\tb\tb\tNOUN\t_\t_\t0\troot\t_\t_\n",
      "2 roots");
  expect_error("1\ta\ta\tNOUN\t_\t_\t0\tmystery_rel\t_\t_\n", "mystery_rel");
  expect_error("1\ta\ta\tNOUN\t_\t_\t1\tamod\t_\t_\n", "heads itself");
  expect_error("1\ta\ta\tNOUN\t0\troot\n", "10 tab-separated columns");
  // Subtyped labels validate against their base relation.
  std::string ok = dir.file("ok.conllu", "1\ta\ta\tNOUN\t_\t_\t0\troot:main\t_\t_\n");
  CHECK(load_conllu(ok).size() == 1);
}

TEST_CASE("lexicon loads lemma lists and rejects overlap") {
  TempDir dir;
  std::string pos = dir.file("pos.txt", "; opinion words\namazing\nGood\n\nexcellent\n");
  std::string neg = dir.file("neg.txt", "# negatives\nbad\nterrible\n");
  Lexicon lex = load_lexicon(pos, neg);
  CHECK(lex.positive.size() == 3);
  CHECK(lex.positive.count("good") == 1);  // lowercased on load
  CHECK(lex.negative.size() == 2);
  std::string overlap = dir.file("neg2.txt", "bad\namazing\n");
  CHECK_THROWS_AS(load_lexicon(pos, overlap), CorpusError);
}

TEST_CASE("synonym table resolves chains and is idempotent") {
  auto table = SynonymTable::from_pairs({{"sound", "audio"}, {"audio", "acoustics"}, {"pops", "pop"}});
  CHECK(table.resolve("sound") == "acoustics");
  CHECK(table.resolve("audio") == "acoustics");
  CHECK(table.resolve("pops") == "pop");
  CHECK(table.resolve("unrelated") == "unrelated");
  for (const std::string& w : {"sound", "audio", "pops", "zzz"})
    CHECK(table.resolve(table.resolve(w)) == table.resolve(w));

  CHECK_THROWS_AS(SynonymTable::from_pairs({{"a", "b"}, {"b", "a"}}), CorpusError);
  CHECK_THROWS_AS(SynonymTable::from_pairs({{"a", "b"}, {"a", "c"}}), CorpusError);
  CHECK(SynonymTable().resolve("x") == "x");

  TempDir dir;
  std::string path = dir.file("syn.tsv", "# aspect merges\nsound\taudio\nPops\tpop\n");
  auto loaded = SynonymTable::load(path);
  CHECK(loaded.resolve("sound") == "audio");
  CHECK(loaded.resolve("pops") == "pop");
}

TEST_CASE("align_reviews links sentence indices by review id") {
  std::vector<ReviewRecord> reviews(3);
  reviews[0].review_id = "a";
  reviews[1].review_id = "b";
  reviews[2].review_id = "";  // never aligned
  std::vector<ParsedSentence> sents(4);
  sents[0].review_id = "b";
  sents[1].review_id = "a";
  sents[2].review_id = "b";
  sents[3].review_id = "unmatched";
  align_reviews(reviews, sents);
  CHECK(reviews[0].sentence_ids == std::vector<int>{1});
  CHECK(reviews[1].sentence_ids == std::vector<int>{0, 2});
  CHECK(reviews[2].sentence_ids.empty());

  std::vector<ReviewRecord> dupes(2);
  dupes[0].review_id = dupes[1].review_id = "same";
  CHECK_THROWS_AS(align_reviews(dupes, sents), CorpusError);
}

TEST_CASE("filter_min_reviews removes thin users and cascades") {
  std::vector<ReviewRecord> records;
  auto add = [&](const std::string& u, const std::string& i) {
    ReviewRecord r;
    r.user_id = u;
    r.item_id = i;
    r.rating = 3;
    records.push_back(r);
  };
  // u1 has 2 records; dropping u1 leaves i2 with 1, which drops u2's record
  // on i2, leaving u2 with 1, which empties the set.
  add("u1", "i1");
  add("u1", "i2");
  add("u2", "i2");
  add("u2", "i1");
  SUBCASE("fixed point keeps everything") {
    CHECK(filter_min_reviews(records, 2).size() == 4);
    CHECK(filter_min_reviews(records, 1) == records);
  }
  SUBCASE("cascade to empty") {
    add("u3", "i1");
    // u3 has one record: removed at k=2; i1 falls to 2, still fine.
    auto kept = filter_min_reviews(records, 2);
    CHECK(kept.size() == 4);
    for (const auto& r : kept) CHECK(r.user_id != "u3");
  }
  CHECK_THROWS_AS(filter_min_reviews(records, 0), CorpusError);
}

TEST_CASE("filter_min_reviews matches one-at-a-time removal on random data") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    auto records = random_records(8, 8, 60, rng);
    for (int k : {2, 3, 4}) {
      auto fast = filter_min_reviews(records, k);
      auto slow = kcore_one_at_a_time(records, k);
      CHECK(fast == slow);
      std::unordered_map<std::string, int> uc, ic;
      for (const auto& r : fast) {
        ++uc[r.user_id];
        ++ic[r.item_id];
      }
      for (const auto& [u, c] : uc) CHECK(c >= k);
      for (const auto& [i, c] : ic) CHECK(c >= k);
    }
  }
}

TEST_CASE("split_dataset partitions by ratio, reproducibly") {
  Rng rng(5);
  auto records = random_records(20, 20, 100, rng);
  DatasetSplit s = split_dataset(records, 0.2, 0.0, 7);
  CHECK(s.test.size() == 20);
  CHECK(s.validation.empty());
  CHECK(s.train.size() == 80);
  CHECK(s.seed == 7);

  DatasetSplit again = split_dataset(records, 0.2, 0.0, 7);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  DatasetSplit other = split_dataset(records, 0.2, 0.0, 8);
  CHECK(other.test != s.test);

  // The three parts together hold exactly the input multiset.
  auto key = [](const ReviewRecord& r) { return r.review_id; };
  std::multiset<std::string> all;
  for (const auto& part : {s.train, s.validation, s.test})
    for (const auto& r : part) all.insert(key(r));
  std::multiset<std::string> expected;
  for (const auto& r : records) expected.insert(key(r));
  CHECK(all == expected);

  DatasetSplit with_val = split_dataset(records, 0.2, 0.1, 7);
  CHECK(with_val.test.size() == 20);
  CHECK(with_val.validation.size() == 10);
  CHECK(with_val.train.size() == 70);

  auto ten = random_records(5, 5, 10, rng);
  CHECK(split_dataset(ten, 0.2, 0.0, 1).test.size() == 2);

  CHECK_THROWS_AS(split_dataset(records, 0.0, 0.0, 1), CorpusError);
  CHECK_THROWS_AS(split_dataset(records, 1.0, 0.0, 1), CorpusError);
  CHECK_THROWS_AS(split_dataset(records, 0.5, 0.6, 1), CorpusError);
}
