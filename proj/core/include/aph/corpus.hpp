#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace aph {

/// Thrown on malformed input files and contract violations in data handling.
/// Messages carry the file path and line number where that makes sense.
class CorpusError : public std::runtime_error {
 public:
  explicit CorpusError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ReviewRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;  // stars in [1,5]
  std::string text;
  std::string review_id;           // optional; "" when the source had none
  std::vector<int> sentence_ids;   // indices into the parsed-sentence list,
                                   // filled by align_reviews

  bool operator==(const ReviewRecord&) const = default;
};

struct Token {
  int id = 0;  // 1-based position within the sentence
  std::string form;
  std::string lemma;
  std::string upos;
  int head = 0;  // 0 designates the root
  std::string deprel;
};

struct ParsedSentence {
  std::string review_id;              // from a "# review_id = ..." comment
  std::vector<std::string> comments;  // all comment lines, order preserved
  std::vector<Token> tokens;
};

struct Lexicon {
  std::unordered_set<std::string> positive;
  std::unordered_set<std::string> negative;
};

/// Lemma -> canonical lemma mapping. Chains in the source file are resolved
/// at load time so lookups are single-step; a cycle is a load error.
class SynonymTable {
 public:
  SynonymTable() = default;  // identity mapping

  /// TSV file, one "lemma<TAB>canonical" entry per line.
  static SynonymTable load(const std::string& path);
  static SynonymTable from_pairs(
      const std::vector<std::pair<std::string, std::string>>& pairs);

  std::string resolve(const std::string& lemma) const;
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, std::string> map_;
};

struct DatasetSplit {
  std::vector<ReviewRecord> train;
  std::vector<ReviewRecord> validation;
  std::vector<ReviewRecord> test;
  std::uint64_t seed = 0;
};

/// JSONL reviews, one object per line with fields user, item, rating, text
/// and optional review_id. Ratings outside [1,5] are rejected.
std::vector<ReviewRecord> load_reviews(const std::string& path);

/// Inverse of load_reviews; load_reviews(write_reviews(r)) == r.
void write_reviews(const std::string& path,
                   const std::vector<ReviewRecord>& records);

/// CoNLL-U sentences separated by blank lines. Multiword ranges (id "3-4")
/// and empty nodes (id "3.1") are skipped; head indices, duplicate ids,
/// root count and dependency labels are validated.
std::vector<ParsedSentence> load_conllu(const std::string& path);

/// One lemma per line; '#' and ';' start comment lines. The two lists must
/// be disjoint.
Lexicon load_lexicon(const std::string& positive_path,
                     const std::string& negative_path);

/// Fills each review's sentence_ids with the indices of sentences carrying
/// its review_id (file order). Duplicate review ids across records are an
/// error; reviews without parses get an empty list.
void align_reviews(std::vector<ReviewRecord>& reviews,
                   const std::vector<ParsedSentence>& sentences);

/// Iteratively drops users and items with fewer than k records until every
/// survivor has at least k (the k-core). Input order is preserved.
std::vector<ReviewRecord> filter_min_reviews(std::vector<ReviewRecord> records,
                                             int k);

/// Seeded uniform shuffle, then test takes the first round(n*test_ratio)
/// records, validation the next round(n*val_ratio), train the rest.
DatasetSplit split_dataset(const std::vector<ReviewRecord>& records,
                           double test_ratio, double val_ratio,
                           std::uint64_t seed);

}  // namespace aph
