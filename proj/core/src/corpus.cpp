#include "aph/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "aph/rng.hpp"
#include "json.hpp"

namespace aph {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, std::size_t line,
                       const std::string& what) {
  throw CorpusError(path + ":" + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError(path + ": cannot open file");
  return in;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Universal Dependencies v2 relations plus the ClearNLP-style labels emitted
// by spaCy's English models (acomp, dobj, ...). Subtypes like "nmod:poss"
// validate against the part before the colon.
const std::unordered_set<std::string>& known_deprels() {
  static const std::unordered_set<std::string> labels{
      // UD v2
      "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc", "ccomp",
      "clf", "compound", "conj", "cop", "csubj", "dep", "det", "discourse",
      "dislocated", "expl", "fixed", "flat", "goeswith", "iobj", "list",
      "mark", "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis",
      "punct", "reparandum", "root", "vocative", "xcomp",
      // spaCy / ClearNLP additions
      "acomp", "agent", "attr", "auxpass", "csubjpass", "dative", "dobj",
      "intj", "meta", "neg", "nn", "npadvmod", "nsubjpass", "oprd", "pcomp",
      "pobj", "poss", "preconj", "predet", "prep", "prt", "quantmod", "relcl",
      "subtok"};
  return labels;
}

bool valid_deprel(const std::string& deprel) {
  const std::size_t colon = deprel.find(':');
  const std::string base = colon == std::string::npos ? deprel : deprel.substr(0, colon);
  return known_deprels().count(base) > 0;
}

}  // namespace

std::vector<ReviewRecord> load_reviews(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<ReviewRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) fail(path, lineno, "not a JSON object");
    for (const char* field : {"user", "item", "text"}) {
      if (!j.contains(field) || !j[field].is_string())
        fail(path, lineno, std::string("missing or non-string field \"") + field + "\"");
    }
    if (!j.contains("rating")) fail(path, lineno, "missing field \"rating\"");
    if (!j["rating"].is_number()) fail(path, lineno, "non-numeric rating");

    ReviewRecord r;
    r.user_id = j["user"].get<std::string>();
    r.item_id = j["item"].get<std::string>();
    r.rating = j["rating"].get<double>();
    r.text = j["text"].get<std::string>();
    if (j.contains("review_id")) {
      if (!j["review_id"].is_string()) fail(path, lineno, "non-string review_id");
      r.review_id = j["review_id"].get<std::string>();
    }
    if (r.user_id.empty() || r.item_id.empty())
      fail(path, lineno, "empty user or item id");
    if (!std::isfinite(r.rating) || r.rating < 1.0 || r.rating > 5.0)
      fail(path, lineno, "rating " + std::to_string(r.rating) + " outside [1,5]");
    out.push_back(std::move(r));
  }
  return out;
}

void write_reviews(const std::string& path, const std::vector<ReviewRecord>& records) {
  std::ofstream out(path);
  if (!out) throw CorpusError(path + ": cannot open file for writing");
  for (const ReviewRecord& r : records) {
    json j;
    j["user"] = r.user_id;
    j["item"] = r.item_id;
    j["rating"] = r.rating;
    j["text"] = r.text;
    j["review_id"] = r.review_id;
    out << j.dump() << "\n";
  }
  if (!out) throw CorpusError(path + ": write failed");
}

namespace {

void finish_sentence(ParsedSentence& sent, const std::string& path,
                     std::size_t start_line, std::vector<ParsedSentence>& out) {
  if (sent.tokens.empty() && sent.comments.empty()) return;
  if (sent.tokens.empty())
    fail(path, start_line, "comment-only block without tokens");
  const int n = static_cast<int>(sent.tokens.size());
  int roots = 0;
  for (const Token& t : sent.tokens) {
    if (t.head < 0 || t.head > n)
      fail(path, start_line, "head " + std::to_string(t.head) + " out of range for " +
                                 std::to_string(n) + "-token sentence");
    if (t.head == t.id)
      fail(path, start_line, "token " + std::to_string(t.id) + " heads itself");
    if (t.head == 0) ++roots;
  }
  if (roots != 1)
    fail(path, start_line, "sentence has " + std::to_string(roots) + " roots, expected 1");
  out.push_back(std::move(sent));
  sent = ParsedSentence{};
}

}  // namespace

std::vector<ParsedSentence> load_conllu(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<ParsedSentence> out;
  ParsedSentence sent;
  std::string line;
  std::size_t lineno = 0;
  std::size_t block_start = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      finish_sentence(sent, path, block_start, out);
      block_start = lineno + 1;
      continue;
    }
    if (line[0] == '#') {
      sent.comments.push_back(line);
      std::string body = trim(line.substr(1));
      const std::string key = "review_id";
      if (body.rfind(key, 0) == 0) {
        std::string rest = trim(body.substr(key.size()));
        if (!rest.empty() && rest[0] == '=') sent.review_id = trim(rest.substr(1));
      }
      continue;
    }
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() != 10)
      fail(path, lineno, "expected 10 tab-separated columns, got " +
                             std::to_string(cols.size()));
    const std::string& id_field = cols[0];
    // Multiword ranges ("3-4") and empty nodes ("3.1") are not part of the
    // basic dependency tree.
    if (id_field.find('-') != std::string::npos ||
        id_field.find('.') != std::string::npos)
      continue;
    Token t;
    try {
      t.id = std::stoi(id_field);
    } catch (const std::exception&) {
      fail(path, lineno, "non-numeric token id \"" + id_field + "\"");
    }
    const int expected = static_cast<int>(sent.tokens.size()) + 1;
    if (t.id != expected) {
      if (t.id < expected)
        fail(path, lineno, "duplicate token id " + std::to_string(t.id));
      fail(path, lineno, "token id " + std::to_string(t.id) + " skips " +
                             std::to_string(expected));
    }
    t.form = cols[1];
    t.lemma = cols[2];
    t.upos = cols[3];
    try {
      t.head = std::stoi(cols[6]);
    } catch (const std::exception&) {
      fail(path, lineno, "non-numeric head \"" + cols[6] + "\"");
    }
    t.deprel = cols[7];
    if (!valid_deprel(t.deprel))
      fail(path, lineno, "unknown dependency label \"" + t.deprel + "\"");
    sent.tokens.push_back(std::move(t));
  }
  finish_sentence(sent, path, block_start, out);
  return out;
}

namespace {

std::unordered_set<std::string> load_lemma_list(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    out.insert(lower(s));
  }
  return out;
}

}  // namespace

Lexicon load_lexicon(const std::string& positive_path, const std::string& negative_path) {
  Lexicon lex;
  lex.positive = load_lemma_list(positive_path);
  lex.negative = load_lemma_list(negative_path);
  for (const std::string& w : lex.positive)
    if (lex.negative.count(w))
      throw CorpusError("lexicon lists overlap on \"" + w + "\"");
  return lex;
}

SynonymTable SynonymTable::from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::unordered_map<std::string, std::string> raw;
  for (const auto& [from, to] : pairs) {
    auto [it, inserted] = raw.emplace(from, to);
    if (!inserted && it->second != to)
      throw CorpusError("synonym table maps \"" + from + "\" to both \"" +
                        it->second + "\" and \"" + to + "\"");
  }
  SynonymTable table;
  for (const auto& [from, to] : raw) {
    // Follow the chain to its canonical end; a revisited lemma is a cycle.
    std::unordered_set<std::string> visited{from};
    std::string current = to;
    while (true) {
      if (visited.count(current))
        throw CorpusError("synonym cycle involving \"" + from + "\"");
      auto it = raw.find(current);
      if (it == raw.end()) break;
      visited.insert(current);
      current = it->second;
    }
    if (current != from) table.map_[from] = current;
  }
  return table;
}

SynonymTable SynonymTable::load(const std::string& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() != 2)
      fail(path, lineno, "expected \"lemma<TAB>canonical\", got " +
                             std::to_string(cols.size()) + " columns");
    pairs.emplace_back(lower(trim(cols[0])), lower(trim(cols[1])));
  }
  return from_pairs(pairs);
}

std::string SynonymTable::resolve(const std::string& lemma) const {
  auto it = map_.find(lemma);
  return it == map_.end() ? lemma : it->second;
}

void align_reviews(std::vector<ReviewRecord>& reviews,
                   const std::vector<ParsedSentence>& sentences) {
  std::unordered_map<std::string, std::vector<int>> by_id;
  for (std::size_t i = 0; i < sentences.size(); ++i)
    if (!sentences[i].review_id.empty())
      by_id[sentences[i].review_id].push_back(static_cast<int>(i));

  std::unordered_set<std::string> seen;
  for (ReviewRecord& r : reviews) {
    r.sentence_ids.clear();
    if (r.review_id.empty()) continue;
    if (!seen.insert(r.review_id).second)
      throw CorpusError("duplicate review_id \"" + r.review_id +
                        "\" makes parse alignment ambiguous");
    auto it = by_id.find(r.review_id);
    if (it != by_id.end()) r.sentence_ids = it->second;
  }
}

std::vector<ReviewRecord> filter_min_reviews(std::vector<ReviewRecord> records, int k) {
  if (k < 1) throw CorpusError("filter_min_reviews: k must be >= 1");
  while (true) {
    std::unordered_map<std::string, int> user_count, item_count;
    for (const ReviewRecord& r : records) {
      ++user_count[r.user_id];
      ++item_count[r.item_id];
    }
    std::vector<ReviewRecord> kept;
    kept.reserve(records.size());
    for (ReviewRecord& r : records)
      if (user_count[r.user_id] >= k && item_count[r.item_id] >= k)
        kept.push_back(std::move(r));
    if (kept.size() == records.size()) return kept;
    records = std::move(kept);
  }
}

DatasetSplit split_dataset(const std::vector<ReviewRecord>& records,
                           double test_ratio, double val_ratio,
                           std::uint64_t seed) {
  if (!(test_ratio > 0.0 && test_ratio < 1.0))
    throw CorpusError("split_dataset: test_ratio must be in (0,1)");
  if (!(val_ratio >= 0.0 && val_ratio < 1.0 - test_ratio))
    throw CorpusError("split_dataset: val_ratio must be in [0, 1-test_ratio)");
  std::vector<ReviewRecord> shuffled = records;
  Rng rng(seed);
  rng.shuffle(shuffled);
  const std::size_t n = shuffled.size();
  std::size_t n_test = static_cast<std::size_t>(std::llround(n * test_ratio));
  std::size_t n_val = static_cast<std::size_t>(std::llround(n * val_ratio));
  if (n_test + n_val > n) n_val = n - n_test;
  DatasetSplit split;
  split.seed = seed;
  split.test.assign(shuffled.begin(), shuffled.begin() + n_test);
  split.validation.assign(shuffled.begin() + n_test, shuffled.begin() + n_test + n_val);
  split.train.assign(shuffled.begin() + n_test + n_val, shuffled.end());
  return split;
}

}  // namespace aph
