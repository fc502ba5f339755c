#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "aph/corpus.hpp"

namespace aph {

enum class Rule { AMOD, NSUBJ_ACOMP, DOBJ };
enum class Polarity { Pos, Neu, Neg };

std::string to_string(Rule r);
std::string to_string(Polarity p);
Polarity polarity_from_string(const std::string& s);

struct AspectSentimentPair {
  std::string aspect;          // lowercased lemma; "verb_noun" for DOBJ
  std::string sentiment_word;  // lowercased lemma
  Rule rule = Rule::AMOD;
  int sentence_ref = -1;       // index into the parsed-sentence list
  int sentiment_token = 0;     // token id carrying the sentiment word

  bool operator==(const AspectSentimentPair&) const = default;
};

struct Quadruple {
  std::string user_id;
  std::string item_id;
  std::string aspect;
  Polarity polarity = Polarity::Neu;

  bool operator==(const Quadruple&) const = default;
};

struct ExtractionConfig {
  int c_t = 10;  // corpus-wide minimum aspect frequency
  std::set<Rule> rules_enabled{Rule::AMOD, Rule::NSUBJ_ACOMP, Rule::DOBJ};
  SynonymTable synonyms;
  bool negation_flip = true;  // "not good" counts as negative
};

/// Matches the three dependency rules against one sentence, in order:
///   AMOD         adjective modifying a noun        -> (noun, adjective)
///   NSUBJ_ACOMP  noun subject + adjectival         -> (subject, adjective)
///                complement under one (aux-)verb
///   DOBJ         verb with a direct object         -> ("verb_noun", verb)
/// Nouns conjoined to an AMOD head inherit its adjective ("amazing sound
/// and quality" yields both nouns). Each aspect token yields at most one
/// pair per rule, and a token consumed by an earlier rule is skipped by
/// later ones.
std::vector<AspectSentimentPair> extract_pairs(const ParsedSentence& sentence,
                                               const ExtractionConfig& config);

/// Canonicalizes aspects in place; DOBJ bigrams canonicalize the noun part.
std::vector<AspectSentimentPair> merge_synonyms(std::vector<AspectSentimentPair> pairs,
                                                const SynonymTable& table);

/// Keeps pairs whose aspect occurs at least c_t times in `pairs`.
std::vector<AspectSentimentPair> filter_low_frequency(
    std::vector<AspectSentimentPair> pairs, int c_t);

/// Lexicon lookup on the sentiment word; a negation child ("not", "never",
/// "no") of the sentiment token flips Pos and Neg when flipping is enabled.
Polarity assign_polarity(const AspectSentimentPair& pair,
                         const ParsedSentence& sentence, const Lexicon& lexicon,
                         bool negation_flip = true);

/// Full pipeline: extract over every aligned sentence, merge synonyms,
/// apply the frequency filter, assign polarity, then drop duplicate
/// (user, item, aspect, polarity) tuples keeping first appearance.
std::vector<Quadruple> build_quadruples(const std::vector<ReviewRecord>& reviews,
                                        const std::vector<ParsedSentence>& sentences,
                                        const Lexicon& lexicon,
                                        const ExtractionConfig& config);

struct AspectStats {
  std::size_t n_aspects = 0;
  std::size_t n_quadruples = 0;
  // occurrences -> number of aspects seen exactly that often
  std::map<std::size_t, std::size_t> frequency_histogram;
  // descending by count, ties broken lexicographically
  std::vector<std::pair<std::string, std::size_t>> top_aspects;
};

AspectStats aspect_stats(const std::vector<Quadruple>& quadruples,
                         std::size_t top_k = 10);

/// TSV with columns user, item, aspect, polarity.
void write_quadruples(const std::string& path, const std::vector<Quadruple>& quadruples);
std::vector<Quadruple> load_quadruples(const std::string& path);

}  // namespace aph
