#include "aph/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

namespace aph {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string deprel_base(const std::string& deprel) {
  const std::size_t colon = deprel.find(':');
  return colon == std::string::npos ? deprel : deprel.substr(0, colon);
}

bool is_noun(const Token& t) { return t.upos == "NOUN" || t.upos == "PROPN"; }
bool is_adj(const Token& t) { return t.upos == "ADJ"; }
bool is_verb(const Token& t) { return t.upos == "VERB" || t.upos == "AUX"; }

// child lists per head id (index 0 collects roots), in token order
std::vector<std::vector<const Token*>> children_of(const ParsedSentence& s) {
  std::vector<std::vector<const Token*>> out(s.tokens.size() + 1);
  for (const Token& t : s.tokens) out[static_cast<std::size_t>(t.head)].push_back(&t);
  return out;
}

}  // namespace

std::string to_string(Rule r) {
  switch (r) {
    case Rule::AMOD: return "AMOD";
    case Rule::NSUBJ_ACOMP: return "NSUBJ_ACOMP";
    case Rule::DOBJ: return "DOBJ";
  }
  return "?";
}

std::string to_string(Polarity p) {
  switch (p) {
    case Polarity::Pos: return "Pos";
    case Polarity::Neu: return "Neu";
    case Polarity::Neg: return "Neg";
  }
  return "?";
}

Polarity polarity_from_string(const std::string& s) {
  if (s == "Pos") return Polarity::Pos;
  if (s == "Neu") return Polarity::Neu;
  if (s == "Neg") return Polarity::Neg;
  throw CorpusError("unknown polarity \"" + s + "\"");
}

std::vector<AspectSentimentPair> extract_pairs(const ParsedSentence& sentence,
                                               const ExtractionConfig& config) {
  std::vector<AspectSentimentPair> pairs;
  const auto kids = children_of(sentence);
  // Tokens already part of a pair; later rules skip them (first rule wins).
  std::unordered_set<int> consumed;

  auto emit = [&](const Token& aspect_tok, const Token& sentiment_tok, Rule rule,
                  bool bigram) {
    AspectSentimentPair p;
    p.aspect = bigram ? lower(sentiment_tok.lemma) + "_" + lower(aspect_tok.lemma)
                      : lower(aspect_tok.lemma);
    p.sentiment_word = lower(sentiment_tok.lemma);
    p.rule = rule;
    p.sentiment_token = sentiment_tok.id;
    pairs.push_back(std::move(p));
    consumed.insert(aspect_tok.id);
    consumed.insert(sentiment_tok.id);
  };

  if (config.rules_enabled.count(Rule::AMOD)) {
    std::unordered_set<int> used_aspects;
    for (const Token& adj : sentence.tokens) {
      if (deprel_base(adj.deprel) != "amod" || !is_adj(adj)) continue;
      if (adj.head == 0) continue;
      const Token& noun = sentence.tokens[static_cast<std::size_t>(adj.head - 1)];
      if (!is_noun(noun)) continue;
      if (consumed.count(adj.id) || consumed.count(noun.id)) continue;
      if (!used_aspects.insert(noun.id).second) continue;
      emit(noun, adj, Rule::AMOD, false);
      // Conjoined nouns share the modifier: "amazing sound and quality".
      // A conjunct with its own adjective keeps it instead.
      for (const Token* conj : kids[static_cast<std::size_t>(noun.id)]) {
        if (deprel_base(conj->deprel) != "conj" || !is_noun(*conj)) continue;
        bool has_own_adj = false;
        for (const Token* child : kids[static_cast<std::size_t>(conj->id)])
          if (deprel_base(child->deprel) == "amod" && is_adj(*child)) has_own_adj = true;
        if (has_own_adj) continue;
        if (!used_aspects.insert(conj->id).second) continue;
        emit(*conj, adj, Rule::AMOD, false);
      }
    }
  }

  if (config.rules_enabled.count(Rule::NSUBJ_ACOMP)) {
    std::unordered_set<int> used_aspects;
    for (const Token& verb : sentence.tokens) {
      if (!is_verb(verb) || consumed.count(verb.id)) continue;
      const Token* subj = nullptr;
      const Token* comp = nullptr;
      for (const Token* child : kids[static_cast<std::size_t>(verb.id)]) {
        if (consumed.count(child->id)) continue;
        if (!subj && deprel_base(child->deprel) == "nsubj" && is_noun(*child))
          subj = child;
        if (!comp && deprel_base(child->deprel) == "acomp" && is_adj(*child))
          comp = child;
      }
      if (!subj || !comp) continue;
      if (!used_aspects.insert(subj->id).second) continue;
      emit(*subj, *comp, Rule::NSUBJ_ACOMP, false);
    }
  }

  if (config.rules_enabled.count(Rule::DOBJ)) {
    std::unordered_set<int> used_aspects;
    for (const Token& verb : sentence.tokens) {
      if (verb.upos != "VERB" || consumed.count(verb.id)) continue;
      for (const Token* obj : kids[static_cast<std::size_t>(verb.id)]) {
        const std::string base = deprel_base(obj->deprel);
        if ((base != "dobj" && base != "obj") || !is_noun(*obj)) continue;
        if (consumed.count(obj->id)) continue;
        if (!used_aspects.insert(obj->id).second) continue;
        emit(*obj, verb, Rule::DOBJ, true);
        break;  // one object pair per verb
      }
    }
  }

  return pairs;
}

std::vector<AspectSentimentPair> merge_synonyms(std::vector<AspectSentimentPair> pairs,
                                                const SynonymTable& table) {
  for (AspectSentimentPair& p : pairs) {
    if (p.rule == Rule::DOBJ) {
      const std::size_t us = p.aspect.find('_');
      p.aspect = p.aspect.substr(0, us + 1) + table.resolve(p.aspect.substr(us + 1));
    } else {
      p.aspect = table.resolve(p.aspect);
    }
  }
  return pairs;
}

std::vector<AspectSentimentPair> filter_low_frequency(
    std::vector<AspectSentimentPair> pairs, int c_t) {
  if (c_t < 1) throw CorpusError("filter_low_frequency: c_t must be >= 1");
  std::unordered_map<std::string, int> counts;
  for (const AspectSentimentPair& p : pairs) ++counts[p.aspect];
  std::vector<AspectSentimentPair> kept;
  kept.reserve(pairs.size());
  for (AspectSentimentPair& p : pairs)
    if (counts[p.aspect] >= c_t) kept.push_back(std::move(p));
  return kept;
}

Polarity assign_polarity(const AspectSentimentPair& pair,
                         const ParsedSentence& sentence, const Lexicon& lexicon,
                         bool negation_flip) {
  Polarity p = Polarity::Neu;
  if (lexicon.positive.count(pair.sentiment_word)) p = Polarity::Pos;
  else if (lexicon.negative.count(pair.sentiment_word)) p = Polarity::Neg;
  if (p == Polarity::Neu || !negation_flip) return p;
  for (const Token& t : sentence.tokens) {
    if (t.head != pair.sentiment_token) continue;
    const std::string lemma = lower(t.lemma);
    if (lemma == "not" || lemma == "never" || lemma == "no")
      return p == Polarity::Pos ? Polarity::Neg : Polarity::Pos;
  }
  return p;
}

std::vector<Quadruple> build_quadruples(const std::vector<ReviewRecord>& reviews,
                                        const std::vector<ParsedSentence>& sentences,
                                        const Lexicon& lexicon,
                                        const ExtractionConfig& config) {
  struct Attributed {
    AspectSentimentPair pair;
    const ReviewRecord* review;
  };
  std::vector<Attributed> all;
  for (const ReviewRecord& review : reviews) {
    for (int sid : review.sentence_ids) {
      if (sid < 0 || static_cast<std::size_t>(sid) >= sentences.size())
        throw CorpusError("review \"" + review.review_id +
                          "\" references missing sentence " + std::to_string(sid));
      for (AspectSentimentPair& p : extract_pairs(sentences[static_cast<std::size_t>(sid)], config)) {
        p.sentence_ref = sid;
        all.push_back({std::move(p), &review});
      }
    }
  }

  std::vector<AspectSentimentPair> pairs;
  pairs.reserve(all.size());
  for (Attributed& a : all) pairs.push_back(std::move(a.pair));
  pairs = merge_synonyms(std::move(pairs), config.synonyms);

  std::unordered_map<std::string, int> counts;
  for (const AspectSentimentPair& p : pairs) ++counts[p.aspect];

  std::vector<Quadruple> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const AspectSentimentPair& p = pairs[i];
    if (counts[p.aspect] < config.c_t) continue;
    Quadruple q;
    q.user_id = all[i].review->user_id;
    q.item_id = all[i].review->item_id;
    q.aspect = p.aspect;
    q.polarity = assign_polarity(p, sentences[static_cast<std::size_t>(p.sentence_ref)],
                                 lexicon, config.negation_flip);
    const std::string key =
        q.user_id + '\t' + q.item_id + '\t' + q.aspect + '\t' + to_string(q.polarity);
    if (seen.insert(key).second) out.push_back(std::move(q));
  }
  return out;
}

AspectStats aspect_stats(const std::vector<Quadruple>& quadruples, std::size_t top_k) {
  AspectStats stats;
  stats.n_quadruples = quadruples.size();
  std::unordered_map<std::string, std::size_t> counts;
  for (const Quadruple& q : quadruples) ++counts[q.aspect];
  stats.n_aspects = counts.size();
  for (const auto& [aspect, count] : counts) ++stats.frequency_histogram[count];
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (sorted.size() > top_k) sorted.resize(top_k);
  stats.top_aspects = std::move(sorted);
  return stats;
}

void write_quadruples(const std::string& path, const std::vector<Quadruple>& quadruples) {
  std::ofstream out(path);
  if (!out) throw CorpusError(path + ": cannot open file for writing");
  for (const Quadruple& q : quadruples) {
    for (const std::string* field : {&q.user_id, &q.item_id, &q.aspect})
      if (field->find('\t') != std::string::npos || field->find('\n') != std::string::npos)
        throw CorpusError("field \"" + *field + "\" contains a tab or newline");
    out << q.user_id << '\t' << q.item_id << '\t' << q.aspect << '\t'
        << to_string(q.polarity) << '\n';
  }
  if (!out) throw CorpusError(path + ": write failed");
}

std::vector<Quadruple> load_quadruples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError(path + ": cannot open file");
  std::vector<Quadruple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) {
        cols.push_back(line.substr(start));
        break;
      }
      cols.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    if (cols.size() != 4)
      throw CorpusError(path + ":" + std::to_string(lineno) + ": expected 4 columns, got " +
                        std::to_string(cols.size()));
    Quadruple q;
    q.user_id = cols[0];
    q.item_id = cols[1];
    q.aspect = cols[2];
    q.polarity = polarity_from_string(cols[3]);
    if (q.user_id.empty() || q.item_id.empty() || q.aspect.empty())
      throw CorpusError(path + ":" + std::to_string(lineno) + ": empty field");
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace aph
