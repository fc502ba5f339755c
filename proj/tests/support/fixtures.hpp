#pragma once

#include <string>
#include <vector>

#include "aph/corpus.hpp"
#include "aph/extraction.hpp"

namespace aph::testing {

// Hand-parsed sentences for the three extraction-rule constructions and the
// three-review headset corpus (3 users x 1 item, aspects sound/quality/
// comfort, 5 expected quadruples).

inline const char* kAmodSentence =
    "# review_id = rv1\n"
    "1\tAmazing\tamazing\tADJ\t_\t_\t2\tamod\t_\t_\n"
    "2\tsound\tsound\tNOUN\t_\t_\t0\troot\t_\t_\n"
    "3\tand\tand\tCCONJ\t_\t_\t4\tcc\t_\t_\n"
    "4\tquality\tquality\tNOUN\t_\t_\t2\tconj\t_\t_\n"
    "5\t,\t,\tPUNCT\t_\t_\t2\tpunct\t_\t_\n"
    "6\tall\tall\tPRON\t_\t_\t2\tappos\t_\t_\n"
    "7\tin\tin\tADP\t_\t_\t6\tprep\t_\t_\n"
    "8\tone\tone\tNUM\t_\t_\t9\tnummod\t_\t_\n"
    "9\theadset\theadset\tNOUN\t_\t_\t7\tpobj\t_\t_\n";

inline const char* kAcompSentence =
    "# review_id = rv2\n"
    "1\tQuality\tquality\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
    "2\tis\tbe\tAUX\t_\t_\t0\troot\t_\t_\n"
    "3\tsuperior\tsuperior\tADJ\t_\t_\t2\tacomp\t_\t_\n"
    "4\tand\tand\tCCONJ\t_\t_\t6\tcc\t_\t_\n"
    "5\tcomfort\tcomfort\tNOUN\t_\t_\t6\tnsubj\t_\t_\n"
    "6\tis\tbe\tAUX\t_\t_\t2\tconj\t_\t_\n"
    "7\texcellent\texcellent\tADJ\t_\t_\t6\tacomp\t_\t_\n";

inline const char* kDobjSentence =
    "# review_id = rv3\n"
    "1\tthis\tthis\tPRON\t_\t_\t3\tnsubj\t_\t_\n"
    "2\twill\twill\tAUX\t_\t_\t3\taux\t_\t_\n"
    "3\teliminate\teliminate\tVERB\t_\t_\t0\troot\t_\t_\n"
    "4\tthe\tthe\tDET\t_\t_\t5\tdet\t_\t_\n"
    "5\tpops\tpops\tNOUN\t_\t_\t3\tdobj\t_\t_\n";

// Review 2: "The sound is terrible"; review 3: "Comfort is excellent but
// the sound is bad".
inline const char* kHeadsetParses =
    "# review_id = hr1\n"
    "1\tAmazing\tamazing\tADJ\t_\t_\t2\tamod\t_\t_\n"
    "2\tsound\tsound\tNOUN\t_\t_\t0\troot\t_\t_\n"
    "3\tand\tand\tCCONJ\t_\t_\t4\tcc\t_\t_\n"
    "4\tquality\tquality\tNOUN\t_\t_\t2\tconj\t_\t_\n"
    "5\t,\t,\tPUNCT\t_\t_\t2\tpunct\t_\t_\n"
    "6\tall\tall\tPRON\t_\t_\t2\tappos\t_\t_\n"
    "7\tin\tin\tADP\t_\t_\t6\tprep\t_\t_\n"
    "8\tone\tone\tNUM\t_\t_\t9\tnummod\t_\t_\n"
    "9\theadset\theadset\tNOUN\t_\t_\t7\tpobj\t_\t_\n"
    "\n"
    "# review_id = hr2\n"
    "1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_\n"
    "2\tsound\tsound\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
    "3\tis\tbe\tAUX\t_\t_\t0\troot\t_\t_\n"
    "4\tterrible\tterrible\tADJ\t_\t_\t3\tacomp\t_\t_\n"
    "\n"
    "# review_id = hr3\n"
    "1\tComfort\tcomfort\tNOUN\t_\t_\t2\tnsubj\t_\t_\n"
    "2\tis\tbe\tAUX\t_\t_\t0\troot\t_\t_\n"
    "3\texcellent\texcellent\tADJ\t_\t_\t2\tacomp\t_\t_\n"
    "4\tbut\tbut\tCCONJ\t_\t_\t7\tcc\t_\t_\n"
    "5\tthe\tthe\tDET\t_\t_\t6\tdet\t_\t_\n"
    "6\tsound\tsound\tNOUN\t_\t_\t7\tnsubj\t_\t_\n"
    "7\tis\tbe\tAUX\t_\t_\t2\tconj\t_\t_\n"
    "8\tbad\tbad\tADJ\t_\t_\t7\tacomp\t_\t_\n";

struct HeadsetCorpus {
  std::vector<ReviewRecord> reviews;
  std::vector<ParsedSentence> sentences;
  Lexicon lexicon;
  ExtractionConfig config;  // c_t = 1, all rules, no synonyms
};

/// Parses kHeadsetParses from a scratch file and aligns the three reviews.
HeadsetCorpus headset_corpus();

}  // namespace aph::testing
