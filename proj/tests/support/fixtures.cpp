#include "support/fixtures.hpp"

#include "support/temp_dir.hpp"

namespace aph::testing {

HeadsetCorpus headset_corpus() {
  TempDir dir;
  HeadsetCorpus corpus;
  corpus.sentences = load_conllu(dir.file("headset.conllu", kHeadsetParses));

  auto review = [](const std::string& user, const std::string& rid, double rating) {
    ReviewRecord r;
    r.user_id = user;
    r.item_id = "headset1";
    r.rating = rating;
    r.text = "(see parse)";
    r.review_id = rid;
    return r;
  };
  corpus.reviews = {review("u1", "hr1", 5), review("u2", "hr2", 1),
                    review("u3", "hr3", 3)};
  align_reviews(corpus.reviews, corpus.sentences);

  corpus.lexicon.positive = {"amazing", "excellent", "superior"};
  corpus.lexicon.negative = {"terrible", "bad"};
  corpus.config.c_t = 1;
  return corpus;
}

}  // namespace aph::testing
