// End-to-end tests of the aph binary: each case spawns the real executable
// (path injected as APH_CLI_PATH) against scratch fixtures and checks exit
// codes and artifacts.

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "aph/hypergraph.hpp"
#include "support/fixtures.hpp"
#include "support/temp_dir.hpp"

using aph::testing::TempDir;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

/// Runs the aph binary with the given argument string.
RunResult run_cli(const std::string& args) {
  static const TempDir scratch;
  static int invocation = 0;
  const std::string out_path = scratch.path("out_" + std::to_string(invocation));
  const std::string err_path = scratch.path("err_" + std::to_string(invocation));
  ++invocation;

  const std::string command =
      std::string(APH_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int status = std::system(command.c_str());

  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

const char* kReviewsJsonl =
    R"({"user": "u1", "item": "headset", "rating": 5.0, "text": "Amazing sound and quality", "review_id": "hr1"})"
    "\n"
    R"({"user": "u2", "item": "headset", "rating": 2.0, "text": "The sound is terrible", "review_id": "hr2"})"
    "\n"
    R"({"user": "u3", "item": "headset", "rating": 4.0, "text": "Comfort is excellent but the sound is bad", "review_id": "hr3"})"
    "\n";

/// Writes the three-review headset corpus and returns the flags shared by
/// extract invocations.
struct Corpus {
  explicit Corpus(const TempDir& dir)
      : reviews(dir.file("reviews.jsonl", kReviewsJsonl)),
        parses(dir.file("parses.conllu", aph::testing::kHeadsetParses)),
        positive(dir.file("pos.txt", "amazing\nexcellent\nsuperior\n")),
        negative(dir.file("neg.txt", "terrible\nbad\n")) {}

  std::string extract_flags() const {
    return "--reviews " + reviews + " --parses " + parses + " --positive-lexicon " +
           positive + " --negative-lexicon " + negative + " --min-count 1";
  }

  std::string reviews, parses, positive, negative;
};

/// Runs extract and build-graph into the scratch dir; returns the graph path.
std::string build_graph_fixture(const TempDir& dir, const Corpus& corpus) {
  RunResult ex = run_cli("extract " + corpus.extract_flags() + " --out-dir " + dir.path("ex"));
  REQUIRE(ex.exit_code == 0);
  RunResult bg = run_cli("build-graph --quadruples " + dir.path("ex") + "/quadruples.tsv" +
                         " --out " + dir.path("graph.json"));
  REQUIRE(bg.exit_code == 0);
  return dir.path("graph.json");
}

const char* kTrainFlags =
    " --test-ratio 0.34 --val-ratio 0 --d1 4 --d2 4 --k 2 --batch-size 8";

}  // namespace

TEST_CASE("help exits zero for the app and every subcommand") {
  CHECK(run_cli("--help").exit_code == 0);
  for (const char* sub : {"extract", "build-graph", "train", "evaluate", "ablate", "stats",
                          "explain", "grad-check"}) {
    RunResult r = run_cli(std::string(sub) + " --help");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("--help") != std::string::npos);
  }
}

TEST_CASE("extract writes the five headset quadruples and a stats file") {
  TempDir dir;
  Corpus corpus(dir);
  RunResult r = run_cli("extract " + corpus.extract_flags() + " --out-dir " + dir.path("ex"));
  REQUIRE(r.exit_code == 0);

  CHECK(slurp(dir.path("ex") + "/quadruples.tsv") ==
        "u1\theadset\tsound\tPos\n"
        "u1\theadset\tquality\tPos\n"
        "u2\theadset\tsound\tNeg\n"
        "u3\theadset\tcomfort\tPos\n"
        "u3\theadset\tsound\tNeg\n");

  const json stats = json::parse(slurp(dir.path("ex") + "/extract_stats.json"));
  CHECK(stats["n_quadruples"] == 5);
  CHECK(stats["n_aspects"] == 3);
  CHECK(stats["n_reviews"] == 3);
  CHECK(stats["polarity_counts"]["Pos"] == 3);
  CHECK(stats["polarity_counts"]["Neg"] == 2);
  CHECK(stats["top_aspects"][0][0] == "sound");
}

TEST_CASE("build-graph serializes a nine-vertex five-edge hypergraph") {
  TempDir dir;
  Corpus corpus(dir);
  const std::string graph_path = build_graph_fixture(dir, corpus);

  const aph::Hypergraph graph = aph::Hypergraph::load_json(graph_path);
  CHECK(graph.n_vertices() == 9);
  CHECK(graph.n_edges() == 5);
  CHECK(graph.users().size() == 3);
  CHECK(graph.items().size() == 1);
  CHECK(graph.aspects().size() == 3);
}

TEST_CASE("train writes checkpoint, history and report, bitwise reproducibly") {
  TempDir dir;
  Corpus corpus(dir);
  const std::string graph_path = build_graph_fixture(dir, corpus);
  const std::string base =
      "train --graph " + graph_path + " --reviews " + corpus.reviews + kTrainFlags +
      " --epochs 4";

  RunResult first = run_cli(base + " --out-dir " + dir.path("run1"));
  REQUIRE(first.exit_code == 0);
  RunResult second = run_cli(base + " --out-dir " + dir.path("run2"));
  REQUIRE(second.exit_code == 0);

  const std::string report = slurp(dir.path("run1") + "/report.json");
  CHECK(!report.empty());
  CHECK(report == slurp(dir.path("run2") + "/report.json"));
  CHECK(slurp(dir.path("run1") + "/model.ckpt") == slurp(dir.path("run2") + "/model.ckpt"));
  CHECK(slurp(dir.path("run1") + "/history.csv") == slurp(dir.path("run2") + "/history.csv"));

  const std::string history = slurp(dir.path("run1") + "/history.csv");
  CHECK(history.substr(0, 29) == "epoch,train_loss,val_loss,lr\n");
  CHECK(json::parse(report)["metrics"].contains("mse"));

  SUBCASE("evaluate reproduces the trained model's test mse") {
    RunResult ev = run_cli("evaluate --graph " + graph_path + " --reviews " + corpus.reviews +
                           " --checkpoint " + dir.path("run1") + "/model.ckpt" +
                           " --test-ratio 0.34 --val-ratio 0");
    REQUIRE(ev.exit_code == 0);
    const json eval_report = json::parse(ev.out);
    const json train_report = json::parse(report);
    CHECK(eval_report["metrics"]["mse"] == train_report["metrics"]["mse"]);
    CHECK(eval_report["history"].empty());
  }

  SUBCASE("explain dumps normalized attention for the item") {
    RunResult r = run_cli("explain --graph " + graph_path + " --checkpoint " +
                          dir.path("run1") + "/model.ckpt --item headset");
    REQUIRE(r.exit_code == 0);
    const json explain = json::parse(r.out);
    CHECK(explain["item"] == "headset");
    CHECK(explain["edges"].size() == 5);
    double total = 0.0;
    for (const json& e : explain["edges"]) total += e["weight"].get<double>();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

    RunResult missing = run_cli("explain --graph " + graph_path + " --checkpoint " +
                                dir.path("run1") + "/model.ckpt --item nonexistent");
    CHECK(missing.exit_code != 0);
    CHECK(missing.err.find("not in the graph") != std::string::npos);
  }
}

TEST_CASE("ablate tabulates all five variants") {
  TempDir dir;
  Corpus corpus(dir);
  const std::string graph_path = build_graph_fixture(dir, corpus);
  RunResult r = run_cli("ablate --graph " + graph_path + " --reviews " + corpus.reviews +
                        kTrainFlags + " --epochs 2 --out " + dir.path("ablation.json"));
  REQUIRE(r.exit_code == 0);

  const json table = json::parse(slurp(dir.path("ablation.json")));
  REQUIRE(table.size() == 5);
  for (const char* key : {"APH", "APH(MAX)", "APH(MEAN)", "APH(-AF)", "APH(-FM)"}) {
    REQUIRE(table.contains(key));
    CHECK(table[key]["mse"].is_number());
    CHECK(table[key]["epochs"] == 2);
  }
}

TEST_CASE("stats reports the aspect frequency histogram") {
  TempDir dir;
  Corpus corpus(dir);
  RunResult ex = run_cli("extract " + corpus.extract_flags() + " --out-dir " + dir.path("ex"));
  REQUIRE(ex.exit_code == 0);

  RunResult r = run_cli("stats --quadruples " + dir.path("ex") + "/quadruples.tsv --top 2");
  REQUIRE(r.exit_code == 0);
  const json stats = json::parse(r.out);
  CHECK(stats["n_aspects"] == 3);
  CHECK(stats["top_aspects"].size() == 2);
  // two aspects occur once, one occurs three times
  CHECK(stats["frequency_histogram"] == json::array({{1, 2}, {3, 1}}));
}

TEST_CASE("grad-check passes its tolerance and exits zero") {
  RunResult r = run_cli("grad-check --d1 4 --d2 4 --seed 1");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("max relative error") != std::string::npos);

  SUBCASE("an unreachable tolerance fails with a diagnostic") {
    RunResult strict = run_cli("grad-check --d1 4 --d2 4 --seed 1 --tol 1e-18");
    CHECK(strict.exit_code == 1);
    CHECK(strict.err.find("gradient check failed") != std::string::npos);
  }
}

TEST_CASE("config file values apply beneath command-line flags") {
  TempDir dir;
  const std::string config =
      dir.file("run.toml", "[grad-check]\nd1=4\nd2=4\nseed=1\nmax-coords=20\n");

  RunResult from_config = run_cli("--config " + config + " grad-check");
  RunResult from_flags = run_cli("grad-check --d1 4 --d2 4 --seed 1 --max-coords 20");
  CHECK(from_config.exit_code == 0);
  CHECK(from_config.out == from_flags.out);

  // a flag wins over the file
  RunResult overridden = run_cli("--config " + config + " grad-check --seed 2");
  RunResult direct = run_cli("grad-check --d1 4 --d2 4 --seed 2 --max-coords 20");
  CHECK(overridden.out == direct.out);
  CHECK(overridden.out != from_config.out);
}

TEST_CASE("bad invocations exit nonzero with a diagnostic") {
  RunResult unknown = run_cli("grad-check --bogus-flag");
  CHECK(unknown.exit_code != 0);
  CHECK(unknown.err.find("--bogus-flag") != std::string::npos);

  RunResult missing = run_cli("stats --quadruples /nonexistent/q.tsv");
  CHECK(missing.exit_code != 0);
  CHECK(missing.err.find("does not exist") != std::string::npos);

  RunResult no_sub = run_cli("");
  CHECK(no_sub.exit_code != 0);

  SUBCASE("a checkpoint from another graph is rejected") {
    TempDir dir;
    Corpus corpus(dir);
    const std::string graph_path = build_graph_fixture(dir, corpus);
    RunResult tr = run_cli("train --graph " + graph_path + " --reviews " + corpus.reviews +
                           kTrainFlags + " --epochs 1 --out-dir " + dir.path("run"));
    REQUIRE(tr.exit_code == 0);

    // a graph built from a subset has smaller embedding tables
    std::ofstream sub(dir.path("sub.tsv"));
    sub << "u1\theadset\tsound\tPos\nu2\theadset\tsound\tNeg\n";
    sub.close();
    RunResult bg = run_cli("build-graph --quadruples " + dir.path("sub.tsv") + " --out " +
                           dir.path("graph2.json"));
    REQUIRE(bg.exit_code == 0);

    RunResult bad = run_cli("explain --graph " + dir.path("graph2.json") + " --checkpoint " +
                            dir.path("run") + "/model.ckpt --item headset");
    CHECK(bad.exit_code != 0);
    CHECK(bad.err.find("incompatible checkpoint shapes") != std::string::npos);
  }
}
