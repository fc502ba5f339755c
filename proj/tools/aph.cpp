// Command-line front end for the aspect-performance hypergraph recommender.
// Subcommands cover the full pipeline: extract quadruples from parsed
// reviews, build the hypergraph, train and evaluate models, compare
// variants, dump corpus statistics and attention weights, and
// finite-difference check the gradients.
//
// Flag precedence is command line > --config file (TOML-style key=value,
// one [section] per subcommand) > built-in defaults. Every randomized
// command is seeded (default 42) and writes bitwise-identical outputs on
// identical inputs.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aph/corpus.hpp"
#include "aph/extraction.hpp"
#include "aph/hypergraph.hpp"
#include "aph/model.hpp"
#include "aph/rng.hpp"
#include "aph/train_eval.hpp"

namespace {

using nlohmann::json;

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw aph::CorpusError("cannot open output file: " + path);
  out << body;
  if (!out) throw aph::CorpusError("write failed: " + path);
}

/// Writes to the path, or to stdout when the path is empty.
void emit(const std::string& path, const std::string& body) {
  if (path.empty())
    std::cout << body;
  else
    write_text(path, body);
}

void add_hyper_options(CLI::App* cmd, aph::HyperParams& hp) {
  cmd->add_option("--d1", hp.d1, "Embedding width")->capture_default_str();
  cmd->add_option("--d2", hp.d2, "Hidden width")->capture_default_str();
  cmd->add_option("--k", hp.k, "Pairwise-interaction factor count")->capture_default_str();
  cmd->add_option("--t", hp.t, "Pooled-aspect row cap; 0 keeps all aspects")
      ->capture_default_str();
  cmd->add_option("--leaky-slope", hp.leaky_slope, "LeakyReLU negative slope")
      ->capture_default_str();
  cmd->add_flag("--w7-from-id", hp.w7_from_id,
                "Feed the raw embedding, not the aggregate, to the m branch");
}

void add_train_options(CLI::App* cmd, aph::TrainConfig& tc, std::string& optimizer,
                       std::string& task) {
  cmd->add_option("--gamma", tc.gamma, "Learning rate")->capture_default_str();
  cmd->add_option("--lambda", tc.lambda, "L2 regularization weight")->capture_default_str();
  cmd->add_option("--epochs", tc.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch-size", tc.batch_size, "Minibatch size")->capture_default_str();
  cmd->add_option("--patience", tc.patience,
                  "Early-stop after this many epochs without val improvement; 0 disables")
      ->capture_default_str();
  cmd->add_option("--seed", tc.seed, "Random seed")->capture_default_str();
  cmd->add_option("--optimizer", optimizer, "Optimizer: adam or sgd")->capture_default_str();
  cmd->add_option("--task", task, "Objective: rating or ctr")->capture_default_str();
  cmd->add_option("--neg-ratio", tc.neg_ratio,
                  "Negatives per positive for ctr training and top-k evaluation")
      ->capture_default_str();
  cmd->add_option("--workers", tc.workers, "Gradient worker threads")->capture_default_str();
  cmd->add_flag("!--no-warm-start", tc.warm_start_bias,
                "Do not start the global bias at the train-set mean rating");
}

struct SplitOptions {
  double test_ratio = 0.2;
  double val_ratio = 0.1;
};

void add_split_options(CLI::App* cmd, SplitOptions& s) {
  cmd->add_option("--test-ratio", s.test_ratio, "Fraction of reviews held out for testing")
      ->capture_default_str();
  cmd->add_option("--val-ratio", s.val_ratio, "Fraction of reviews held out for validation")
      ->capture_default_str();
}

aph::ExtractionConfig make_extraction_config(int min_count,
                                             const std::vector<std::string>& rules,
                                             const std::string& synonyms_path,
                                             bool negation_flip) {
  aph::ExtractionConfig config;
  config.c_t = min_count;
  config.negation_flip = negation_flip;
  if (!rules.empty()) {
    config.rules_enabled.clear();
    for (const std::string& r : rules) {
      if (r == "amod")
        config.rules_enabled.insert(aph::Rule::AMOD);
      else if (r == "nsubj_acomp")
        config.rules_enabled.insert(aph::Rule::NSUBJ_ACOMP);
      else if (r == "dobj")
        config.rules_enabled.insert(aph::Rule::DOBJ);
      else
        throw aph::CorpusError("unknown extraction rule: " + r +
                               " (expected amod, nsubj_acomp or dobj)");
    }
  }
  if (!synonyms_path.empty()) config.synonyms = aph::SynonymTable::load(synonyms_path);
  return config;
}

json stats_json(const std::vector<aph::Quadruple>& quadruples, std::size_t top_k) {
  const aph::AspectStats stats = aph::aspect_stats(quadruples, top_k);
  json histogram = json::array();
  for (const auto& [occurrences, aspects] : stats.frequency_histogram)
    histogram.push_back({occurrences, aspects});
  json top = json::array();
  for (const auto& [aspect, count] : stats.top_aspects) top.push_back({aspect, count});
  return json{{"n_aspects", stats.n_aspects},
              {"n_quadruples", stats.n_quadruples},
              {"frequency_histogram", histogram},
              {"top_aspects", top}};
}

/// Maps review ids through the graph's per-type indices; ids the graph has
/// never seen become -1 (cold) and predict from biases alone.
std::vector<aph::RatedPair> to_rated_pairs(const std::vector<aph::ReviewRecord>& records,
                                           const aph::Hypergraph& graph) {
  std::vector<aph::RatedPair> pairs;
  pairs.reserve(records.size());
  for (const aph::ReviewRecord& r : records)
    pairs.push_back({graph.user_index(r.user_id), graph.item_index(r.item_id), r.rating});
  return pairs;
}

struct SplitPairs {
  std::vector<aph::RatedPair> train, val, test;
};

/// Ratings become labeled pairs; for the ctr task each subset keeps only
/// in-graph items, relabels them 1 and appends sampled non-interacted
/// items as 0s (one rng drawn train, then val, then test).
SplitPairs load_split_pairs(const aph::Hypergraph& graph, const std::string& reviews_path,
                            const SplitOptions& split, const aph::TrainConfig& tc) {
  const std::vector<aph::ReviewRecord> records = aph::load_reviews(reviews_path);
  const aph::DatasetSplit ds =
      aph::split_dataset(records, split.test_ratio, split.val_ratio, tc.seed);
  SplitPairs out{to_rated_pairs(ds.train, graph), to_rated_pairs(ds.validation, graph),
                 to_rated_pairs(ds.test, graph)};
  if (tc.task == aph::Task::Ctr) {
    const int n_items = static_cast<int>(graph.items().size());
    aph::Rng rng(tc.seed ^ 0x8CB92BA72F3D8DD7ull);
    for (std::vector<aph::RatedPair>* subset : {&out.train, &out.val, &out.test}) {
      std::vector<aph::RatedPair> positives;
      for (const aph::RatedPair& p : *subset)
        if (p.item >= 0) positives.push_back({p.user, p.item, 1.0});
      *subset = positives.empty()
                    ? positives
                    : aph::negative_sample(positives, n_items, tc.neg_ratio, rng);
    }
  }
  return out;
}

constexpr const char* kVariantLabels[] = {"APH", "APH(MAX)", "APH(MEAN)", "APH(-AF)",
                                          "APH(-FM)"};
constexpr aph::Variant kVariants[] = {aph::Variant::Full, aph::Variant::Max,
                                      aph::Variant::Mean, aph::Variant::NoFusion,
                                      aph::Variant::NoFm};

int run_extract(const std::string& reviews_path, const std::string& parses_path,
                const std::string& positive_path, const std::string& negative_path,
                const aph::ExtractionConfig& config, const std::string& out_dir) {
  std::vector<aph::ReviewRecord> reviews = aph::load_reviews(reviews_path);
  const std::vector<aph::ParsedSentence> sentences = aph::load_conllu(parses_path);
  const aph::Lexicon lexicon = aph::load_lexicon(positive_path, negative_path);
  aph::align_reviews(reviews, sentences);
  const std::vector<aph::Quadruple> quadruples =
      aph::build_quadruples(reviews, sentences, lexicon, config);

  std::filesystem::create_directories(out_dir);
  aph::write_quadruples(out_dir + "/quadruples.tsv", quadruples);

  json stats = stats_json(quadruples, 10);
  stats["n_reviews"] = reviews.size();
  stats["n_sentences"] = sentences.size();
  std::size_t polarity_counts[3] = {0, 0, 0};
  for (const aph::Quadruple& q : quadruples)
    ++polarity_counts[static_cast<int>(q.polarity)];
  stats["polarity_counts"] = {{"Pos", polarity_counts[0]},
                              {"Neu", polarity_counts[1]},
                              {"Neg", polarity_counts[2]}};
  write_text(out_dir + "/extract_stats.json", stats.dump(2) + "\n");

  std::cout << "extracted " << quadruples.size() << " quadruples ("
            << stats["n_aspects"].get<std::size_t>() << " aspects) into " << out_dir << "\n";
  return 0;
}

int run_build_graph(const std::string& quadruples_path, const std::string& out_path) {
  const std::vector<aph::Quadruple> quadruples = aph::load_quadruples(quadruples_path);
  const aph::Hypergraph graph = aph::build_hypergraph(quadruples);
  graph.save_json(out_path);
  std::cout << "graph: " << graph.n_vertices() << " vertices, " << graph.n_edges()
            << " hyperedges (" << graph.users().size() << " users, "
            << graph.items().size() << " items, " << graph.aspects().size()
            << " aspects)\n";
  return 0;
}

int run_train(const std::string& graph_path, const std::string& reviews_path,
              const SplitOptions& split, const aph::HyperParams& hp, aph::Variant variant,
              const aph::TrainConfig& tc, const std::string& out_dir) {
  const aph::Hypergraph graph = aph::Hypergraph::load_json(graph_path);
  const aph::IncidenceIndex index(graph);
  const SplitPairs pairs = load_split_pairs(graph, reviews_path, split, tc);
  if (pairs.train.empty()) throw aph::TrainError("the training split is empty");

  aph::AphModel model(graph, index, hp, variant, tc.seed);
  const aph::TrainResult result = aph::train(model, pairs.train, pairs.val, tc);
  if (result.diverged)
    std::cerr << "warning: training diverged; parameters restored to the last finite epoch\n";

  std::filesystem::create_directories(out_dir);
  model.save_checkpoint(out_dir + "/model.ckpt");
  aph::write_history_csv(out_dir + "/history.csv", result.history);
  if (!pairs.test.empty()) {
    const aph::MetricsReport report = aph::evaluate_report(model, tc, result, pairs.test);
    write_text(out_dir + "/report.json", report.to_json() + "\n");
    std::cout << "test mse " << report.mse << ", ndcg@" << report.ndcg_k << " "
              << report.ndcg << "\n";
  }
  std::cout << "trained " << result.history.size() << " epochs";
  if (result.best_epoch > 0)
    std::cout << ", best epoch " << result.best_epoch << " (val loss "
              << result.best_val_loss << ")";
  std::cout << "; artifacts in " << out_dir << "\n";
  return 0;
}

int run_evaluate(const std::string& graph_path, const std::string& checkpoint_path,
                 const std::string& reviews_path, const SplitOptions& split,
                 const std::string& subset, const aph::TrainConfig& tc,
                 const std::string& out_path) {
  const aph::Hypergraph graph = aph::Hypergraph::load_json(graph_path);
  const aph::IncidenceIndex index(graph);
  const aph::AphModel model = aph::AphModel::load_checkpoint(checkpoint_path, graph, index);
  const SplitPairs pairs = load_split_pairs(graph, reviews_path, split, tc);
  const std::vector<aph::RatedPair>& eval_set = subset == "train" ? pairs.train
                                                : subset == "val" ? pairs.val
                                                                  : pairs.test;
  if (eval_set.empty())
    throw aph::TrainError("the " + subset + " split is empty; adjust the split ratios");
  const aph::MetricsReport report = aph::evaluate_report(model, tc, aph::TrainResult{}, eval_set);
  emit(out_path, report.to_json() + "\n");
  return 0;
}

int run_ablate(const std::string& graph_path, const std::string& reviews_path,
               const SplitOptions& split, const aph::HyperParams& hp,
               const aph::TrainConfig& tc, const std::string& out_path) {
  const aph::Hypergraph graph = aph::Hypergraph::load_json(graph_path);
  const aph::IncidenceIndex index(graph);
  const SplitPairs pairs = load_split_pairs(graph, reviews_path, split, tc);
  if (pairs.train.empty()) throw aph::TrainError("the training split is empty");
  if (pairs.test.empty()) throw aph::TrainError("the test split is empty");

  json table;
  for (std::size_t v = 0; v < std::size(kVariants); ++v) {
    aph::AphModel model(graph, index, hp, kVariants[v], tc.seed);
    const aph::TrainResult result = aph::train(model, pairs.train, pairs.val, tc);
    const aph::MetricsReport report = aph::evaluate_report(model, tc, result, pairs.test);
    table[kVariantLabels[v]] = {{"mse", report.mse},
                                {"ndcg", report.ndcg},
                                {"precision", report.precision},
                                {"recall", report.recall},
                                {"epochs", result.history.size()},
                                {"diverged", result.diverged}};
    std::cerr << kVariantLabels[v] << ": test mse " << report.mse << "\n";
  }
  emit(out_path, table.dump(2) + "\n");
  return 0;
}

int run_stats(const std::string& quadruples_path, std::size_t top_k,
              const std::string& out_path) {
  const std::vector<aph::Quadruple> quadruples = aph::load_quadruples(quadruples_path);
  emit(out_path, stats_json(quadruples, top_k).dump(2) + "\n");
  return 0;
}

int run_explain(const std::string& graph_path, const std::string& checkpoint_path,
                const std::string& item, const std::string& out_path) {
  const aph::Hypergraph graph = aph::Hypergraph::load_json(graph_path);
  const aph::IncidenceIndex index(graph);
  const aph::AphModel model = aph::AphModel::load_checkpoint(checkpoint_path, graph, index);
  const int item_index = graph.item_index(item);
  if (item_index < 0) throw aph::GraphError("item \"" + item + "\" is not in the graph");

  const aph::ItemExplain explain = model.explain_item(item_index);
  json edges = json::array();
  for (const aph::EdgeExplain& e : explain.edges)
    edges.push_back({{"edge", e.edge_id},
                     {"user", e.user},
                     {"aspect", e.aspect},
                     {"polarity", aph::to_string(e.polarity)},
                     {"score", e.score},
                     {"weight", e.weight}});
  json aspects = json::array();
  for (const aph::AspectExplain& a : explain.aspects)
    aspects.push_back({{"aspect", a.aspect},
                       {"attention", a.weight_sum},
                       {"performance", a.performance}});
  emit(out_path,
       json{{"item", explain.item}, {"edges", edges}, {"aspects", aspects}}.dump(2) + "\n");
  return 0;
}

int run_grad_check(const aph::HyperParams& hp, aph::Variant variant, int edges,
                   std::uint64_t seed, double eps, double tol, std::size_t max_coords) {
  const aph::GradCheckResult r = aph::model_grad_check(
      hp, variant, edges, seed, eps, max_coords == 0 ? SIZE_MAX : max_coords);
  std::cout << "max relative error " << r.max_rel_err << " over " << r.evaluated
            << " coordinates (" << r.skipped << " skipped at kinks)\n";
  if (r.max_rel_err < tol) return 0;
  std::cerr << "gradient check failed: " << r.max_rel_err << " >= " << tol << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aspect-performance hypergraph recommender pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "aph 0.1.0");
  app.set_config("--config", "", "TOML-style config file; one [section] per subcommand");

  int rc = 0;

  // extract
  auto* extract = app.add_subcommand(
      "extract", "Extract (user, item, aspect, polarity) quadruples from parsed reviews");
  std::string ex_reviews, ex_parses, ex_pos, ex_neg, ex_synonyms, ex_out = "extract_out";
  int ex_min_count = 10;
  std::vector<std::string> ex_rules;
  bool ex_no_negation = false;
  extract->add_option("--reviews", ex_reviews, "Reviews JSONL file")
      ->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--parses", ex_parses, "CoNLL-U dependency parses")
      ->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--positive-lexicon", ex_pos, "Positive opinion lemma list")
      ->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--negative-lexicon", ex_neg, "Negative opinion lemma list")
      ->required()
      ->check(CLI::ExistingFile);
  extract->add_option("--synonyms", ex_synonyms, "Aspect synonym TSV (lemma<TAB>canonical)")
      ->check(CLI::ExistingFile);
  extract->add_option("--min-count", ex_min_count,
                      "Drop aspects occurring fewer than this many times")
      ->capture_default_str();
  extract
      ->add_option("--rules", ex_rules,
                   "Dependency rules to apply (amod, nsubj_acomp, dobj); default all")
      ->delimiter(',');
  extract->add_flag("--no-negation-flip", ex_no_negation,
                    "Keep lexicon polarity under negation words");
  extract->add_option("--out-dir", ex_out, "Output directory")->capture_default_str();
  extract->callback([&] {
    rc = run_extract(ex_reviews, ex_parses, ex_pos, ex_neg,
                     make_extraction_config(ex_min_count, ex_rules, ex_synonyms,
                                            !ex_no_negation),
                     ex_out);
  });

  // build-graph
  auto* build = app.add_subcommand("build-graph",
                                   "Build the typed arity-4 hypergraph from quadruples");
  std::string bg_quadruples, bg_out = "graph.json";
  build->add_option("--quadruples", bg_quadruples, "Quadruple TSV from extract")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--out", bg_out, "Graph JSON output path")->capture_default_str();
  build->callback([&] { rc = run_build_graph(bg_quadruples, bg_out); });

  // shared model/training state for train, evaluate, ablate
  struct ModelArgs {
    std::string graph, reviews, checkpoint, out;
    SplitOptions split;
    aph::HyperParams hp;
    aph::TrainConfig tc;
    std::string optimizer = "adam", task = "rating", variant = "full";
  };

  auto add_data_options = [](CLI::App* cmd, ModelArgs& a, bool needs_checkpoint) {
    cmd->add_option("--graph", a.graph, "Hypergraph JSON from build-graph")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--reviews", a.reviews, "Reviews JSONL file (ratings source)")
        ->required()
        ->check(CLI::ExistingFile);
    if (needs_checkpoint)
      cmd->add_option("--checkpoint", a.checkpoint, "Model checkpoint")
          ->required()
          ->check(CLI::ExistingFile);
    add_split_options(cmd, a.split);
  };

  // train
  auto* train_cmd =
      app.add_subcommand("train", "Train a model and write checkpoint, history and report");
  ModelArgs tr;
  std::string tr_out_dir = "train_out";
  add_data_options(train_cmd, tr, false);
  add_hyper_options(train_cmd, tr.hp);
  add_train_options(train_cmd, tr.tc, tr.optimizer, tr.task);
  train_cmd->add_option("--variant", tr.variant,
                        "Model variant: full, max, mean, no-fusion or no-fm")
      ->capture_default_str();
  train_cmd->add_option("--out-dir", tr_out_dir, "Output directory")->capture_default_str();
  train_cmd->callback([&] {
    tr.tc.optimizer = aph::optimizer_from_string(tr.optimizer);
    tr.tc.task = aph::task_from_string(tr.task);
    rc = run_train(tr.graph, tr.reviews, tr.split, tr.hp,
                   aph::variant_from_string(tr.variant), tr.tc, tr_out_dir);
  });

  // evaluate
  auto* eval_cmd =
      app.add_subcommand("evaluate", "Evaluate a checkpoint and print a metrics report");
  ModelArgs ev;
  std::string ev_subset = "test";
  add_data_options(eval_cmd, ev, true);
  add_train_options(eval_cmd, ev.tc, ev.optimizer, ev.task);
  eval_cmd->add_option("--split", ev_subset, "Which split to evaluate: train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report path; stdout when omitted");
  eval_cmd->callback([&] {
    ev.tc.optimizer = aph::optimizer_from_string(ev.optimizer);
    ev.tc.task = aph::task_from_string(ev.task);
    rc = run_evaluate(ev.graph, ev.checkpoint, ev.reviews, ev.split, ev_subset, ev.tc,
                      ev.out);
  });

  // ablate
  auto* ablate_cmd = app.add_subcommand(
      "ablate", "Train every variant under one config and tabulate test metrics");
  ModelArgs ab;
  add_data_options(ablate_cmd, ab, false);
  add_hyper_options(ablate_cmd, ab.hp);
  add_train_options(ablate_cmd, ab.tc, ab.optimizer, ab.task);
  ablate_cmd->add_option("--out", ab.out, "Table path; stdout when omitted");
  ablate_cmd->callback([&] {
    ab.tc.optimizer = aph::optimizer_from_string(ab.optimizer);
    ab.tc.task = aph::task_from_string(ab.task);
    rc = run_ablate(ab.graph, ab.reviews, ab.split, ab.hp, ab.tc, ab.out);
  });

  // stats
  auto* stats_cmd =
      app.add_subcommand("stats", "Aspect frequency histogram for a quadruple file");
  std::string st_quadruples, st_out;
  std::size_t st_top = 10;
  stats_cmd->add_option("--quadruples", st_quadruples, "Quadruple TSV from extract")
      ->required()
      ->check(CLI::ExistingFile);
  stats_cmd->add_option("--top", st_top, "How many top aspects to list")
      ->capture_default_str();
  stats_cmd->add_option("--out", st_out, "Output path; stdout when omitted");
  stats_cmd->callback([&] { rc = run_stats(st_quadruples, st_top, st_out); });

  // explain
  auto* explain_cmd =
      app.add_subcommand("explain", "Dump per-edge attention for one item");
  std::string xp_graph, xp_checkpoint, xp_item, xp_out;
  explain_cmd->add_option("--graph", xp_graph, "Hypergraph JSON")
      ->required()
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--checkpoint", xp_checkpoint, "Model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--item", xp_item, "Item id as it appears in the reviews")
      ->required();
  explain_cmd->add_option("--out", xp_out, "Output path; stdout when omitted");
  explain_cmd->callback([&] { rc = run_explain(xp_graph, xp_checkpoint, xp_item, xp_out); });

  // grad-check
  auto* gc_cmd = app.add_subcommand(
      "grad-check", "Finite-difference check of the training-loss gradients");
  aph::HyperParams gc_hp;
  std::string gc_variant = "full";
  int gc_edges = 10;
  std::uint64_t gc_seed = 42;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  std::size_t gc_max_coords = 0;
  add_hyper_options(gc_cmd, gc_hp);
  gc_cmd->add_option("--variant", gc_variant, "Model variant to check")
      ->capture_default_str();
  gc_cmd->add_option("--edges", gc_edges, "Hyperedges in the toy graph")
      ->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "Random seed")->capture_default_str();
  gc_cmd->add_option("--eps", gc_eps, "Central-difference step")->capture_default_str();
  gc_cmd->add_option("--tol", gc_tol, "Maximum admissible relative error")
      ->capture_default_str();
  gc_cmd->add_option("--max-coords", gc_max_coords,
                     "Coordinates sampled per parameter; 0 checks all");
  gc_cmd->callback([&] {
    rc = run_grad_check(gc_hp, aph::variant_from_string(gc_variant), gc_edges, gc_seed,
                        gc_eps, gc_tol, gc_max_coords);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "aph: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
