#include "gismo/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gismo/baselines.hpp"
#include "gismo/errors.hpp"
#include "gismo/eval.hpp"
#include "gismo/miner.hpp"

namespace gismo::cli {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const RunConfig& c) {
  to_json(j, c.model);
  j["vocab"] = c.vocab;
  j["graph"] = c.graph;
  j["recipes"] = c.recipes;
  j["substitutions"] = c.substitutions;
  j["comments"] = c.comments;
  j["tuples_out"] = c.tuples_out;
  j["external_features"] = c.external_features;
  j["external_features_index"] = c.external_features_index;
  j["external_finetune"] = c.external_finetune;
  j["external_pullback"] = c.external_pullback;
  j["title_embeddings"] = c.title_embeddings;
  j["title_embeddings_index"] = c.title_embeddings_index;
  j["embedding_metric"] = c.embedding_metric;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  from_json(j, c.model);
  c.vocab = j.value("vocab", c.vocab);
  c.graph = j.value("graph", c.graph);
  c.recipes = j.value("recipes", c.recipes);
  c.substitutions = j.value("substitutions", c.substitutions);
  c.comments = j.value("comments", c.comments);
  c.tuples_out = j.value("tuples_out", c.tuples_out);
  c.external_features = j.value("external_features", c.external_features);
  c.external_features_index = j.value("external_features_index", c.external_features_index);
  c.external_finetune = j.value("external_finetune", c.external_finetune);
  c.external_pullback = j.value("external_pullback", c.external_pullback);
  c.title_embeddings = j.value("title_embeddings", c.title_embeddings);
  c.title_embeddings_index = j.value("title_embeddings_index", c.title_embeddings_index);
  c.embedding_metric = j.value("embedding_metric", c.embedding_metric);
  c.seeds = j.value("seeds", c.seeds);
  c.output_dir = j.value("output_dir", c.output_dir);
}

namespace {

RunConfig assemble_config(const std::string& config_path,
                          const std::vector<std::string>& overrides,
                          const std::string& seed_list, const std::string& out_dir) {
  nlohmann::json merged = nlohmann::json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    require(in.good(), "cannot open config file: " + config_path);
    try {
      in >> merged;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(config_path + ": " + e.what());
    }
    require(merged.is_object(), config_path + ": config must be a JSON object");
  }
  for (const std::string& kv : overrides) {
    const auto eq = kv.find('=');
    require(eq != std::string::npos && eq > 0, "--set expects KEY=VALUE, got \"" + kv + "\"");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      parsed = value;  // plain string
    }
    merged[key] = parsed;
  }
  RunConfig config;
  try {
    config = merged.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("config: " + std::string(e.what()));
  }
  if (!seed_list.empty()) {
    config.seeds.clear();
    std::size_t pos = 0;
    while (pos <= seed_list.size()) {
      const auto comma = seed_list.find(',', pos);
      const std::string part =
          seed_list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      try {
        config.seeds.push_back(std::stoull(part));
      } catch (const std::exception&) {
        throw FormatError("--seed expects N[,N...], got \"" + seed_list + "\"");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  require(!config.seeds.empty(), "config: seeds must be nonempty");
  if (!out_dir.empty()) config.output_dir = out_dir;
  return config;
}

Vocabulary load_vocab_checked(const RunConfig& config, std::ostream& err) {
  require(!config.vocab.empty(), "config: \"vocab\" path is required");
  Vocabulary vocab = load_vocabulary(config.vocab);
  err << "vocabulary: " << vocab.size() << " ingredients, " << vocab.alias_count()
      << " aliases\n";
  return vocab;
}

RecipeStore load_recipes_checked(const RunConfig& config, const Vocabulary& vocab,
                                 std::ostream& err) {
  require(!config.recipes.empty(), "config: \"recipes\" path is required");
  RecipeStore store = load_recipes(config.recipes, vocab);
  const RecipeLoadStats& st = store.stats();
  err << "recipes: " << st.recipes_loaded << " loaded, " << st.ingredients_dropped
      << " ingredient names dropped, " << st.recipes_dropped << " recipes dropped\n";
  if (!config.title_embeddings.empty()) {
    require(!config.title_embeddings_index.empty(),
            "config: \"title_embeddings_index\" is required with \"title_embeddings\"");
    store.attach_title_embeddings(load_matrix(config.title_embeddings),
                                  load_row_index(config.title_embeddings_index));
    err << "title embeddings: dimension " << store.title_dim() << "\n";
  }
  return store;
}

SubstitutionDataset load_substitutions_checked(const RunConfig& config,
                                               const RecipeStore& recipes,
                                               const Vocabulary& vocab, std::ostream& err) {
  require(!config.substitutions.empty(), "config: \"substitutions\" path is required");
  SubstitutionDataset ds = load_substitutions(config.substitutions, recipes, vocab);
  const SubstitutionDropStats& st = ds.drop_stats();
  err << "substitutions: train=" << ds.split_size(Split::Train)
      << " val=" << ds.split_size(Split::Val) << " test=" << ds.split_size(Split::Test)
      << "; dropped: unknown_recipe=" << st.unknown_recipe
      << " unresolved_source=" << st.unresolved_source
      << " unresolved_target=" << st.unresolved_target
      << " source_equals_target=" << st.source_equals_target
      << " source_not_in_recipe=" << st.source_not_in_recipe << "\n";
  return ds;
}

GismoModel build_model(const RunConfig& config, const GismoConfig& model_config,
                       const Vocabulary& vocab, const FlavorGraph& graph,
                       const RecipeStore& recipes) {
  GismoModel model(model_config, graph, recipes);
  if (!config.external_features.empty()) {
    Matrix features;
    if (!config.external_features_index.empty()) {
      // rows keyed by ingredient name; reorder into vocabulary order
      features = load_embedding_matrix(config.external_features,
                                       config.external_features_index, vocab,
                                       SimilarityMetric::Cosine)
                     .vectors;
    } else {
      features = load_matrix(config.external_features);
    }
    model.inject_external_features(
        ExternalFeatures{std::move(features), config.external_finetune,
                         config.external_pullback});
  }
  return model;
}

int cmd_extract(const RunConfig& config, std::ostream& out, std::ostream& err) {
  require(!config.comments.empty(), "config: \"comments\" path is required");
  const Vocabulary vocab = load_vocab_checked(config, err);
  const RecipeStore recipes = load_recipes_checked(config, vocab, err);
  std::string tuples_out = config.tuples_out;
  if (tuples_out.empty()) {
    fs::create_directories(config.output_dir);
    tuples_out = config.output_dir + "/tuples.jsonl";
  }
  const miner::ExtractionReport report =
      miner::run_extraction(config.comments, recipes, vocab, tuples_out);
  err << "tuples written to " << tuples_out << "\n";
  out << report.to_json() << "\n";
  return 0;
}

int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  const Vocabulary vocab = load_vocab_checked(config, err);
  const RecipeStore recipes = load_recipes_checked(config, vocab, err);
  require(!config.graph.empty(), "config: \"graph\" path is required");
  const FlavorGraph graph = load_graph(config.graph, vocab);
  err << "graph: " << graph.node_count() << " nodes ("
      << graph.ingredient_count() << " ingredients, " << graph.compound_count()
      << " compounds), " << graph.edge_slot_count() / 2 << " edges\n";
  const SubstitutionDataset dataset =
      load_substitutions_checked(config, recipes, vocab, err);

  fs::create_directories(config.output_dir);
  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> best_mrrs;
  for (const std::uint64_t seed : config.seeds) {
    GismoConfig model_config = config.model;
    model_config.seed = seed;
    GismoModel model = build_model(config, model_config, vocab, graph, recipes);
    err << "seed " << seed << ": training up to " << model_config.max_epochs
        << " epochs\n";
    FitResult fit = model.fit(dataset);
    model.set_params(fit.best_params);

    const std::string run_dir = config.output_dir + "/seed_" + std::to_string(seed);
    save_checkpoint(run_dir, model);
    {
      std::ofstream log(run_dir + "/log.csv", std::ios::trunc);
      require(log.good(), "cannot write " + run_dir + "/log.csv");
      log << training_log_csv(fit.log);
    }
    err << "seed " << seed << ": best val MRR " << fit.best_val_mrr << " at epoch "
        << fit.best_epoch << " (" << fit.log.size() << " epochs run)\n";
    runs.push_back({{"seed", seed},
                    {"best_val_mrr", fit.best_val_mrr},
                    {"best_epoch", fit.best_epoch},
                    {"epochs_run", fit.log.size()},
                    {"checkpoint", run_dir}});
    best_mrrs.push_back(fit.best_val_mrr);
  }
  double mean = 0.0;
  for (double v : best_mrrs) mean += v;
  mean /= static_cast<double>(best_mrrs.size());
  double var = 0.0;
  for (double v : best_mrrs) var += (v - mean) * (v - mean);
  var /= static_cast<double>(best_mrrs.size());  // population std
  nlohmann::json summary{{"runs", runs},
                         {"mean_val_mrr", mean},
                         {"std_val_mrr", std::sqrt(var)}};
  {
    std::ofstream sum_out(config.output_dir + "/summary.json", std::ios::trunc);
    require(sum_out.good(), "cannot write " + config.output_dir + "/summary.json");
    sum_out << summary.dump(2) << "\n";
  }
  out << summary.dump(2) << "\n";
  return 0;
}

std::unique_ptr<Scorer> make_baseline(const std::string& name, const RunConfig& config,
                                      const Vocabulary& vocab,
                                      const SubstitutionDataset& dataset,
                                      std::uint64_t seed) {
  if (name == "random") {
    return std::make_unique<RandomRanker>(vocab.size(), seed);
  }
  const FrequencyTables tables = fit_tables(dataset);
  if (name == "mode") return std::make_unique<ModeRanker>(vocab.size(), tables);
  if (name == "freq") return std::make_unique<FreqRanker>(vocab.size(), tables);
  if (name == "lt") return std::make_unique<LtRanker>(vocab.size(), tables);
  if (name == "lt_freq") return std::make_unique<LtFreqRanker>(vocab.size(), tables);
  if (name == "embedding") {
    require(!config.external_features.empty() && !config.external_features_index.empty(),
            "embedding baseline requires \"external_features\" and "
            "\"external_features_index\"");
    return std::make_unique<EmbeddingRanker>(
        load_embedding_matrix(config.external_features, config.external_features_index,
                              vocab, parse_metric(config.embedding_metric)));
  }
  throw FormatError("unknown baseline \"" + name +
                    "\" (expected random, mode, freq, lt, lt_freq, embedding)");
}

int eval_common(const RunConfig& config, const std::string& checkpoint,
                const std::string& baseline, const std::string& split_name,
                std::ostream& out, std::ostream& err) {
  require(checkpoint.empty() != baseline.empty(),
          "exactly one of --checkpoint and --baseline is required");
  const Split split = parse_split(split_name);
  require(split != Split::Train, "evaluation runs on the val or test split");

  const Vocabulary vocab = load_vocab_checked(config, err);
  const RecipeStore recipes = load_recipes_checked(config, vocab, err);
  const SubstitutionDataset dataset =
      load_substitutions_checked(config, recipes, vocab, err);
  require(dataset.split_size(split) > 0,
          "split \"" + split_name + "\" has no substitution samples");
  const auto strata = stratify(dataset);
  const auto queries = build_queries(dataset, split, strata, recipes);

  nlohmann::json result;
  std::string table;
  if (!baseline.empty()) {
    if (baseline == "random" && config.seeds.size() > 1) {
      // seeded runs, mean and population std over seeds
      std::vector<double> mrrs;
      nlohmann::json reports = nlohmann::json::array();
      for (std::uint64_t seed : config.seeds) {
        const auto scorer = make_baseline(baseline, config, vocab, dataset, seed);
        const MetricReport report = evaluate(*scorer, queries);
        mrrs.push_back(report.overall.mrr);
        reports.push_back(nlohmann::json::parse(report.to_json()));
        if (table.empty()) table = report.to_table();
      }
      double mean = 0.0;
      for (double v : mrrs) mean += v;
      mean /= static_cast<double>(mrrs.size());
      double var = 0.0;
      for (double v : mrrs) var += (v - mean) * (v - mean);
      var /= static_cast<double>(mrrs.size());
      result = {{"baseline", baseline},
                {"split", split_name},
                {"reports", reports},
                {"mean_mrr", mean},
                {"std_mrr", std::sqrt(var)}};
    } else {
      const auto scorer = make_baseline(baseline, config, vocab, dataset,
                                        config.seeds.front());
      const MetricReport report = evaluate(*scorer, queries);
      result = {{"baseline", baseline},
                {"split", split_name},
                {"report", nlohmann::json::parse(report.to_json())}};
      table = report.to_table();
    }
  } else {
    require(!config.graph.empty(), "config: \"graph\" path is required");
    const FlavorGraph graph = load_graph(config.graph, vocab);
    LoadedCheckpoint loaded = load_checkpoint(checkpoint);
    require(loaded.node_count == graph.node_count(),
            "checkpoint was trained on a graph with " +
                std::to_string(loaded.node_count) + " nodes, this graph has " +
                std::to_string(graph.node_count()));
    GismoModel model(loaded.config, graph, recipes);
    model.set_params(std::move(loaded.params));
    const auto scorer = model.make_scorer();
    const MetricReport report = evaluate(*scorer, queries);
    result = {{"checkpoint", checkpoint},
              {"split", split_name},
              {"report", nlohmann::json::parse(report.to_json())}};
    table = report.to_table();
  }
  err << table;
  out << result.dump(2) << "\n";
  return 0;
}

int cmd_suggest(const RunConfig& config, const std::string& checkpoint,
                const std::string& recipe_file, const std::string& source_name,
                std::size_t top_k, std::ostream& out, std::ostream& err) {
  require(!checkpoint.empty(), "--checkpoint is required");
  require(!recipe_file.empty(), "--recipe-file is required");
  require(!source_name.empty(), "--source is required");
  const Vocabulary vocab = load_vocab_checked(config, err);
  require(!config.graph.empty(), "config: \"graph\" path is required");
  const FlavorGraph graph = load_graph(config.graph, vocab);

  std::ifstream in(recipe_file);
  require(in.good(), "cannot open recipe file: " + recipe_file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(recipe_file + ": " + e.what());
  }
  RecipeStore store;
  Recipe recipe;
  std::vector<double> title_embedding;
  try {
    recipe.recipe_id = j.value("recipe_id", std::string("query"));
    recipe.title = j.value("title", std::string());
    recipe.split = parse_split(j.value("split", std::string("test")));
    for (const auto& raw : j.at("ingredients")) {
      if (auto id = resolve_ingredient(raw.get<std::string>(), vocab)) {
        recipe.ingredients.push_back(*id);
      } else {
        err << "ignoring unknown ingredient \"" << raw.get<std::string>() << "\"\n";
      }
    }
    if (j.contains("title_embedding")) {
      title_embedding = j.at("title_embedding").get<std::vector<double>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(recipe_file + ": " + e.what());
  }
  require(!recipe.ingredients.empty(), recipe_file + ": no resolvable ingredients");
  store.add(std::move(recipe));
  if (!title_embedding.empty()) {
    Matrix titles(1, title_embedding.size());
    std::copy(title_embedding.begin(), title_embedding.end(), titles.row(0));
    store.attach_title_embeddings(std::move(titles), {{store.at(0).recipe_id, 0}});
  }

  const auto source = resolve_ingredient(source_name, vocab);
  require(source.has_value(), "unknown source ingredient: \"" + source_name + "\"");
  require(store.at(0).contains(*source),
          "source ingredient \"" + source_name + "\" is not in the recipe");

  LoadedCheckpoint loaded = load_checkpoint(checkpoint);
  require(loaded.node_count == graph.node_count(),
          "checkpoint node count does not match the graph");
  GismoModel model(loaded.config, graph, store);
  model.set_params(std::move(loaded.params));

  const auto ranked = model.suggest(SubstitutionQuery{*source, &store.at(0)}, top_k);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    char line[160];
    std::snprintf(line, sizeof(line), "%3zu  %-32s %.6f\n", i + 1,
                  vocab.name(ranked[i].first).c_str(), ranked[i].second);
    out << line;
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"context-aware ingredient substitution: mining, training, evaluation"};
  app.fallthrough();
  std::string config_path, seed_list, out_dir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", overrides, "KEY=VALUE config override (repeatable)");
  app.add_option("--seed", seed_list, "comma-separated seed list override");
  app.add_option("--out", out_dir, "output directory override");
  app.require_subcommand(1);

  auto* extract = app.add_subcommand("extract", "mine substitution tuples from comments");
  auto* train = app.add_subcommand("train", "train the substitution model per seed");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint or baseline");
  std::string checkpoint, baseline, split_name = "test";
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint directory");
  eval_cmd->add_option("--baseline", baseline, "baseline name");
  eval_cmd->add_option("--split", split_name, "val or test (default test)");
  auto* suggest = app.add_subcommand("suggest", "rank substitutes for one recipe");
  std::string sg_checkpoint, recipe_file, source_name;
  std::size_t top_k = 10;
  suggest->add_option("--checkpoint", sg_checkpoint, "checkpoint directory");
  suggest->add_option("--recipe-file", recipe_file, "JSON recipe file");
  suggest->add_option("--source", source_name, "ingredient to substitute");
  suggest->add_option("--top-k", top_k, "number of suggestions (default 10)");
  auto* baseline_cmd = app.add_subcommand("baseline", "fit on train and evaluate a baseline");
  std::string bl_name, bl_split = "test";
  baseline_cmd->add_option("name", bl_name, "random|mode|freq|lt|lt_freq|embedding")
      ->required();
  baseline_cmd->add_option("--split", bl_split, "val or test (default test)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << e.what() << "\n";
    return 2;
  }

  try {
    const RunConfig config = assemble_config(config_path, overrides, seed_list, out_dir);
    if (extract->parsed()) return cmd_extract(config, out, err);
    if (train->parsed()) return cmd_train(config, out, err);
    if (eval_cmd->parsed()) {
      return eval_common(config, checkpoint, baseline, split_name, out, err);
    }
    if (suggest->parsed()) {
      return cmd_suggest(config, sg_checkpoint, recipe_file, source_name, top_k, out, err);
    }
    if (baseline_cmd->parsed()) {
      return eval_common(config, "", bl_name, bl_split, out, err);
    }
    err << "no command given\n";
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 3;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace gismo::cli
