#include "gismo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "gismo/errors.hpp"

namespace gismo {

double rank_of_target(std::span<const double> scores, IngredientId source,
                      IngredientId target, std::span<const IngredientId> valid_targets) {
  check_invariant(target < scores.size(), "rank_of_target: target out of range");
  check_invariant(target != source, "rank_of_target: target equals source");
  const double target_score = scores[target];
  std::size_t better = 0;
  std::size_t ties = 0;
  for (IngredientId v = 0; v < scores.size(); ++v) {
    if (v == source || v == target) continue;
    if (std::binary_search(valid_targets.begin(), valid_targets.end(), v)) {
      continue;  // other valid answers never compete
    }
    if (scores[v] > target_score) {
      ++better;
    } else if (scores[v] == target_score) {
      ++ties;
    }
  }
  return 1.0 + static_cast<double>(better) + static_cast<double>(ties) / 2.0;
}

namespace {

// rank of the best-ranked valid target against the unfiltered pool
double best_rank_over_valid(std::span<const double> scores, IngredientId source,
                            std::span<const IngredientId> valid_targets) {
  double best = std::numeric_limits<double>::infinity();
  for (IngredientId t : valid_targets) {
    const double target_score = scores[t];
    std::size_t better = 0;
    std::size_t ties = 0;
    for (IngredientId v = 0; v < scores.size(); ++v) {
      if (v == source || v == t) continue;
      if (scores[v] > target_score) {
        ++better;
      } else if (scores[v] == target_score) {
        ++ties;
      }
    }
    best = std::min(best, 1.0 + static_cast<double>(better) + static_cast<double>(ties) / 2.0);
  }
  return best;
}

MetricBlock aggregate(std::span<const double> ranks) {
  MetricBlock block;
  block.query_count = ranks.size();
  if (ranks.empty()) return block;
  double inv_sum = 0.0;
  std::map<int, std::size_t> hits;
  for (int k : kHitKs) hits[k] = 0;
  for (double r : ranks) {
    inv_sum += 1.0 / r;
    for (int k : kHitKs) {
      if (r <= static_cast<double>(k)) ++hits[k];
    }
  }
  const double n = static_cast<double>(ranks.size());
  block.mrr = 100.0 * inv_sum / n;
  for (int k : kHitKs) block.hit_at[k] = 100.0 * static_cast<double>(hits[k]) / n;
  return block;
}

void check_block(const MetricBlock& b) {
  const double h1 = b.hit_at.at(1), h3 = b.hit_at.at(3), h10 = b.hit_at.at(10);
  check_invariant(0.0 <= h1 && h1 <= h3 && h3 <= h10 && h10 <= 100.0,
                  "metric report: hit@k ordering violated");
  check_invariant(h1 <= b.mrr + 1e-9 && b.mrr <= 100.0 + 1e-9,
                  "metric report: hit@1 <= mrr <= 100 violated");
}

}  // namespace

MetricReport evaluate(const Scorer& scorer, std::span<const RankedQuery> queries,
                      const EvalOptions& options) {
  require(!queries.empty(), "evaluate: empty query list");
  std::vector<double> ranks(queries.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(queries.size()); ++i) {
    const RankedQuery& q = queries[i];
    const std::vector<double> scores = scorer.rank(q);
    ranks[i] = options.best_rank_over_valid
                   ? best_rank_over_valid(scores, q.query.source, q.valid_targets)
                   : rank_of_target(scores, q.query.source, q.true_target, q.valid_targets);
  }

  MetricReport report;
  report.overall = aggregate(ranks);
  check_block(report.overall);

  bool all_labeled = true;
  for (const RankedQuery& q : queries) all_labeled &= q.stratum.has_value();
  if (all_labeled) {
    std::vector<double> id_ranks, ood_ranks;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      (*queries[i].stratum == Stratum::ID ? id_ranks : ood_ranks).push_back(ranks[i]);
    }
    report.id = aggregate(id_ranks);
    report.ood = aggregate(ood_ranks);
    check_invariant(report.id->query_count + report.ood->query_count ==
                        report.overall.query_count,
                    "metric report: strata do not partition the query set");
    const double weighted =
        (report.id->mrr * static_cast<double>(report.id->query_count) +
         report.ood->mrr * static_cast<double>(report.ood->query_count)) /
        static_cast<double>(report.overall.query_count);
    check_invariant(std::fabs(weighted - report.overall.mrr) < 1e-9,
                    "metric report: stratum means do not reproduce the overall MRR");
  }
  return report;
}

namespace {

nlohmann::json block_json(const MetricBlock& b) {
  nlohmann::json j;
  j["mrr"] = b.mrr;
  for (int k : kHitKs) j["hit@" + std::to_string(k)] = b.hit_at.at(k);
  j["queries"] = b.query_count;
  return j;
}

}  // namespace

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["overall"] = block_json(overall);
  if (id) j["id"] = block_json(*id);
  if (ood) j["ood"] = block_json(*ood);
  return j.dump(2);
}

std::string MetricReport::to_table() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s %10s %10s\n", "", "MRR",
                "Hit@1", "Hit@3", "Hit@10", "queries");
  out += line;
  auto row = [&](const char* label, const MetricBlock& b) {
    std::snprintf(line, sizeof(line), "%-8s %10.2f %10.2f %10.2f %10.2f %10zu\n", label,
                  b.mrr, b.hit_at.at(1), b.hit_at.at(3), b.hit_at.at(10), b.query_count);
    out += line;
  };
  row("overall", overall);
  if (id) row("ID", *id);
  if (ood) row("OOD", *ood);
  return out;
}

std::vector<RankedQuery> build_queries(const SubstitutionDataset& dataset, Split split,
                                       std::span<const std::optional<Stratum>> strata,
                                       const RecipeStore& recipes) {
  check_invariant(strata.size() == dataset.samples().size(),
                  "build_queries: strata map does not match dataset");
  // group the split on (recipe, source) to collect the valid target sets
  std::unordered_map<std::uint64_t, std::vector<IngredientId>> groups;
  for (std::uint32_t idx : dataset.split_indices(split)) {
    const SubstitutionSample& s = dataset.samples()[idx];
    const std::uint64_t key = (static_cast<std::uint64_t>(s.recipe_index) << 32) | s.source;
    groups[key].push_back(s.target);
  }
  for (auto& [key, targets] : groups) {
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  }

  std::vector<RankedQuery> queries;
  queries.reserve(dataset.split_size(split));
  for (std::uint32_t idx : dataset.split_indices(split)) {
    const SubstitutionSample& s = dataset.samples()[idx];
    RankedQuery q;
    q.query.source = s.source;
    q.query.recipe = &recipes.at(s.recipe_index);
    q.true_target = s.target;
    const std::uint64_t key = (static_cast<std::uint64_t>(s.recipe_index) << 32) | s.source;
    q.valid_targets = groups.at(key);
    q.stratum = strata[idx];
    queries.push_back(std::move(q));
  }
  return queries;
}

}  // namespace gismo
