#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gismo/corpus.hpp"

namespace gismo {

// One evaluation unit: a query plus its recorded answer and the other
// targets that count as correct for the same (recipe, source) group.
struct RankedQuery {
  SubstitutionQuery query;
  IngredientId true_target = 0;
  std::vector<IngredientId> valid_targets;  // sorted; always contains true_target
  std::optional<Stratum> stratum;
};

// Anything that can score substitution candidates. rank() returns one score
// per vocabulary id; higher is better. Entries for the query source are
// ignored by the metrics. Implementations must be pure functions of their
// construction inputs and the query.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> rank(const RankedQuery& query) const = 0;
  virtual std::string name() const = 0;
};

struct EvalOptions {
  // Default: remove the other valid targets from the candidate pool before
  // ranking the true target. The alternative ranks the best valid target
  // against the unfiltered pool.
  bool best_rank_over_valid = false;
};

// Mean-tie rank of the target among all candidates != source, with the other
// valid targets removed from the pool:
//   rank = 1 + |better| + |ties|/2.
double rank_of_target(std::span<const double> scores, IngredientId source,
                      IngredientId target, std::span<const IngredientId> valid_targets);

struct MetricBlock {
  double mrr = 0.0;                 // percent
  std::map<int, double> hit_at;     // k in {1, 3, 10}, percent
  std::size_t query_count = 0;
};

struct MetricReport {
  MetricBlock overall;
  std::optional<MetricBlock> id;   // present when every query carries a stratum
  std::optional<MetricBlock> ood;

  std::string to_json() const;
  std::string to_table() const;  // aligned text, one row per block
};

inline constexpr int kHitKs[] = {1, 3, 10};

// Scores every query, ranks the targets, and aggregates MRR / Hit@k overall
// and per stratum. Checks the report invariants (metric ordering chain,
// count partition, count-weighted stratum mean) before returning.
MetricReport evaluate(const Scorer& scorer, std::span<const RankedQuery> queries,
                      const EvalOptions& options = {});

// One RankedQuery per sample of the split; valid targets are collected by
// grouping the split on (recipe_id, source).
std::vector<RankedQuery> build_queries(const SubstitutionDataset& dataset, Split split,
                                       std::span<const std::optional<Stratum>> strata,
                                       const RecipeStore& recipes);

}  // namespace gismo
