#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gismo/corpus.hpp"
#include "gismo/eval.hpp"
#include "gismo/matrix.hpp"

namespace gismo {

// Exact counts over the training tuples: how often each ingredient appears
// as a target, and how often each directional (source, target) pair occurs.
struct FrequencyTables {
  std::unordered_map<IngredientId, std::uint64_t> target_counts;
  std::unordered_map<std::uint64_t, std::uint64_t> pair_counts;  // key: source<<32|target
  std::uint64_t total = 0;  // training tuple count

  static std::uint64_t pair_key(IngredientId s, IngredientId t) {
    return (static_cast<std::uint64_t>(s) << 32) | t;
  }
  std::uint64_t pair_count(IngredientId s, IngredientId t) const {
    auto it = pair_counts.find(pair_key(s, t));
    return it == pair_counts.end() ? 0 : it->second;
  }
  std::uint64_t target_count(IngredientId t) const {
    auto it = target_counts.find(t);
    return it == target_counts.end() ? 0 : it->second;
  }
};

FrequencyTables fit_tables(const SubstitutionDataset& dataset, Split split = Split::Train);

// Uniform i.i.d. scores. Each query's scores are a pure function of the seed
// and the query itself, so evaluation order and threading do not matter.
class RandomRanker final : public Scorer {
 public:
  RandomRanker(std::size_t vocab_size, std::uint64_t seed)
      : vocab_size_(vocab_size), seed_(seed) {}
  std::vector<double> rank(const RankedQuery& query) const override;
  std::string name() const override { return "random"; }

 private:
  std::size_t vocab_size_;
  std::uint64_t seed_;
};

// Scores 1 for the globally most frequent training target (smallest id on
// ties), 0 for everything else, regardless of the query.
class ModeRanker final : public Scorer {
 public:
  ModeRanker(std::size_t vocab_size, const FrequencyTables& tables);
  std::vector<double> rank(const RankedQuery& query) const override;
  std::string name() const override { return "mode"; }
  IngredientId modal_target() const { return modal_; }

 private:
  std::size_t vocab_size_;
  IngredientId modal_;
};

// Scores every candidate by its global target frequency.
class FreqRanker final : public Scorer {
 public:
  FreqRanker(std::size_t vocab_size, FrequencyTables tables)
      : vocab_size_(vocab_size), tables_(std::move(tables)) {}
  std::vector<double> rank(const RankedQuery& query) const override;
  std::string name() const override { return "freq"; }

 private:
  std::size_t vocab_size_;
  FrequencyTables tables_;
};

// Scores 1 for every target seen with the query source in training, 0
// otherwise; all rank-1 candidates tie at the top.
class LtRanker final : public Scorer {
 public:
  LtRanker(std::size_t vocab_size, FrequencyTables tables)
      : vocab_size_(vocab_size), tables_(std::move(tables)) {}
  std::vector<double> rank(const RankedQuery& query) const override;
  std::string name() const override { return "lt"; }

 private:
  std::size_t vocab_size_;
  FrequencyTables tables_;
};

// Scores every candidate by how often it was the target for the query
// source in training.
class LtFreqRanker final : public Scorer {
 public:
  LtFreqRanker(std::size_t vocab_size, FrequencyTables tables)
      : vocab_size_(vocab_size), tables_(std::move(tables)) {}
  std::vector<double> rank(const RankedQuery& query) const override;
  std::string name() const override { return "lt_freq"; }

 private:
  std::size_t vocab_size_;
  FrequencyTables tables_;
};

enum class SimilarityMetric : std::uint8_t { Cosine, Euclidean };

SimilarityMetric parse_metric(const std::string& s);

// Externally trained ingredient vectors, one row per vocabulary id.
struct EmbeddingMatrix {
  Matrix vectors;
  SimilarityMetric metric = SimilarityMetric::Cosine;
};

// Reads a matrix file plus its name->row sidecar and reorders the rows into
// vocabulary id order. Every vocabulary name must be present.
EmbeddingMatrix load_embedding_matrix(const std::string& matrix_path,
                                      const std::string& sidecar_path,
                                      const Vocabulary& vocab, SimilarityMetric metric);

// Scores candidates by similarity to the source row: cosine similarity, or
// negated distance under the euclidean metric.
class EmbeddingRanker final : public Scorer {
 public:
  explicit EmbeddingRanker(EmbeddingMatrix embedding)
      : embedding_(std::move(embedding)) {}
  std::vector<double> rank(const RankedQuery& query) const override;
  std::string name() const override { return "embedding"; }

 private:
  EmbeddingMatrix embedding_;
};

}  // namespace gismo
