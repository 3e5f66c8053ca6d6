#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "knnner/corpus_io.hpp"
#include "knnner/datastore.hpp"
#include "knnner/tagset.hpp"

namespace knnner {

// Probability vector over the main BIO label space.
struct LabelDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  double sum() const;
  // Highest-probability label; exact ties go to the lower index.
  MainLabel argmax() const;

  static LabelDistribution from_row(std::span<const double> row);

  friend bool operator==(const LabelDistribution&, const LabelDistribution&) = default;
};

struct KnnConfig {
  std::size_t k = 512;
  double lambda = 0.5;
  double tau = 1.0;

  // k >= 1, 0 <= lambda <= 1, tau > 0; throws a validation error otherwise.
  void validate() const;
};

inline constexpr double kSubtypeThreshold = 0.5;

// probs[v] proportional to the sum of exp(score/tau) over neighbors labelled v.
// Labels absent from the list get exactly 0.
LabelDistribution knn_distribution(const NeighborList& neighbors, double tau,
                                   std::size_t label_space);

// lambda * p_main + (1 - lambda) * p_knn.
LabelDistribution interpolate(const LabelDistribution& p_main, const LabelDistribution& p_knn,
                              double lambda);

// Subtype labels whose sigmoid output exceeds the threshold, ascending.
std::vector<SubLabel> threshold_subtypes(std::span<const double> p_sub_row);

struct TokenPrediction {
  MainLabel main;
  std::vector<SubLabel> subs;

  friend bool operator==(const TokenPrediction&, const TokenPrediction&) = default;
};

// Checks that `ds` can serve queries for `rec` under `ts`.
void check_compatible(const SentenceRecord& rec, const Datastore& ds, const Tagset& ts);

// One neighbor list per token of `rec`, each of size min(k, |ds|).
std::vector<NeighborList> retrieve_neighbors(const SentenceRecord& rec, const Datastore& ds,
                                             std::size_t k);

// Decision step given already-retrieved neighbors. Each token uses the first
// cfg.k entries of its list, so lists retrieved at a larger k can be reused.
std::vector<TokenPrediction> predict_from_neighbors(const SentenceRecord& rec,
                                                    std::span<const NeighborList> neighbors,
                                                    const KnnConfig& cfg, const Tagset& ts);

// Full per-token pipeline: retrieve, form P_kNN, interpolate with p_main,
// argmax. Subtypes come from thresholding p_sub (empty when absent).
std::vector<TokenPrediction> predict_tokens(const SentenceRecord& rec, const Datastore& ds,
                                            const KnnConfig& cfg, const Tagset& ts);

// Argmax of p_main alone; never touches a datastore.
std::vector<TokenPrediction> predict_baseline(const SentenceRecord& rec, const Tagset& ts);

}  // namespace knnner
