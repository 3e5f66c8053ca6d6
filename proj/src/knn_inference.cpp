#include "knnner/knn_inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "knnner/error.hpp"

namespace knnner {

double LabelDistribution::sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

MainLabel LabelDistribution::argmax() const {
  if (probs.empty()) throw validation_error("argmax of an empty distribution");
  auto it = std::max_element(probs.begin(), probs.end());  // first maximum wins
  return MainLabel{static_cast<std::uint32_t>(it - probs.begin())};
}

LabelDistribution LabelDistribution::from_row(std::span<const double> row) {
  return LabelDistribution{{row.begin(), row.end()}};
}

void KnnConfig::validate() const {
  if (k < 1) throw validation_error(fmt::format("k must be a positive integer (got {})", k));
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw validation_error(fmt::format("lambda must lie in [0, 1] (got {})", lambda));
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw validation_error(fmt::format("tau must be positive (got {})", tau));
}

LabelDistribution knn_distribution(const NeighborList& neighbors, double tau,
                                   std::size_t label_space) {
  if (neighbors.items.empty()) throw validation_error("knn_distribution: empty neighbor list");
  if (!(tau > 0.0)) throw validation_error("knn_distribution: tau must be positive");

  double max_logit = -INFINITY;
  for (const auto& n : neighbors.items) max_logit = std::max(max_logit, n.score / tau);

  LabelDistribution out{std::vector<double>(label_space, 0.0)};
  double total = 0.0;
  for (const auto& n : neighbors.items) {
    if (n.label.value >= label_space)
      throw validation_error(fmt::format("knn_distribution: neighbor label {} outside label space {}",
                                         n.label.value, label_space));
    double w = std::exp(n.score / tau - max_logit);
    out.probs[n.label.value] += w;
    total += w;
  }
  for (auto& p : out.probs) p /= total;
  return out;
}

LabelDistribution interpolate(const LabelDistribution& p_main, const LabelDistribution& p_knn,
                              double lambda) {
  if (p_main.size() != p_knn.size())
    throw validation_error(fmt::format("interpolate: label spaces differ ({} vs {})", p_main.size(),
                                       p_knn.size()));
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw validation_error(fmt::format("interpolate: lambda {} outside [0, 1]", lambda));
  LabelDistribution out{std::vector<double>(p_main.size())};
  for (std::size_t v = 0; v < out.probs.size(); ++v)
    out.probs[v] = lambda * p_main.probs[v] + (1.0 - lambda) * p_knn.probs[v];
  return out;
}

std::vector<SubLabel> threshold_subtypes(std::span<const double> p_sub_row) {
  std::vector<SubLabel> out;
  for (std::size_t j = 0; j < p_sub_row.size(); ++j)
    if (p_sub_row[j] > kSubtypeThreshold) out.push_back(SubLabel{static_cast<std::uint32_t>(j)});
  return out;
}

namespace {

std::vector<SubLabel> token_subtypes(const SentenceRecord& rec, std::size_t i) {
  if (!rec.p_sub) return {};
  return threshold_subtypes(rec.p_sub->row(i));
}

void check_distributions(const SentenceRecord& rec, const Tagset& ts) {
  require_field(rec, rec.p_main.has_value(), "p_main");
  if (rec.p_main->cols() != ts.main_label_count())
    throw validation_error(fmt::format("record '{}': p_main width {} does not match tagset ({})",
                                       rec.id, rec.p_main->cols(), ts.main_label_count()));
  if (rec.p_sub && rec.p_sub->cols() != ts.sub_label_count())
    throw validation_error(fmt::format("record '{}': p_sub width {} does not match tagset ({})",
                                       rec.id, rec.p_sub->cols(), ts.sub_label_count()));
}

}  // namespace

void check_compatible(const SentenceRecord& rec, const Datastore& ds, const Tagset& ts) {
  require_field(rec, rec.emb.has_value(), "emb");
  if (ds.tagset_hash() != ts.hash() || ds.label_count() != ts.main_label_count())
    throw validation_error("datastore was built under a different tagset");
  if (rec.emb->cols() != ds.dim())
    throw validation_error(fmt::format("record '{}': embedding width {} does not match datastore dim {}",
                                       rec.id, rec.emb->cols(), ds.dim()));
}

std::vector<NeighborList> retrieve_neighbors(const SentenceRecord& rec, const Datastore& ds,
                                             std::size_t k) {
  require_field(rec, rec.emb.has_value(), "emb");
  std::vector<NeighborList> out;
  out.reserve(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) out.push_back(knn_search(ds, rec.emb->row(i), k));
  return out;
}

std::vector<TokenPrediction> predict_from_neighbors(const SentenceRecord& rec,
                                                    std::span<const NeighborList> neighbors,
                                                    const KnnConfig& cfg, const Tagset& ts) {
  cfg.validate();
  check_distributions(rec, ts);
  if (neighbors.size() != rec.size())
    throw validation_error(fmt::format("record '{}': {} neighbor lists for {} tokens", rec.id,
                                       neighbors.size(), rec.size()));
  std::vector<TokenPrediction> out;
  out.reserve(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    auto p_main = LabelDistribution::from_row(rec.p_main->row(i));
    auto p_knn = knn_distribution(neighbors[i].prefix(cfg.k), cfg.tau, ts.main_label_count());
    auto p_final = interpolate(p_main, p_knn, cfg.lambda);
    out.push_back({p_final.argmax(), token_subtypes(rec, i)});
  }
  return out;
}

std::vector<TokenPrediction> predict_tokens(const SentenceRecord& rec, const Datastore& ds,
                                            const KnnConfig& cfg, const Tagset& ts) {
  cfg.validate();
  check_compatible(rec, ds, ts);
  check_distributions(rec, ts);
  auto neighbors = retrieve_neighbors(rec, ds, cfg.k);
  return predict_from_neighbors(rec, neighbors, cfg, ts);
}

std::vector<TokenPrediction> predict_baseline(const SentenceRecord& rec, const Tagset& ts) {
  check_distributions(rec, ts);
  std::vector<TokenPrediction> out;
  out.reserve(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i)
    out.push_back({LabelDistribution::from_row(rec.p_main->row(i)).argmax(), token_subtypes(rec, i)});
  return out;
}

}  // namespace knnner
