#include "knnner/sweep.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "knnner/decode.hpp"
#include "knnner/error.hpp"
#include "knnner/eval.hpp"
#include "knnner/knn_inference.hpp"

namespace knnner {

std::vector<double> SweepGrid::default_lambdas() {
  std::vector<double> out;
  for (int i = 0; i <= 10; ++i) out.push_back(i / 10.0);
  return out;
}

void SweepGrid::validate() const {
  if (ks.empty()) throw validation_error("sweep: empty k list");
  if (lambdas.empty()) throw validation_error("sweep: empty lambda list");
  for (auto k : ks) KnnConfig{k, 0.0, tau}.validate();
  for (auto l : lambdas) KnnConfig{1, l, tau}.validate();
  auto sorted_ks = ks;
  std::sort(sorted_ks.begin(), sorted_ks.end());
  if (std::adjacent_find(sorted_ks.begin(), sorted_ks.end()) != sorted_ks.end())
    throw validation_error("sweep: duplicate k in grid");
  auto sorted_lambdas = lambdas;
  std::sort(sorted_lambdas.begin(), sorted_lambdas.end());
  if (std::adjacent_find(sorted_lambdas.begin(), sorted_lambdas.end()) != sorted_lambdas.end())
    throw validation_error("sweep: duplicate lambda in grid");
}

std::string SweepResult::to_csv() const {
  std::string out = "k,lambda,precision,recall,f1\n";
  auto line = [](const SweepRow& r) {
    return fmt::format("{},{},{:.6f},{:.6f},{:.6f}", r.k, r.lambda, r.precision, r.recall, r.f1);
  };
  for (const auto& r : rows) out += line(r) + "\n";
  out += fmt::format("# best: k={} lambda={} precision={:.6f} recall={:.6f} f1={:.6f}\n", best.k,
                     best.lambda, best.precision, best.recall, best.f1);
  return out;
}

namespace {

SweepRow make_row(std::size_t k, double lambda, const EvalReport& report) {
  return {k, lambda, report.precision, report.recall, report.f1};
}

SweepRow pick_best(const std::vector<SweepRow>& rows) {
  const SweepRow* best = &rows.front();
  for (const auto& r : rows) {
    if (r.f1 > best->f1 || (r.f1 == best->f1 && r.k < best->k) ||
        (r.f1 == best->f1 && r.k == best->k && r.lambda > best->lambda))
      best = &r;
  }
  return *best;
}

// Per-(k, lambda) decisions from cached neighbors: P_kNN depends only on k,
// so it is formed once per k and reused across lambdas.
std::vector<SweepRow> sweep_cached(const Corpus& dev, const Datastore& ds,
                                   const std::vector<std::size_t>& ks,
                                   const std::vector<double>& lambdas, double tau,
                                   const std::vector<SentenceEntities>& gold, const Tagset& ts) {
  const std::size_t k_max = ks.back();
  std::vector<std::vector<NeighborList>> cache;
  cache.reserve(dev.records.size());
  for (const auto& rec : dev.records) cache.push_back(retrieve_neighbors(rec, ds, k_max));

  std::vector<SweepRow> rows;
  for (auto k : ks) {
    // p_knn[record][token]
    std::vector<std::vector<LabelDistribution>> p_knn(dev.records.size());
    for (std::size_t r = 0; r < dev.records.size(); ++r)
      for (const auto& nbrs : cache[r])
        p_knn[r].push_back(knn_distribution(nbrs.prefix(k), tau, ts.main_label_count()));

    for (auto lambda : lambdas) {
      std::vector<SentenceEntities> pred;
      pred.reserve(dev.records.size());
      for (std::size_t r = 0; r < dev.records.size(); ++r) {
        const auto& rec = dev.records[r];
        std::vector<TokenPrediction> tokens;
        tokens.reserve(rec.size());
        for (std::size_t i = 0; i < rec.size(); ++i) {
          auto p_main = LabelDistribution::from_row(rec.p_main->row(i));
          auto p_final = interpolate(p_main, p_knn[r][i], lambda);
          tokens.push_back({p_final.argmax(),
                            rec.p_sub ? threshold_subtypes(rec.p_sub->row(i)) : std::vector<SubLabel>{}});
        }
        pred.push_back({rec.id, decode_entities(tokens, ts)});
      }
      rows.push_back(make_row(k, lambda, micro_prf(gold, pred, ts)));
    }
  }
  return rows;
}

std::vector<SweepRow> sweep_per_k(const Corpus& dev, const Datastore& ds,
                                  const std::vector<std::size_t>& ks,
                                  const std::vector<double>& lambdas, double tau,
                                  const std::vector<SentenceEntities>& gold, const Tagset& ts) {
  std::vector<SweepRow> rows;
  for (auto k : ks) {
    for (auto lambda : lambdas) {
      KnnConfig cfg{k, lambda, tau};
      std::vector<SentenceEntities> pred;
      for (const auto& rec : dev.records)
        pred.push_back({rec.id, decode_entities(predict_tokens(rec, ds, cfg, ts), ts)});
      rows.push_back(make_row(k, lambda, micro_prf(gold, pred, ts)));
    }
  }
  return rows;
}

}  // namespace

SweepResult run_sweep(const Corpus& dev, const Datastore& ds, const SweepGrid& grid,
                      const Tagset& ts, Retrieval retrieval) {
  grid.validate();
  auto ks = grid.ks;
  auto lambdas = grid.lambdas;
  std::sort(ks.begin(), ks.end());
  std::sort(lambdas.begin(), lambdas.end());

  std::vector<SentenceEntities> gold;
  gold.reserve(dev.records.size());
  for (const auto& rec : dev.records) {
    require_field(rec, rec.p_main.has_value(), "p_main");
    check_compatible(rec, ds, ts);
    gold.push_back(gold_entities(rec, ts));
  }

  SweepResult result;
  result.rows = retrieval == Retrieval::Once
                    ? sweep_cached(dev, ds, ks, lambdas, grid.tau, gold, ts)
                    : sweep_per_k(dev, ds, ks, lambdas, grid.tau, gold, ts);
  result.best = pick_best(result.rows);
  return result;
}

}  // namespace knnner
