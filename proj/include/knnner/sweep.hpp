#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "knnner/corpus_io.hpp"
#include "knnner/datastore.hpp"
#include "knnner/tagset.hpp"

namespace knnner {

struct SweepGrid {
  std::vector<std::size_t> ks{8, 16, 32, 64, 128, 256, 512};
  std::vector<double> lambdas = default_lambdas();
  double tau = 1.0;

  // 0.0, 0.1, ..., 1.0
  static std::vector<double> default_lambdas();
  void validate() const;
};

struct SweepRow {
  std::size_t k = 0;
  double lambda = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by (k, lambda)
  SweepRow best;               // max f1; ties to smaller k, then larger lambda

  // "k,lambda,precision,recall,f1" header, one line per row, then
  // "# best ..." comment line.
  std::string to_csv() const;
};

enum class Retrieval {
  // One search per token at max(ks); smaller k read from the prefix.
  Once,
  // Fresh search for every k through the full prediction path.
  PerK,
};

SweepResult run_sweep(const Corpus& dev, const Datastore& ds, const SweepGrid& grid,
                      const Tagset& ts, Retrieval retrieval = Retrieval::Once);

}  // namespace knnner
