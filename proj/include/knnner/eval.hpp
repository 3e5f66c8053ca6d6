#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "knnner/decode.hpp"
#include "knnner/tagset.hpp"

namespace knnner {

struct Counts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  // precision = tp/(tp+fp), recall = tp/(tp+fn). With nothing on either
  // side all three metrics are 1; a side with no instances against a
  // nonempty other side scores 0.
  double precision() const;
  double recall() const;
  double f1() const;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Counts totals;
  std::map<std::string, Counts> per_type;  // keyed by main type or subtype name

  // {"precision":..,"recall":..,"f1":..,"tp":..,"fp":..,"fn":..,"per_type":{...}}
  std::string to_json() const;
};

// Entity-level micro P/R/F1. Every entity contributes one (s, e, main)
// instance plus one (s, e, sub) instance per subtype; instances match only
// on exact span and tag. Gold and pred must cover the same sentence ids.
EvalReport micro_prf(std::span<const SentenceEntities> gold, std::span<const SentenceEntities> pred,
                     const Tagset& ts);

}  // namespace knnner
