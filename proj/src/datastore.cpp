#include "knnner/datastore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "knnner/corpus_io.hpp"
#include "knnner/error.hpp"

namespace knnner {
namespace {

constexpr double kUnitNormTolerance = 1e-6;

double squared_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return s;
}

bool all_finite(std::span<const float> v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
}

// Sequential accumulation; the search and any caller re-deriving scores must
// agree bit-for-bit.
double dot(std::span<const float> v, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += static_cast<double>(v[i]) * q[i];
  return s;
}

}  // namespace

Datastore::Datastore(std::size_t dim, std::size_t label_count, const TagsetHash& hash,
                     std::vector<float> vectors, std::vector<MainLabel> labels,
                     std::vector<EntrySource> sources)
    : dim_(dim),
      label_count_(label_count),
      tagset_hash_(hash),
      vectors_(std::move(vectors)),
      labels_(std::move(labels)),
      sources_(std::move(sources)) {}

Datastore Datastore::from_embeddings(const Tagset& ts, std::size_t dim,
                                     std::span<const float> embeddings,
                                     std::vector<MainLabel> labels,
                                     std::vector<EntrySource> sources) {
  if (dim == 0) throw validation_error("datastore: dim must be positive");
  if (embeddings.size() != labels.size() * dim)
    throw validation_error(fmt::format("datastore: {} embedding values for {} labels of dim {}",
                                       embeddings.size(), labels.size(), dim));
  if (!sources.empty() && sources.size() != labels.size())
    throw validation_error("datastore: source list length differs from label list");

  auto describe = [&](std::size_t i) {
    if (sources.empty()) return fmt::format("entry {}", i);
    return fmt::format("record '{}' token {}", sources[i].record_id, sources[i].token);
  };

  std::vector<float> vectors(embeddings.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].value >= ts.main_label_count())
      throw validation_error(fmt::format("datastore: {} has label {} outside the tagset",
                                         describe(i), labels[i].value));
    auto row = embeddings.subspan(i * dim, dim);
    if (!all_finite(row))
      throw validation_error(fmt::format("datastore: {} has a non-finite embedding", describe(i)));
    double norm = std::sqrt(squared_norm(row));
    if (norm == 0.0)
      throw validation_error(fmt::format("datastore: {} has a zero-norm embedding", describe(i)));
    for (std::size_t j = 0; j < dim; ++j)
      vectors[i * dim + j] = static_cast<float>(static_cast<double>(row[j]) / norm);
  }
  return Datastore(dim, ts.main_label_count(), ts.hash(), std::move(vectors), std::move(labels),
                   std::move(sources));
}

Datastore Datastore::from_normalized(std::size_t dim, std::size_t label_count,
                                     const TagsetHash& tagset_hash, std::vector<float> vectors,
                                     std::vector<MainLabel> labels) {
  if (dim == 0) throw validation_error("datastore: dim must be positive");
  if (vectors.size() != labels.size() * dim)
    throw validation_error("datastore: vector storage does not match entry count");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].value >= label_count)
      throw validation_error(fmt::format("datastore: entry {} has label {} outside label space {}",
                                         i, labels[i].value, label_count));
    std::span<const float> row(vectors.data() + i * dim, dim);
    if (!all_finite(row))
      throw validation_error(fmt::format("datastore: entry {} is not finite", i));
    double norm = std::sqrt(squared_norm(row));
    if (std::abs(norm - 1.0) > kUnitNormTolerance)
      throw validation_error(fmt::format("datastore: entry {} has norm {}, not unit", i, norm));
  }
  return Datastore(dim, label_count, tagset_hash, std::move(vectors), std::move(labels), {});
}

std::optional<EntrySource> Datastore::source(std::size_t i) const {
  if (sources_.empty()) return std::nullopt;
  return sources_[i];
}

std::vector<std::uint64_t> Datastore::label_histogram() const {
  std::vector<std::uint64_t> counts(label_count_, 0);
  for (auto l : labels_) ++counts[l.value];
  return counts;
}

Datastore build_datastore(const Corpus& train, const Tagset& ts, BuildOptions options) {
  if (train.dim == 0) throw validation_error("datastore: corpus dim is 0");
  std::vector<float> embeddings;
  std::vector<MainLabel> labels;
  std::vector<EntrySource> sources;
  embeddings.reserve(train.token_count() * train.dim);
  for (const auto& rec : train.records) {
    require_field(rec, rec.emb.has_value(), "emb");
    require_field(rec, rec.gold_main.has_value(), "gold_main");
    for (std::size_t i = 0; i < rec.size(); ++i) {
      auto label = (*rec.gold_main)[i];
      if (options.exclude_outside && label.is_outside()) continue;
      auto row = rec.emb->row(i);
      embeddings.insert(embeddings.end(), row.begin(), row.end());
      labels.push_back(label);
      sources.push_back({rec.id, static_cast<std::uint32_t>(i)});
    }
  }
  if (labels.empty()) throw validation_error("datastore: no entries to store");
  return Datastore::from_embeddings(ts, train.dim, embeddings, std::move(labels),
                                    std::move(sources));
}

double cosine_sim(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw validation_error(fmt::format("cosine_sim: width mismatch ({} vs {})", a.size(), b.size()));
  double na = squared_norm(a);
  double nb = squared_norm(b);
  if (na == 0.0 || nb == 0.0) throw validation_error("cosine_sim: zero vector");
  double ab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += static_cast<double>(a[i]) * b[i];
  return ab / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> normalized_query(std::span<const float> query) {
  if (!all_finite(query)) throw validation_error("knn_search: query is not finite");
  double norm = std::sqrt(squared_norm(query));
  if (norm == 0.0) throw validation_error("knn_search: zero query vector");
  std::vector<double> q(query.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<double>(query[i]) / norm;
  return q;
}

NeighborList NeighborList::prefix(std::size_t k) const {
  NeighborList out;
  out.items.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(std::min(k, items.size())));
  return out;
}

NeighborList knn_search(const Datastore& ds, std::span<const float> query, std::size_t k) {
  if (ds.empty()) throw validation_error("knn_search: empty datastore");
  if (k == 0) throw validation_error("knn_search: k must be positive");
  if (query.size() != ds.dim())
    throw validation_error(
        fmt::format("knn_search: query width {} does not match datastore dim {}", query.size(), ds.dim()));
  auto q = normalized_query(query);

  const std::size_t n = ds.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = dot(ds.vector(i), q);

  const std::size_t keep = std::min(k, n);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    before);

  NeighborList out;
  out.items.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r)
    out.items.push_back({order[r], scores[order[r]], ds.label(order[r])});
  return out;
}

}  // namespace knnner
