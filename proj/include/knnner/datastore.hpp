#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "knnner/tagset.hpp"

namespace knnner {

struct Corpus;

// Where a datastore entry came from. Only populated for stores built in
// process; the binary format does not persist it.
struct EntrySource {
  std::string record_id;
  std::uint32_t token = 0;

  friend bool operator==(const EntrySource&, const EntrySource&) = default;
};

// Immutable set of (unit-norm key vector, main label) pairs in insertion order.
class Datastore {
 public:
  // Normalizes each row of `embeddings` (count x dim, row-major) to unit L2
  // norm. Rejects zero-norm and non-finite rows.
  static Datastore from_embeddings(const Tagset& ts, std::size_t dim,
                                   std::span<const float> embeddings,
                                   std::vector<MainLabel> labels,
                                   std::vector<EntrySource> sources = {});

  // Takes already-normalized vectors verbatim (the deserialization path).
  // Every row must have unit norm within 1e-6.
  static Datastore from_normalized(std::size_t dim, std::size_t label_count,
                                   const TagsetHash& tagset_hash, std::vector<float> vectors,
                                   std::vector<MainLabel> labels);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t label_count() const { return label_count_; }
  const TagsetHash& tagset_hash() const { return tagset_hash_; }

  std::span<const float> vector(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
  MainLabel label(std::size_t i) const { return labels_[i]; }
  std::optional<EntrySource> source(std::size_t i) const;

  const std::vector<float>& vectors() const { return vectors_; }
  const std::vector<MainLabel>& labels() const { return labels_; }

  // Entry count per main label index.
  std::vector<std::uint64_t> label_histogram() const;

 private:
  Datastore(std::size_t dim, std::size_t label_count, const TagsetHash& hash,
            std::vector<float> vectors, std::vector<MainLabel> labels,
            std::vector<EntrySource> sources);

  std::size_t dim_;
  std::size_t label_count_;
  TagsetHash tagset_hash_;
  std::vector<float> vectors_;
  std::vector<MainLabel> labels_;
  std::vector<EntrySource> sources_;
};

struct BuildOptions {
  // Skip tokens whose gold label is "O". Off by default: every token is a key.
  bool exclude_outside = false;
};

// One entry per token in corpus order. Every record needs emb and gold_main.
Datastore build_datastore(const Corpus& train, const Tagset& ts, BuildOptions options = {});

// a.b / (|a||b|). Throws on a zero vector or mismatched widths.
double cosine_sim(std::span<const float> a, std::span<const float> b);

struct Neighbor {
  std::uint32_t entry = 0;
  double score = 0.0;
  MainLabel label;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Sorted by score descending, ties by ascending entry index.
struct NeighborList {
  std::vector<Neighbor> items;

  std::size_t effective_k() const { return items.size(); }
  // The first min(k, size) neighbors; equal to a fresh search at k.
  NeighborList prefix(std::size_t k) const;

  friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

// Exact top-min(k, |ds|) search under cosine similarity. The query is
// normalized and scored by dot product against the stored unit vectors.
NeighborList knn_search(const Datastore& ds, std::span<const float> query, std::size_t k);

// L2-normalizes `query` in double precision. Shared by the search and by
// callers that need scores on the same footing.
std::vector<double> normalized_query(std::span<const float> query);

}  // namespace knnner
