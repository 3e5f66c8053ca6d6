#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "knnner/corpus_io.hpp"
#include "knnner/knn_inference.hpp"
#include "knnner/tagset.hpp"

namespace knnner {

// (start, end, main type, subtype set); start and end are inclusive token
// indices. Types are indices into the tagset's main/sub type lists.
struct EntityTuple {
  std::uint32_t start = 0;
  std::uint32_t end = 0;
  std::uint32_t main_type = 0;
  std::vector<std::uint32_t> sub_types;  // sorted, unique

  friend bool operator==(const EntityTuple&, const EntityTuple&) = default;
};

// Flat BIO decoding. B-X opens an X entity, I-X extends an open X entity,
// anything else closes it. A stray I-X (no open X) opens a new X entity.
// Subtypes are the union of subtype types active anywhere in the span.
std::vector<EntityTuple> decode_entities(std::span<const MainLabel> main_labels,
                                         std::span<const std::vector<SubLabel>> sub_tags,
                                         const Tagset& ts);

std::vector<EntityTuple> decode_entities(std::span<const TokenPrediction> predictions,
                                         const Tagset& ts);

// Inverse direction: B-/I- labels for each entity, O elsewhere.
std::vector<MainLabel> encode_entities(std::span<const EntityTuple> entities, std::size_t length);

// Entities for one sentence, keyed by record id.
struct SentenceEntities {
  std::string id;
  std::vector<EntityTuple> entities;

  friend bool operator==(const SentenceEntities&, const SentenceEntities&) = default;
};

// Gold entities decoded from a record's gold_main/gold_sub.
SentenceEntities gold_entities(const SentenceRecord& rec, const Tagset& ts);

// Prediction file: one JSON object per line,
//   {"id":..., "entities":[{"s":..,"e":..,"main":..,"subs":[..]}]}
std::string format_predictions(std::span<const SentenceEntities> sentences, const Tagset& ts);
void write_predictions(std::span<const SentenceEntities> sentences, const Tagset& ts,
                       const std::filesystem::path& path);
std::vector<SentenceEntities> read_predictions(const std::filesystem::path& path, const Tagset& ts);
std::vector<SentenceEntities> parse_predictions(std::istream& in, const Tagset& ts);

}  // namespace knnner
