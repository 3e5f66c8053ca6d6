#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "knnner/datastore.hpp"
#include "knnner/matrix.hpp"
#include "knnner/tagset.hpp"

namespace knnner {

// One sentence of the interchange corpus. Gold tags are stored already
// resolved against the tagset.
struct SentenceRecord {
  std::string id;
  std::vector<std::string> tokens;
  std::optional<std::vector<MainLabel>> gold_main;
  std::optional<std::vector<std::vector<SubLabel>>> gold_sub;
  std::optional<Matrix<float>> emb;       // m x dim
  std::optional<Matrix<double>> p_main;   // m x main_label_count, rows sum to 1
  std::optional<Matrix<double>> p_sub;    // m x sub_label_count, entries in [0,1]

  std::size_t size() const { return tokens.size(); }
};

struct Corpus {
  std::size_t dim = 0;
  std::string tagset_hash;  // lowercase hex SHA-256
  std::vector<SentenceRecord> records;

  std::size_t token_count() const;
};

inline constexpr double kProbabilityRowTolerance = 1e-4;

// Streaming single-pass reader. Every record is validated against the
// tagset and header; failures name the line (and record/token when known).
Corpus read_corpus(const std::filesystem::path& path, const Tagset& ts);
Corpus read_corpus(std::istream& in, const Tagset& ts);

// Inverse of read_corpus. Used to emit synthetic fixtures.
std::string format_corpus(const Corpus& corpus, const Tagset& ts);
void write_corpus(const Corpus& corpus, const Tagset& ts, const std::filesystem::path& path);

// Throws a validation error naming the record when `field` is absent.
void require_field(const SentenceRecord& rec, bool present, const char* field);

// Datastore binary layout, little-endian:
//   "KNND" | u32 version=1 | u32 dim | u32 label_count | u64 count |
//   32-byte tagset hash | count x (dim x f32 vector, u32 label)
inline constexpr char kDatastoreMagic[4] = {'K', 'N', 'N', 'D'};
inline constexpr std::uint32_t kDatastoreVersion = 1;

std::string serialize_datastore(const Datastore& ds);
// `expected` is the tagset the caller runs under; a null pointer skips the
// hash check (format-only validation).
Datastore deserialize_datastore(std::string_view bytes, const Tagset* expected);

void write_datastore(const Datastore& ds, const std::filesystem::path& path);
Datastore read_datastore(const std::filesystem::path& path, const Tagset& ts);

}  // namespace knnner
