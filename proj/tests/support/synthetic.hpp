#pragma once

// Deterministic synthetic corpora for tests: label-clustered embeddings and
// a controllably noisy base distribution.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "knnner/corpus_io.hpp"
#include "knnner/matrix.hpp"
#include "knnner/tagset.hpp"

namespace knnner::testing {

// Small tagset used by most unit tests: 4 main types (9 labels), 3 subtypes.
Tagset small_tagset();

// Path of the 21 x 31 tagset shipped in data/.
std::string full_tagset_path();

// One random unit-norm center per main label.
Matrix<float> make_centers(std::size_t label_count, std::size_t dim, std::uint64_t seed);

struct SyntheticOptions {
  std::size_t sentences = 50;
  std::size_t min_len = 4;
  std::size_t max_len = 12;
  double sigma = 0.05;         // per-coordinate embedding noise around the label center
  double entity_prob = 0.3;    // chance an O position starts an entity instead
  std::size_t max_entity_len = 3;
  double preferred_mass = 0.55;  // p_main mass on the label the base model prefers
  double flip_rate = 0.0;        // fraction of tokens where that preferred label is wrong
  double sub_prob = 0.4;         // chance an entity carries subtypes
  std::uint64_t seed = 1;
  std::string id_prefix = "s";
};

// Gold BIO sequences with embeddings drawn around `centers`. Each p_main row
// puts `preferred_mass` on one label and the rest on a confusion label; for a
// `flip_rate` fraction of tokens the two are swapped so the base model errs.
Corpus make_corpus(const Tagset& ts, const Matrix<float>& centers, const SyntheticOptions& opt);

// Random vector with i.i.d. normal coordinates.
std::vector<float> random_vector(std::size_t dim, std::uint64_t seed);

}  // namespace knnner::testing
