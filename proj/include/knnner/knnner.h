/*
 * C interface to the knnner engine: retrieval-augmented NER inference over a
 * cached token-embedding datastore.
 *
 * All objects are opaque handles created by a load, read or build call and
 * released with the matching free function. Every fallible call returns a
 * knn_status; on failure, knn_last_error() describes the problem. The error
 * text is per-thread and stays valid until the next failing call on that
 * thread. Strings returned through char** must be released with
 * knn_string_free.
 */
#ifndef KNNNER_KNNNER_H
#define KNNNER_KNNNER_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define KNN_API __declspec(dllexport)
#else
#define KNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum knn_status {
  KNN_OK = 0,
  KNN_ERR_VALIDATION = 1, /* bad input file, flag or argument */
  KNN_ERR_RUNTIME = 2     /* I/O or other environmental failure */
} knn_status;

typedef struct knn_tagset knn_tagset;
typedef struct knn_corpus knn_corpus;
typedef struct knn_datastore knn_datastore;

typedef struct knn_config {
  uint32_t k;
  double lambda;
  double tau;
} knn_config;

typedef struct knn_neighbor {
  uint32_t entry;
  double score;
  uint32_t label;
} knn_neighbor;

/* Defaults: k=512, lambda=0.5, tau=1. */
KNN_API knn_config knn_config_default(void);

KNN_API const char* knn_last_error(void);
KNN_API const char* knn_version(void);
KNN_API void knn_string_free(char* s);

/* Tagset */
KNN_API knn_status knn_tagset_load(const char* path, knn_tagset** out);
KNN_API void knn_tagset_free(knn_tagset* ts);
KNN_API size_t knn_tagset_main_label_count(const knn_tagset* ts);
KNN_API size_t knn_tagset_sub_label_count(const knn_tagset* ts);
/* Writes 64 hex characters plus a terminating NUL. */
KNN_API knn_status knn_tagset_hash_hex(const knn_tagset* ts, char out[65]);
/* Tag string for a main label index, e.g. "B-ORG". */
KNN_API knn_status knn_tagset_main_tag(const knn_tagset* ts, uint32_t index, char** out);

/* Corpus (interchange format) */
KNN_API knn_status knn_corpus_read(const char* path, const knn_tagset* ts, knn_corpus** out);
KNN_API void knn_corpus_free(knn_corpus* corpus);
KNN_API size_t knn_corpus_record_count(const knn_corpus* corpus);
KNN_API size_t knn_corpus_token_count(const knn_corpus* corpus);
KNN_API size_t knn_corpus_dim(const knn_corpus* corpus);

/* Datastore */
KNN_API knn_status knn_datastore_build(const knn_corpus* train, const knn_tagset* ts,
                                       int exclude_outside, knn_datastore** out);
KNN_API knn_status knn_datastore_write(const knn_datastore* ds, const char* path);
KNN_API knn_status knn_datastore_read(const char* path, const knn_tagset* ts,
                                      knn_datastore** out);
KNN_API void knn_datastore_free(knn_datastore* ds);
KNN_API size_t knn_datastore_size(const knn_datastore* ds);
KNN_API size_t knn_datastore_dim(const knn_datastore* ds);
/* Fills counts[0..n) with per-label entry counts; n must equal the main label count. */
KNN_API knn_status knn_datastore_label_histogram(const knn_datastore* ds, uint64_t* counts,
                                                 size_t n);
/* Top-min(k, size) neighbors of `query` (dim floats). `out` must hold k items;
 * *out_count receives the effective k. */
KNN_API knn_status knn_datastore_search(const knn_datastore* ds, const float* query, size_t dim,
                                        uint32_t k, knn_neighbor* out, size_t* out_count);

/* Runs inference over every record and writes the prediction file. A null
 * datastore decodes from the base distribution alone. */
KNN_API knn_status knn_predict_to_file(const knn_corpus* corpus, const knn_datastore* ds,
                                       const knn_tagset* ts, const knn_config* cfg,
                                       const char* out_path);

/* Scores a prediction file against a gold corpus; *report_json receives the
 * report object. */
KNN_API knn_status knn_evaluate(const knn_corpus* gold, const char* predictions_path,
                                const knn_tagset* ts, char** report_json);

/* Grid search over (k, lambda); *csv receives the sensitivity table. */
KNN_API knn_status knn_sweep(const knn_corpus* dev, const knn_datastore* ds,
                             const knn_tagset* ts, const uint32_t* ks, size_t k_count,
                             const double* lambdas, size_t lambda_count, double tau, char** csv);

/* Format conformance check. Detects tagset, corpus, datastore or prediction
 * files. Corpus and prediction files need a tagset; for a datastore the
 * tagset is optional and enables the hash check. *summary receives a
 * one-line description of the file. */
KNN_API knn_status knn_validate_file(const char* path, const knn_tagset* ts, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* KNNNER_KNNNER_H */
