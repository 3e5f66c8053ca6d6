#include "knnner/knnner.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "knnner/corpus_io.hpp"
#include "knnner/datastore.hpp"
#include "knnner/decode.hpp"
#include "knnner/error.hpp"
#include "knnner/eval.hpp"
#include "knnner/fileutil.hpp"
#include "knnner/knn_inference.hpp"
#include "knnner/sweep.hpp"
#include "knnner/tagset.hpp"

struct knn_tagset {
  knnner::Tagset value;
};
struct knn_corpus {
  knnner::Corpus value;
};
struct knn_datastore {
  knnner::Datastore value;
};

namespace {

thread_local std::string g_last_error;

knn_status fail(knn_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
knn_status guarded(F&& body) {
  try {
    body();
    return KNN_OK;
  } catch (const knnner::Error& e) {
    return fail(e.kind() == knnner::ErrorKind::Validation ? KNN_ERR_VALIDATION : KNN_ERR_RUNTIME,
                e.what());
  } catch (const std::bad_alloc&) {
    return fail(KNN_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(KNN_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(KNN_ERR_RUNTIME, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw knnner::validation_error(fmt::format("{} must not be null", what));
}

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

enum class FileKind { Tagset, Corpus, Datastore, Predictions, Unknown };

FileKind sniff(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw knnner::validation_error(fmt::format("cannot open '{}'", path));
  std::string first;
  std::getline(in, first);
  if (first.size() >= 4 && std::memcmp(first.data(), knnner::kDatastoreMagic, 4) == 0)
    return FileKind::Datastore;
  while (!first.empty() && (first.back() == '\r' || first.back() == ' ')) first.pop_back();
  if (first == "tagset-v1") return FileKind::Tagset;
  auto j = nlohmann::json::parse(first, nullptr, false);
  if (j.is_object()) return j.contains("entities") ? FileKind::Predictions : FileKind::Corpus;
  return FileKind::Unknown;
}

}  // namespace

extern "C" {

knn_config knn_config_default(void) {
  knnner::KnnConfig d;
  return knn_config{static_cast<uint32_t>(d.k), d.lambda, d.tau};
}

const char* knn_last_error(void) { return g_last_error.c_str(); }

const char* knn_version(void) { return "knnner 1.0.0"; }

void knn_string_free(char* s) { std::free(s); }

knn_status knn_tagset_load(const char* path, knn_tagset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new knn_tagset{knnner::Tagset::load(path)};
  });
}

void knn_tagset_free(knn_tagset* ts) { delete ts; }

size_t knn_tagset_main_label_count(const knn_tagset* ts) {
  return ts ? ts->value.main_label_count() : 0;
}

size_t knn_tagset_sub_label_count(const knn_tagset* ts) {
  return ts ? ts->value.sub_label_count() : 0;
}

knn_status knn_tagset_hash_hex(const knn_tagset* ts, char out[65]) {
  return guarded([&] {
    require(ts, "tagset");
    require(out, "out");
    auto hex = ts->value.hash_hex();
    std::memcpy(out, hex.c_str(), hex.size() + 1);
  });
}

knn_status knn_tagset_main_tag(const knn_tagset* ts, uint32_t index, char** out) {
  return guarded([&] {
    require(ts, "tagset");
    require(out, "out");
    *out = dup_string(ts->value.main_tag_of(knnner::MainLabel{index}));
  });
}

knn_status knn_corpus_read(const char* path, const knn_tagset* ts, knn_corpus** out) {
  return guarded([&] {
    require(path, "path");
    require(ts, "tagset");
    require(out, "out");
    *out = new knn_corpus{knnner::read_corpus(path, ts->value)};
  });
}

void knn_corpus_free(knn_corpus* corpus) { delete corpus; }

size_t knn_corpus_record_count(const knn_corpus* corpus) {
  return corpus ? corpus->value.records.size() : 0;
}

size_t knn_corpus_token_count(const knn_corpus* corpus) {
  return corpus ? corpus->value.token_count() : 0;
}

size_t knn_corpus_dim(const knn_corpus* corpus) { return corpus ? corpus->value.dim : 0; }

knn_status knn_datastore_build(const knn_corpus* train, const knn_tagset* ts, int exclude_outside,
                               knn_datastore** out) {
  return guarded([&] {
    require(train, "corpus");
    require(ts, "tagset");
    require(out, "out");
    knnner::BuildOptions options;
    options.exclude_outside = exclude_outside != 0;
    *out = new knn_datastore{knnner::build_datastore(train->value, ts->value, options)};
  });
}

knn_status knn_datastore_write(const knn_datastore* ds, const char* path) {
  return guarded([&] {
    require(ds, "datastore");
    require(path, "path");
    knnner::write_datastore(ds->value, path);
  });
}

knn_status knn_datastore_read(const char* path, const knn_tagset* ts, knn_datastore** out) {
  return guarded([&] {
    require(path, "path");
    require(ts, "tagset");
    require(out, "out");
    *out = new knn_datastore{knnner::read_datastore(path, ts->value)};
  });
}

void knn_datastore_free(knn_datastore* ds) { delete ds; }

size_t knn_datastore_size(const knn_datastore* ds) { return ds ? ds->value.size() : 0; }

size_t knn_datastore_dim(const knn_datastore* ds) { return ds ? ds->value.dim() : 0; }

knn_status knn_datastore_label_histogram(const knn_datastore* ds, uint64_t* counts, size_t n) {
  return guarded([&] {
    require(ds, "datastore");
    require(counts, "counts");
    auto hist = ds->value.label_histogram();
    if (n != hist.size())
      throw knnner::validation_error(
          fmt::format("histogram buffer holds {} labels, datastore has {}", n, hist.size()));
    std::copy(hist.begin(), hist.end(), counts);
  });
}

knn_status knn_datastore_search(const knn_datastore* ds, const float* query, size_t dim,
                                uint32_t k, knn_neighbor* out, size_t* out_count) {
  return guarded([&] {
    require(ds, "datastore");
    require(query, "query");
    require(out, "out");
    require(out_count, "out_count");
    auto nbrs = knnner::knn_search(ds->value, std::span<const float>(query, dim), k);
    for (std::size_t i = 0; i < nbrs.items.size(); ++i) {
      const auto& n = nbrs.items[i];
      out[i] = knn_neighbor{n.entry, n.score, n.label.value};
    }
    *out_count = nbrs.effective_k();
  });
}

knn_status knn_predict_to_file(const knn_corpus* corpus, const knn_datastore* ds,
                               const knn_tagset* ts, const knn_config* cfg, const char* out_path) {
  return guarded([&] {
    require(corpus, "corpus");
    require(ts, "tagset");
    require(cfg, "config");
    require(out_path, "out_path");
    knnner::KnnConfig config{cfg->k, cfg->lambda, cfg->tau};
    config.validate();
    std::vector<knnner::SentenceEntities> out;
    out.reserve(corpus->value.records.size());
    for (const auto& rec : corpus->value.records) {
      auto tokens = ds ? knnner::predict_tokens(rec, ds->value, config, ts->value)
                       : knnner::predict_baseline(rec, ts->value);
      out.push_back({rec.id, knnner::decode_entities(tokens, ts->value)});
    }
    knnner::write_predictions(out, ts->value, out_path);
  });
}

knn_status knn_evaluate(const knn_corpus* gold, const char* predictions_path, const knn_tagset* ts,
                        char** report_json) {
  return guarded([&] {
    require(gold, "gold corpus");
    require(predictions_path, "predictions_path");
    require(ts, "tagset");
    require(report_json, "report_json");
    std::vector<knnner::SentenceEntities> gold_sents;
    for (const auto& rec : gold->value.records)
      gold_sents.push_back(knnner::gold_entities(rec, ts->value));
    auto pred = knnner::read_predictions(predictions_path, ts->value);
    for (const auto& p : pred) {
      auto it = std::find_if(gold->value.records.begin(), gold->value.records.end(),
                             [&](const knnner::SentenceRecord& r) { return r.id == p.id; });
      if (it == gold->value.records.end()) continue;  // reported by micro_prf
      for (const auto& e : p.entities)
        if (e.end >= it->size())
          throw knnner::validation_error(fmt::format(
              "predictions: entity ({}, {}) in '{}' exceeds sentence length {}", e.start, e.end,
              p.id, it->size()));
    }
    *report_json = dup_string(knnner::micro_prf(gold_sents, pred, ts->value).to_json());
  });
}

knn_status knn_sweep(const knn_corpus* dev, const knn_datastore* ds, const knn_tagset* ts,
                     const uint32_t* ks, size_t k_count, const double* lambdas,
                     size_t lambda_count, double tau, char** csv) {
  return guarded([&] {
    require(dev, "dev corpus");
    require(ds, "datastore");
    require(ts, "tagset");
    require(csv, "csv");
    knnner::SweepGrid grid;
    if (k_count > 0) {
      require(ks, "ks");
      grid.ks.assign(ks, ks + k_count);
    }
    if (lambda_count > 0) {
      require(lambdas, "lambdas");
      grid.lambdas.assign(lambdas, lambdas + lambda_count);
    }
    grid.tau = tau;
    *csv = dup_string(knnner::run_sweep(dev->value, ds->value, grid, ts->value).to_csv());
  });
}

knn_status knn_validate_file(const char* path, const knn_tagset* ts, char** summary) {
  return guarded([&] {
    require(path, "path");
    require(summary, "summary");
    std::string text;
    switch (sniff(path)) {
      case FileKind::Tagset: {
        auto t = knnner::Tagset::load(path);
        text = fmt::format("tagset: {} main types, {} subtypes, hash {}", t.main_types().size(),
                           t.sub_types().size(), t.hash_hex());
        break;
      }
      case FileKind::Datastore: {
        auto d = knnner::deserialize_datastore(knnner::read_file(path), ts ? &ts->value : nullptr);
        text = fmt::format("datastore: {} entries, dim {}, {} labels", d.size(), d.dim(),
                           d.label_count());
        break;
      }
      case FileKind::Corpus: {
        if (!ts) throw knnner::validation_error("validating a corpus requires a tagset");
        auto c = knnner::read_corpus(path, ts->value);
        text = fmt::format("corpus: {} records, {} tokens, dim {}", c.records.size(),
                           c.token_count(), c.dim);
        break;
      }
      case FileKind::Predictions: {
        if (!ts) throw knnner::validation_error("validating predictions requires a tagset");
        auto p = knnner::read_predictions(path, ts->value);
        std::size_t entities = 0;
        for (const auto& s : p) entities += s.entities.size();
        text = fmt::format("predictions: {} sentences, {} entities", p.size(), entities);
        break;
      }
      case FileKind::Unknown:
        throw knnner::validation_error(fmt::format("'{}': unrecognized file format", path));
    }
    *summary = dup_string(text);
  });
}

}  // extern "C"
