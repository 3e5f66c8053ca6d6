// Command-line front end for the knnner C API.
//
//   knnner build-datastore TRAIN --tagset T --out DS [--exclude-o]
//   knnner predict CORPUS --tagset T --datastore DS --out PRED [--k --lambda --tau]
//   knnner evaluate GOLD PRED --tagset T [--out REPORT]
//   knnner sweep DEV --tagset T --datastore DS [--ks 8,16 --lambdas 0,0.5 --tau --out CSV]
//   knnner validate FILE [--tagset T]
//
// Exit codes: 0 success, 1 validation error, 2 runtime error. Every failure
// prints one line starting with "error:" on stderr.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "knnner/knnner.h"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CliError {
  int code;
  std::string message;
};

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

void check(knn_status status) {
  if (status != KNN_OK)
    throw CliError{status == KNN_ERR_VALIDATION ? kExitValidation : kExitRuntime, knn_last_error()};
}

struct TagsetDeleter {
  void operator()(knn_tagset* p) const { knn_tagset_free(p); }
};
struct CorpusDeleter {
  void operator()(knn_corpus* p) const { knn_corpus_free(p); }
};
struct DatastoreDeleter {
  void operator()(knn_datastore* p) const { knn_datastore_free(p); }
};
struct StringDeleter {
  void operator()(char* p) const { knn_string_free(p); }
};

using TagsetPtr = std::unique_ptr<knn_tagset, TagsetDeleter>;
using CorpusPtr = std::unique_ptr<knn_corpus, CorpusDeleter>;
using DatastorePtr = std::unique_ptr<knn_datastore, DatastoreDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

TagsetPtr load_tagset(const std::string& path) {
  knn_tagset* ts = nullptr;
  check(knn_tagset_load(path.c_str(), &ts));
  return TagsetPtr(ts);
}

CorpusPtr load_corpus(const std::string& path, const knn_tagset* ts) {
  knn_corpus* c = nullptr;
  check(knn_corpus_read(path.c_str(), ts, &c));
  return CorpusPtr(c);
}

DatastorePtr load_datastore(const std::string& path, const knn_tagset* ts) {
  knn_datastore* ds = nullptr;
  check(knn_datastore_read(path.c_str(), ts, &ds));
  return DatastorePtr(ds);
}

// Writes text to `path`, or stdout when path is empty.
void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::fputs(text.c_str(), stdout);
    return;
  }
  auto tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw CliError{kExitRuntime, "cannot open '" + tmp + "' for writing"};
  bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  ok = (std::fclose(f) == 0) && ok;
  if (!ok || std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw CliError{kExitRuntime, "cannot write '" + path + "'"};
  }
}

knn_config make_config(std::int64_t k, double lambda, double tau) {
  if (k < 1) throw CliError{kExitValidation, "--k must be a positive integer, got " + std::to_string(k)};
  if (k > UINT32_MAX) throw CliError{kExitValidation, "--k is too large"};
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw CliError{kExitValidation, "--lambda must lie in [0, 1]"};
  if (!(tau > 0.0)) throw CliError{kExitValidation, "--tau must be positive"};
  return knn_config{static_cast<std::uint32_t>(k), lambda, tau};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented NER inference over a token-embedding datastore", "knnner"};
  app.require_subcommand(1);
  app.set_version_flag("--version", knn_version());

  const auto defaults = knn_config_default();
  std::string tagset_path, datastore_path, out_path;
  std::int64_t k = defaults.k;
  double lambda = defaults.lambda;
  double tau = defaults.tau;

  auto* build = app.add_subcommand("build-datastore", "Build a datastore from a training corpus");
  std::string train_path;
  bool exclude_o = false;
  build->add_option("train", train_path, "Training corpus")->required();
  build->add_option("--tagset", tagset_path, "Tagset file")->required();
  build->add_option("--out", out_path, "Output datastore file")->required();
  build->add_flag("--exclude-o", exclude_o, "Leave O-labelled tokens out of the store");

  auto* predict = app.add_subcommand("predict", "Decode entities for every record of a corpus");
  std::string corpus_path;
  bool baseline_only = false;
  predict->add_option("corpus", corpus_path, "Corpus with emb and p_main")->required();
  predict->add_option("--tagset", tagset_path, "Tagset file")->required();
  predict->add_option("--datastore", datastore_path, "Datastore file");
  predict->add_option("--k", k, "Number of neighbors")->capture_default_str();
  predict->add_option("--lambda", lambda, "Weight of the base distribution")->capture_default_str();
  predict->add_option("--tau", tau, "Similarity temperature")->capture_default_str();
  predict->add_option("--out", out_path, "Output prediction file")->required();
  predict->add_flag("--baseline-only", baseline_only, "Skip retrieval; argmax of p_main");

  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold labels");
  std::string gold_path, pred_path;
  evaluate->add_option("gold", gold_path, "Gold corpus")->required();
  evaluate->add_option("predictions", pred_path, "Prediction file")->required();
  evaluate->add_option("--tagset", tagset_path, "Tagset file")->required();
  evaluate->add_option("--out", out_path, "Report file (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "Grid search over k and lambda");
  std::string dev_path;
  std::vector<std::int64_t> ks;
  std::vector<double> lambdas;
  sweep->add_option("dev", dev_path, "Dev corpus with gold labels")->required();
  sweep->add_option("--tagset", tagset_path, "Tagset file")->required();
  sweep->add_option("--datastore", datastore_path, "Datastore file")->required();
  sweep->add_option("--ks", ks, "Comma-separated k values (default 8..512)")->delimiter(',');
  sweep->add_option("--lambdas", lambdas, "Comma-separated lambdas (default 0..1 by 0.1)")
      ->delimiter(',');
  sweep->add_option("--tau", tau, "Similarity temperature")->capture_default_str();
  sweep->add_option("--out", out_path, "CSV file (default stdout)");

  auto* validate = app.add_subcommand("validate", "Check a file for format conformance");
  std::string file_path;
  validate->add_option("file", file_path, "Tagset, corpus, datastore or prediction file")->required();
  validate->add_option("--tagset", tagset_path, "Tagset file (needed for corpora/predictions)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return kExitValidation;
  }

  try {
    if (*build) {
      auto ts = load_tagset(tagset_path);
      auto train = load_corpus(train_path, ts.get());
      knn_datastore* raw = nullptr;
      check(knn_datastore_build(train.get(), ts.get(), exclude_o ? 1 : 0, &raw));
      DatastorePtr ds(raw);
      check(knn_datastore_write(ds.get(), out_path.c_str()));

      std::vector<std::uint64_t> hist(knn_tagset_main_label_count(ts.get()));
      check(knn_datastore_label_histogram(ds.get(), hist.data(), hist.size()));
      std::printf("entries: %zu\ndim: %zu\nlabel histogram:\n", knn_datastore_size(ds.get()),
                  knn_datastore_dim(ds.get()));
      for (std::uint32_t i = 0; i < hist.size(); ++i) {
        if (hist[i] == 0) continue;
        char* tag = nullptr;
        check(knn_tagset_main_tag(ts.get(), i, &tag));
        StringPtr owned(tag);
        std::printf("  %s %llu\n", tag, static_cast<unsigned long long>(hist[i]));
      }
    } else if (*predict) {
      auto cfg = make_config(k, lambda, tau);
      if (!baseline_only && datastore_path.empty())
        throw CliError{kExitValidation, "predict needs --datastore (or --baseline-only)"};
      auto ts = load_tagset(tagset_path);
      auto corpus = load_corpus(corpus_path, ts.get());
      DatastorePtr ds;
      if (!baseline_only) ds = load_datastore(datastore_path, ts.get());
      check(knn_predict_to_file(corpus.get(), ds.get(), ts.get(), &cfg, out_path.c_str()));
    } else if (*evaluate) {
      auto ts = load_tagset(tagset_path);
      auto gold = load_corpus(gold_path, ts.get());
      char* report = nullptr;
      check(knn_evaluate(gold.get(), pred_path.c_str(), ts.get(), &report));
      StringPtr owned(report);
      emit(std::string(report) + "\n", out_path);
    } else if (*sweep) {
      std::vector<std::uint32_t> k_values;
      for (auto v : ks) k_values.push_back(make_config(v, 0.0, tau).k);
      for (auto l : lambdas) make_config(1, l, tau);
      auto ts = load_tagset(tagset_path);
      auto dev = load_corpus(dev_path, ts.get());
      auto ds = load_datastore(datastore_path, ts.get());
      char* csv = nullptr;
      check(knn_sweep(dev.get(), ds.get(), ts.get(), k_values.data(), k_values.size(),
                      lambdas.data(), lambdas.size(), tau, &csv));
      StringPtr owned(csv);
      emit(csv, out_path);
    } else if (*validate) {
      TagsetPtr ts;
      if (!tagset_path.empty()) ts = load_tagset(tagset_path);
      char* summary = nullptr;
      check(knn_validate_file(file_path.c_str(), ts.get(), &summary));
      StringPtr owned(summary);
      std::printf("ok: %s\n", summary);
    }
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.message).c_str());
    return e.code;
  }
  return 0;
}
