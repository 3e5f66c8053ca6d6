#include "knnner/corpus_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "knnner/error.hpp"
#include "knnner/fileutil.hpp"

static_assert(std::endian::native == std::endian::little,
              "datastore serialization assumes a little-endian host");

namespace knnner {
namespace {

using nlohmann::json;

constexpr std::string_view kCorpusFormat = "knnseq-corpus";
constexpr int kCorpusVersion = 1;

class LineError {
 public:
  explicit LineError(std::size_t line) : line_(line) {}
  void set_record(std::string id) { record_ = std::move(id); }

  template <typename... Args>
  [[noreturn]] void fail(fmt::format_string<Args...> f, Args&&... args) const {
    auto msg = fmt::format(f, std::forward<Args>(args)...);
    if (record_.empty()) throw validation_error(fmt::format("corpus line {}: {}", line_, msg));
    throw validation_error(fmt::format("corpus line {}: record '{}': {}", line_, record_, msg));
  }

 private:
  std::size_t line_;
  std::string record_;
};

void parse_header(const json& h, const Tagset& ts, Corpus& corpus, const LineError& err) {
  if (!h.is_object()) err.fail("header is not a JSON object");
  static const std::unordered_set<std::string> kKeys = {"format", "version", "dim", "tagset_hash"};
  for (const auto& [key, _] : h.items())
    if (!kKeys.count(key)) err.fail("unknown header field '{}'", key);

  auto fmt_it = h.find("format");
  if (fmt_it == h.end() || !fmt_it->is_string() || fmt_it->get<std::string>() != kCorpusFormat)
    err.fail("header field 'format' must be \"{}\"", kCorpusFormat);
  auto ver_it = h.find("version");
  if (ver_it == h.end() || !ver_it->is_number_integer() || ver_it->get<long long>() != kCorpusVersion)
    err.fail("header field 'version' must be {}", kCorpusVersion);
  auto dim_it = h.find("dim");
  if (dim_it == h.end() || !dim_it->is_number_integer() || dim_it->get<long long>() < 1)
    err.fail("header field 'dim' must be a positive integer");
  auto hash_it = h.find("tagset_hash");
  if (hash_it == h.end() || !hash_it->is_string())
    err.fail("header field 'tagset_hash' must be a string");
  corpus.dim = dim_it->get<std::size_t>();
  corpus.tagset_hash = hash_it->get<std::string>();
  if (corpus.tagset_hash != ts.hash_hex())
    err.fail("header field 'tagset_hash' {} does not match tagset {}", corpus.tagset_hash,
             ts.hash_hex());
}

const json& expect_rows(const json& value, const char* field, std::size_t m, const LineError& err) {
  if (!value.is_array()) err.fail("'{}' must be an array", field);
  if (value.size() != m) err.fail("'{}' has {} rows, expected {} (one per token)", field, value.size(), m);
  return value;
}

template <typename T>
Matrix<T> parse_matrix(const json& value, const char* field, std::size_t m, std::size_t width,
                       const char* width_name, const LineError& err) {
  expect_rows(value, field, m, err);
  Matrix<T> out(m, width);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = value[i];
    if (!row.is_array()) err.fail("'{}' row {} is not an array", field, i);
    if (row.size() != width)
      err.fail("dimension mismatch: '{}' row {} has width {}, expected {} {}", field, i, row.size(),
               width_name, width);
    for (std::size_t j = 0; j < width; ++j) {
      if (!row[j].is_number()) err.fail("'{}' row {} column {} is not a number", field, i, j);
      double v = row[j].get<double>();
      if (!std::isfinite(v)) err.fail("'{}' row {} column {} is not finite", field, i, j);
      out(i, j) = static_cast<T>(v);
    }
  }
  return out;
}

SentenceRecord parse_record(const json& r, const Tagset& ts, std::size_t dim, LineError& err) {
  if (!r.is_object()) err.fail("record is not a JSON object");
  static const std::unordered_set<std::string> kKeys = {"id",  "tokens", "gold_main", "gold_sub",
                                                        "emb", "p_main", "p_sub"};
  auto id_it = r.find("id");
  if (id_it == r.end() || !id_it->is_string() || id_it->get<std::string>().empty())
    err.fail("missing or empty 'id'");
  SentenceRecord rec;
  rec.id = id_it->get<std::string>();
  err.set_record(rec.id);
  for (const auto& [key, _] : r.items())
    if (!kKeys.count(key)) err.fail("unknown field '{}'", key);

  auto tok_it = r.find("tokens");
  if (tok_it == r.end() || !tok_it->is_array()) err.fail("missing 'tokens' array");
  if (tok_it->empty()) err.fail("'tokens' is empty");
  for (const auto& t : *tok_it) {
    if (!t.is_string()) err.fail("'tokens' entries must be strings");
    rec.tokens.push_back(t.get<std::string>());
  }
  const std::size_t m = rec.tokens.size();

  if (auto it = r.find("gold_main"); it != r.end()) {
    expect_rows(*it, "gold_main", m, err);
    std::vector<MainLabel> labels;
    labels.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      if (!(*it)[i].is_string()) err.fail("'gold_main' token {} is not a string", i);
      try {
        labels.push_back(ts.main_index_of((*it)[i].get<std::string>()));
      } catch (const Error& e) {
        err.fail("'gold_main' token {}: {}", i, e.what());
      }
    }
    rec.gold_main = std::move(labels);
  }

  if (auto it = r.find("gold_sub"); it != r.end()) {
    expect_rows(*it, "gold_sub", m, err);
    std::vector<std::vector<SubLabel>> sets(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& cell = (*it)[i];
      if (!cell.is_array()) err.fail("'gold_sub' token {} is not an array", i);
      for (const auto& tag : cell) {
        if (!tag.is_string()) err.fail("'gold_sub' token {} has a non-string tag", i);
        try {
          sets[i].push_back(ts.sub_index_of(tag.get<std::string>()));
        } catch (const Error& e) {
          err.fail("'gold_sub' token {}: {}", i, e.what());
        }
      }
      std::sort(sets[i].begin(), sets[i].end());
      sets[i].erase(std::unique(sets[i].begin(), sets[i].end()), sets[i].end());
    }
    rec.gold_sub = std::move(sets);
  }

  if (auto it = r.find("emb"); it != r.end())
    rec.emb = parse_matrix<float>(*it, "emb", m, dim, "dim", err);

  if (auto it = r.find("p_main"); it != r.end()) {
    auto p = parse_matrix<double>(*it, "p_main", m, ts.main_label_count(), "main label count", err);
    for (std::size_t i = 0; i < m; ++i) {
      auto row = p.row(i);
      double sum = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] < 0.0) err.fail("p_main token {} has negative entry at label {}", i, j);
        sum += row[j];
      }
      if (std::abs(sum - 1.0) > kProbabilityRowTolerance)
        err.fail("p_main row at token {} sums to {}, not 1 within {}", i, sum,
                 kProbabilityRowTolerance);
      for (auto& v : row) v /= sum;
    }
    rec.p_main = std::move(p);
  }

  if (auto it = r.find("p_sub"); it != r.end()) {
    auto p = parse_matrix<double>(*it, "p_sub", m, ts.sub_label_count(), "sub label count", err);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j)
        if (p(i, j) < 0.0 || p(i, j) > 1.0)
          err.fail("p_sub token {} label {} value {} outside [0,1]", i, j, p(i, j));
    rec.p_sub = std::move(p);
  }
  return rec;
}

template <typename T>
void append_pod(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T read(const char* what) {
    T value;
    take(&value, sizeof(T), what);
    return value;
  }
  void take(void* dst, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw validation_error(fmt::format("datastore: truncated file while reading {}", what));
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.size();
  return n;
}

Corpus read_corpus(const std::filesystem::path& path, const Tagset& ts) {
  std::ifstream in(path);
  if (!in) throw validation_error(fmt::format("cannot open corpus '{}'", path.string()));
  return read_corpus(in, ts);
}

Corpus read_corpus(std::istream& in, const Tagset& ts) {
  Corpus corpus;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    LineError err(line_no);
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      if (!header) err.fail("missing header");
      continue;
    }
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      err.fail("malformed JSON: {}", e.what());
    }
    if (!header) {
      parse_header(value, ts, corpus, err);
      header = true;
      continue;
    }
    auto rec = parse_record(value, ts, corpus.dim, err);
    if (!ids.insert(rec.id).second) err.fail("duplicate record id");
    corpus.records.push_back(std::move(rec));
  }
  if (!header) throw validation_error("corpus: empty file (missing header)");
  return corpus;
}

std::string format_corpus(const Corpus& corpus, const Tagset& ts) {
  std::string out;
  json header = {{"format", kCorpusFormat},
                 {"version", kCorpusVersion},
                 {"dim", corpus.dim},
                 {"tagset_hash", corpus.tagset_hash}};
  out += header.dump() + "\n";
  for (const auto& rec : corpus.records) {
    json r = {{"id", rec.id}, {"tokens", rec.tokens}};
    if (rec.gold_main) {
      json tags = json::array();
      for (auto l : *rec.gold_main) tags.push_back(ts.main_tag_of(l));
      r["gold_main"] = std::move(tags);
    }
    if (rec.gold_sub) {
      json sets = json::array();
      for (const auto& set : *rec.gold_sub) {
        json tags = json::array();
        for (auto l : set) tags.push_back(ts.sub_tag_of(l));
        sets.push_back(std::move(tags));
      }
      r["gold_sub"] = std::move(sets);
    }
    auto rows = [](const auto& m) {
      json a = json::array();
      for (std::size_t i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (auto v : m.row(i)) row.push_back(static_cast<double>(v));
        a.push_back(std::move(row));
      }
      return a;
    };
    if (rec.emb) r["emb"] = rows(*rec.emb);
    if (rec.p_main) r["p_main"] = rows(*rec.p_main);
    if (rec.p_sub) r["p_sub"] = rows(*rec.p_sub);
    out += r.dump() + "\n";
  }
  return out;
}

void write_corpus(const Corpus& corpus, const Tagset& ts, const std::filesystem::path& path) {
  write_file_atomic(path, format_corpus(corpus, ts));
}

void require_field(const SentenceRecord& rec, bool present, const char* field) {
  if (!present) throw validation_error(fmt::format("record '{}': missing field '{}'", rec.id, field));
}

std::string serialize_datastore(const Datastore& ds) {
  if (ds.empty()) throw validation_error("datastore: refusing to write an empty datastore");
  std::string out;
  out.reserve(4 + 4 + 4 + 4 + 8 + 32 + ds.size() * (ds.dim() * 4 + 4));
  out.append(kDatastoreMagic, 4);
  append_pod<std::uint32_t>(out, kDatastoreVersion);
  append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ds.dim()));
  append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ds.label_count()));
  append_pod<std::uint64_t>(out, ds.size());
  out.append(reinterpret_cast<const char*>(ds.tagset_hash().data()), ds.tagset_hash().size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto v = ds.vector(i);
    out.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
    append_pod<std::uint32_t>(out, ds.label(i).value);
  }
  return out;
}

Datastore deserialize_datastore(std::string_view bytes, const Tagset* expected) {
  ByteReader in(bytes);
  char magic[4];
  in.take(magic, 4, "magic");
  if (std::memcmp(magic, kDatastoreMagic, 4) != 0)
    throw validation_error(fmt::format("datastore: bad magic '{}'", std::string_view(magic, 4)));
  auto version = in.read<std::uint32_t>("version");
  if (version != kDatastoreVersion)
    throw validation_error(
        fmt::format("datastore: version mismatch (file {}, supported {})", version, kDatastoreVersion));
  auto dim = in.read<std::uint32_t>("dim");
  auto label_count = in.read<std::uint32_t>("label count");
  auto count = in.read<std::uint64_t>("entry count");
  TagsetHash hash;
  in.take(hash.data(), hash.size(), "tagset hash");
  if (dim == 0) throw validation_error("datastore: dim is 0");
  if (expected) {
    if (hash != expected->hash())
      throw validation_error(fmt::format("datastore: tagset hash mismatch (file {}, tagset {})",
                                         to_hex(hash), expected->hash_hex()));
    if (label_count != expected->main_label_count())
      throw validation_error(fmt::format("datastore: label count {} does not match tagset ({})",
                                         label_count, expected->main_label_count()));
  }
  const std::uint64_t record_bytes = std::uint64_t{dim} * 4 + 4;
  if (count > in.remaining() / record_bytes)
    throw validation_error(fmt::format("datastore: truncated file ({} entries declared)", count));
  if (in.remaining() != count * record_bytes)
    throw validation_error("datastore: trailing bytes after the last entry");

  std::vector<float> vectors(count * dim);
  std::vector<MainLabel> labels(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    in.take(vectors.data() + i * dim, std::size_t{dim} * 4, "vector");
    labels[i] = MainLabel{in.read<std::uint32_t>("label")};
  }
  return Datastore::from_normalized(dim, label_count, hash, std::move(vectors), std::move(labels));
}

void write_datastore(const Datastore& ds, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_datastore(ds));
}

Datastore read_datastore(const std::filesystem::path& path, const Tagset& ts) {
  return deserialize_datastore(read_file(path), &ts);
}

}  // namespace knnner
