#include "knnner/tagset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "knnner/error.hpp"

namespace knnner {
namespace {

constexpr std::string_view kHeader = "tagset-v1";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

void check_type_name(const std::string& name) {
  if (name.empty()) throw validation_error("tagset: empty type name");
  if (std::any_of(name.begin(), name.end(),
                  [](unsigned char c) { return std::isspace(c) != 0; }))
    throw validation_error(fmt::format("tagset: type name '{}' contains whitespace", name));
  if (name.rfind("B-", 0) == 0 || name.rfind("I-", 0) == 0)
    throw validation_error(fmt::format("tagset: type name '{}' collides with a BIO prefix", name));
}

std::unordered_map<std::string, std::uint32_t> build_lookup(const std::vector<std::string>& names,
                                                            const char* section) {
  std::unordered_map<std::string, std::uint32_t> lookup;
  for (std::uint32_t i = 0; i < names.size(); ++i) {
    check_type_name(names[i]);
    if (!lookup.emplace(names[i], i).second)
      throw validation_error(fmt::format("tagset: duplicate {} type '{}'", section, names[i]));
  }
  return lookup;
}

TagsetHash sha256(const std::string& text) {
  TagsetHash out{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size())
    throw runtime_error("tagset: SHA-256 computation failed");
  return out;
}

// Splits "B-X"/"I-X" into (is_begin, X); anything else is malformed.
std::pair<bool, std::string_view> split_bio(std::string_view tag) {
  if (tag.size() < 3 || tag[1] != '-' || (tag[0] != 'B' && tag[0] != 'I'))
    throw validation_error(fmt::format("malformed BIO tag '{}'", tag));
  return {tag[0] == 'B', tag.substr(2)};
}

}  // namespace

Tagset::Tagset(std::vector<std::string> main_types, std::vector<std::string> sub_types,
               std::string version)
    : main_types_(std::move(main_types)),
      sub_types_(std::move(sub_types)),
      version_(std::move(version)) {
  if (main_types_.empty()) throw validation_error("tagset: empty main type list");
  main_lookup_ = build_lookup(main_types_, "main");
  sub_lookup_ = build_lookup(sub_types_, "sub");

  std::string canonical = fmt::format("{}\nversion:{}\nmain:\n", kHeader, version_);
  for (const auto& t : main_types_) canonical += t + "\n";
  canonical += "sub:\n";
  for (const auto& t : sub_types_) canonical += t + "\n";
  hash_ = sha256(canonical);
}

Tagset Tagset::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error(fmt::format("tagset: cannot open '{}'", path.string()));
  return parse(in);
}

Tagset Tagset::parse(std::istream& in) {
  enum class Section { None, Main, Sub } section = Section::None;
  std::vector<std::string> main_types;
  std::vector<std::string> sub_types;
  std::string version;
  bool seen_main = false;
  bool seen_sub = false;

  std::string raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (!header_seen) {
      if (line != kHeader)
        throw validation_error(fmt::format("tagset: line 1: expected '{}' header", kHeader));
      header_seen = true;
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    if (line == "main:") {
      if (seen_main) throw validation_error(fmt::format("tagset: line {}: repeated 'main:'", line_no));
      seen_main = true;
      section = Section::Main;
    } else if (line == "sub:") {
      if (seen_sub) throw validation_error(fmt::format("tagset: line {}: repeated 'sub:'", line_no));
      seen_sub = true;
      section = Section::Sub;
    } else if (line.rfind("version:", 0) == 0 && section == Section::None) {
      version = std::string(trim(line.substr(8)));
    } else if (section == Section::Main) {
      main_types.emplace_back(line);
    } else if (section == Section::Sub) {
      sub_types.emplace_back(line);
    } else {
      throw validation_error(
          fmt::format("tagset: line {}: type name outside a 'main:'/'sub:' section", line_no));
    }
  }
  if (!header_seen) throw validation_error("tagset: empty file");
  if (!seen_main) throw validation_error("tagset: missing 'main:' section");
  return Tagset(std::move(main_types), std::move(sub_types), std::move(version));
}

std::uint32_t Tagset::main_type_index(std::string_view name) const {
  auto it = main_lookup_.find(std::string(name));
  if (it == main_lookup_.end()) throw validation_error(fmt::format("unknown main type '{}'", name));
  return it->second;
}

std::uint32_t Tagset::sub_type_index(std::string_view name) const {
  auto it = sub_lookup_.find(std::string(name));
  if (it == sub_lookup_.end()) throw validation_error(fmt::format("unknown subtype '{}'", name));
  return it->second;
}

MainLabel Tagset::main_index_of(std::string_view tag) const {
  if (tag == "O") return MainLabel::outside();
  auto [begin, name] = split_bio(tag);
  auto type = main_type_index(name);
  return begin ? MainLabel::begin(type) : MainLabel::inside(type);
}

std::string Tagset::main_tag_of(MainLabel label) const {
  if (label.value >= main_label_count())
    throw validation_error(fmt::format("main label index {} out of range", label.value));
  if (label.is_outside()) return "O";
  return (label.is_begin() ? "B-" : "I-") + main_types_[label.type()];
}

SubLabel Tagset::sub_index_of(std::string_view tag) const {
  auto [begin, name] = split_bio(tag);
  auto type = sub_type_index(name);
  return SubLabel{2 * type + (begin ? 0u : 1u)};
}

std::string Tagset::sub_tag_of(SubLabel label) const {
  if (label.value >= sub_label_count())
    throw validation_error(fmt::format("sub label index {} out of range", label.value));
  return (label.is_begin() ? "B-" : "I-") + sub_types_[label.type()];
}

std::string Tagset::hash_hex() const { return to_hex(hash_); }

std::string to_hex(const TagsetHash& hash) {
  std::string out;
  out.reserve(2 * hash.size());
  for (auto b : hash) out += fmt::format("{:02x}", b);
  return out;
}

}  // namespace knnner
