#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace knnner {

// Index into the main BIO label space: 0 is "O", 2t+1 is "B-<type t>",
// 2t+2 is "I-<type t>".
struct MainLabel {
  std::uint32_t value = 0;

  constexpr bool is_outside() const { return value == 0; }
  constexpr bool is_begin() const { return value % 2 == 1; }
  constexpr bool is_inside() const { return value != 0 && value % 2 == 0; }
  // Only meaningful when !is_outside().
  constexpr std::uint32_t type() const { return (value - 1) / 2; }

  static constexpr MainLabel outside() { return MainLabel{0}; }
  static constexpr MainLabel begin(std::uint32_t type) { return MainLabel{2 * type + 1}; }
  static constexpr MainLabel inside(std::uint32_t type) { return MainLabel{2 * type + 2}; }

  friend constexpr auto operator<=>(MainLabel, MainLabel) = default;
};

// Index into the subtype BIO space (no "O"): 2t is "B-<sub t>", 2t+1 is
// "I-<sub t>".
struct SubLabel {
  std::uint32_t value = 0;

  constexpr bool is_begin() const { return value % 2 == 0; }
  constexpr std::uint32_t type() const { return value / 2; }

  friend constexpr auto operator<=>(SubLabel, SubLabel) = default;
};

using TagsetHash = std::array<std::uint8_t, 32>;

class Tagset {
 public:
  Tagset(std::vector<std::string> main_types, std::vector<std::string> sub_types,
         std::string version = {});

  static Tagset load(const std::filesystem::path& path);
  static Tagset parse(std::istream& in);

  const std::vector<std::string>& main_types() const { return main_types_; }
  const std::vector<std::string>& sub_types() const { return sub_types_; }
  const std::string& version() const { return version_; }

  std::size_t main_label_count() const { return 2 * main_types_.size() + 1; }
  std::size_t sub_label_count() const { return 2 * sub_types_.size(); }

  MainLabel main_index_of(std::string_view tag) const;
  std::string main_tag_of(MainLabel label) const;
  SubLabel sub_index_of(std::string_view tag) const;
  std::string sub_tag_of(SubLabel label) const;

  // Type-name lookups without the B-/I- prefix.
  std::uint32_t main_type_index(std::string_view name) const;
  std::uint32_t sub_type_index(std::string_view name) const;

  // SHA-256 over the canonical text form (version, then types in order).
  const TagsetHash& hash() const { return hash_; }
  std::string hash_hex() const;

 private:
  std::vector<std::string> main_types_;
  std::vector<std::string> sub_types_;
  std::string version_;
  std::unordered_map<std::string, std::uint32_t> main_lookup_;
  std::unordered_map<std::string, std::uint32_t> sub_lookup_;
  TagsetHash hash_{};
};

std::string to_hex(const TagsetHash& hash);

}  // namespace knnner
