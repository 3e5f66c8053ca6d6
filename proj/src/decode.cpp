#include "knnner/decode.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "knnner/error.hpp"
#include "knnner/fileutil.hpp"

namespace knnner {

std::vector<EntityTuple> decode_entities(std::span<const MainLabel> main_labels,
                                         std::span<const std::vector<SubLabel>> sub_tags,
                                         const Tagset& ts) {
  if (!sub_tags.empty() && sub_tags.size() != main_labels.size())
    throw validation_error(fmt::format("decode: {} subtype sets for {} tokens", sub_tags.size(),
                                       main_labels.size()));
  std::vector<EntityTuple> out;
  std::optional<EntityTuple> open;

  auto close = [&] {
    if (!open) return;
    auto& subs = open->sub_types;
    if (!sub_tags.empty()) {
      for (auto i = open->start; i <= open->end; ++i)
        for (auto s : sub_tags[i]) subs.push_back(s.type());
      std::sort(subs.begin(), subs.end());
      subs.erase(std::unique(subs.begin(), subs.end()), subs.end());
    }
    out.push_back(std::move(*open));
    open.reset();
  };

  for (std::uint32_t i = 0; i < main_labels.size(); ++i) {
    auto label = main_labels[i];
    if (label.value >= ts.main_label_count())
      throw validation_error(fmt::format("decode: label {} outside the tagset", label.value));
    if (label.is_outside()) {
      close();
    } else if (label.is_inside() && open && open->main_type == label.type()) {
      open->end = i;
    } else {
      close();
      open = EntityTuple{i, i, label.type(), {}};
    }
  }
  close();
  return out;
}

std::vector<EntityTuple> decode_entities(std::span<const TokenPrediction> predictions,
                                         const Tagset& ts) {
  std::vector<MainLabel> mains;
  std::vector<std::vector<SubLabel>> subs;
  mains.reserve(predictions.size());
  subs.reserve(predictions.size());
  for (const auto& p : predictions) {
    mains.push_back(p.main);
    subs.push_back(p.subs);
  }
  return decode_entities(mains, subs, ts);
}

std::vector<MainLabel> encode_entities(std::span<const EntityTuple> entities, std::size_t length) {
  std::vector<MainLabel> labels(length, MainLabel::outside());
  for (const auto& e : entities) {
    if (e.start > e.end || e.end >= length)
      throw validation_error(fmt::format("encode: entity ({}, {}) outside sentence of length {}",
                                         e.start, e.end, length));
    labels[e.start] = MainLabel::begin(e.main_type);
    for (auto i = e.start + 1; i <= e.end; ++i) labels[i] = MainLabel::inside(e.main_type);
  }
  return labels;
}

SentenceEntities gold_entities(const SentenceRecord& rec, const Tagset& ts) {
  require_field(rec, rec.gold_main.has_value(), "gold_main");
  std::span<const std::vector<SubLabel>> subs;
  if (rec.gold_sub) subs = *rec.gold_sub;
  return {rec.id, decode_entities(*rec.gold_main, subs, ts)};
}

std::string format_predictions(std::span<const SentenceEntities> sentences, const Tagset& ts) {
  using nlohmann::json;
  std::string out;
  for (const auto& sent : sentences) {
    json entities = json::array();
    for (const auto& e : sent.entities) {
      json subs = json::array();
      for (auto s : e.sub_types) subs.push_back(ts.sub_types().at(s));
      entities.push_back(
          {{"s", e.start}, {"e", e.end}, {"main", ts.main_types().at(e.main_type)}, {"subs", subs}});
    }
    json line = {{"id", sent.id}, {"entities", std::move(entities)}};
    out += line.dump() + "\n";
  }
  return out;
}

void write_predictions(std::span<const SentenceEntities> sentences, const Tagset& ts,
                       const std::filesystem::path& path) {
  write_file_atomic(path, format_predictions(sentences, ts));
}

std::vector<SentenceEntities> parse_predictions(std::istream& in, const Tagset& ts) {
  using nlohmann::json;
  std::vector<SentenceEntities> out;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fail = [&](const std::string& msg) -> void {
      throw validation_error(fmt::format("predictions line {}: {}", line_no, msg));
    };
    json value;
    try {
      value = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(fmt::format("malformed JSON: {}", e.what()));
    }
    if (!value.is_object() || !value.contains("id") || !value["id"].is_string())
      fail("missing string 'id'");
    if (!value.contains("entities") || !value["entities"].is_array())
      fail("missing 'entities' array");
    SentenceEntities sent{value["id"].get<std::string>(), {}};
    if (!ids.insert(sent.id).second) fail(fmt::format("duplicate id '{}'", sent.id));
    for (const auto& e : value["entities"]) {
      if (!e.is_object() || !e.contains("s") || !e.contains("e") || !e.contains("main") ||
          !e["s"].is_number_unsigned() || !e["e"].is_number_unsigned() || !e["main"].is_string())
        fail("entity needs unsigned 's', 'e' and string 'main'");
      EntityTuple t;
      t.start = e["s"].get<std::uint32_t>();
      t.end = e["e"].get<std::uint32_t>();
      if (t.start > t.end) fail(fmt::format("entity start {} after end {}", t.start, t.end));
      try {
        t.main_type = ts.main_type_index(e["main"].get<std::string>());
        if (e.contains("subs")) {
          if (!e["subs"].is_array()) fail("'subs' must be an array");
          for (const auto& s : e["subs"]) {
            if (!s.is_string()) fail("'subs' entries must be strings");
            t.sub_types.push_back(ts.sub_type_index(s.get<std::string>()));
          }
        }
      } catch (const Error& err) {
        fail(err.what());
      }
      std::sort(t.sub_types.begin(), t.sub_types.end());
      t.sub_types.erase(std::unique(t.sub_types.begin(), t.sub_types.end()), t.sub_types.end());
      if (!sent.entities.empty() && sent.entities.back().end >= t.start)
        fail(fmt::format("entities in '{}' overlap or are out of order", sent.id));
      sent.entities.push_back(std::move(t));
    }
    out.push_back(std::move(sent));
  }
  return out;
}

std::vector<SentenceEntities> read_predictions(const std::filesystem::path& path, const Tagset& ts) {
  std::ifstream in(path);
  if (!in) throw validation_error(fmt::format("cannot open predictions '{}'", path.string()));
  return parse_predictions(in, ts);
}

}  // namespace knnner
