#include "knnner/eval.hpp"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "knnner/error.hpp"

namespace knnner {
namespace {

// (start, end, is_subtype, type index)
using Instance = std::tuple<std::uint32_t, std::uint32_t, bool, std::uint32_t>;

std::set<Instance> expand(const std::vector<EntityTuple>& entities) {
  std::set<Instance> out;
  for (const auto& e : entities) {
    out.emplace(e.start, e.end, false, e.main_type);
    for (auto s : e.sub_types) out.emplace(e.start, e.end, true, s);
  }
  return out;
}

double ratio(std::uint64_t tp, std::uint64_t denom, std::uint64_t other_side) {
  if (denom == 0) return other_side == 0 ? 1.0 : 0.0;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

}  // namespace

double Counts::precision() const { return ratio(tp, tp + fp, fn); }
double Counts::recall() const { return ratio(tp, tp + fn, fp); }
double Counts::f1() const {
  double p = precision();
  double r = recall();
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

std::string EvalReport::to_json() const {
  using nlohmann::ordered_json;
  auto block = [](const Counts& c) {
    return ordered_json{{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()},
                        {"tp", c.tp},                {"fp", c.fp},          {"fn", c.fn}};
  };
  ordered_json j = block(totals);
  ordered_json types = ordered_json::object();
  for (const auto& [name, c] : per_type) types[name] = block(c);
  j["per_type"] = std::move(types);
  return j.dump(2);
}

EvalReport micro_prf(std::span<const SentenceEntities> gold, std::span<const SentenceEntities> pred,
                     const Tagset& ts) {
  std::unordered_map<std::string, const SentenceEntities*> pred_by_id;
  for (const auto& p : pred)
    if (!pred_by_id.emplace(p.id, &p).second)
      throw validation_error(fmt::format("eval: duplicate prediction id '{}'", p.id));
  if (pred_by_id.size() != gold.size())
    throw validation_error(fmt::format("eval: {} gold sentences but {} predicted", gold.size(),
                                       pred_by_id.size()));

  EvalReport report;
  auto name_of = [&](const Instance& inst) -> const std::string& {
    return std::get<2>(inst) ? ts.sub_types().at(std::get<3>(inst))
                             : ts.main_types().at(std::get<3>(inst));
  };

  for (const auto& g : gold) {
    auto it = pred_by_id.find(g.id);
    if (it == pred_by_id.end())
      throw validation_error(fmt::format("eval: no prediction for sentence '{}'", g.id));
    auto gold_set = expand(g.entities);
    auto pred_set = expand(it->second->entities);
    for (const auto& inst : gold_set) {
      auto& c = report.per_type[name_of(inst)];
      if (pred_set.count(inst)) {
        ++c.tp;
      } else {
        ++c.fn;
      }
    }
    for (const auto& inst : pred_set)
      if (!gold_set.count(inst)) ++report.per_type[name_of(inst)].fp;
  }

  for (const auto& [_, c] : report.per_type) report.totals += c;
  report.precision = report.totals.precision();
  report.recall = report.totals.recall();
  report.f1 = report.totals.f1();
  return report;
}

}  // namespace knnner
