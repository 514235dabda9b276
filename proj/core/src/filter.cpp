#include "designbridge/filter.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "designbridge/error.hpp"
#include "designbridge/prompts.hpp"

namespace designbridge {

namespace embedded {
std::string_view filter_rules_json();
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

// Attributes a rule target names.
std::vector<AttributeId> resolve_target(const DesignSpace& space, const std::string& target) {
  std::vector<AttributeId> out;
  if (!target.empty() && target[0] == '#') {
    const std::string tag = lower(target.substr(1));
    for (int d = 0; d < kDimensionCount; ++d) {
      for (int a = 0; a < space.attribute_count(d); ++a) {
        const auto& tags = space.dimension(d).attributes[static_cast<std::size_t>(a)].tags;
        if (std::any_of(tags.begin(), tags.end(), [&](const std::string& t) { return lower(t) == tag; })) {
          out.push_back({d, a});
        }
      }
    }
    return out;
  }
  if (auto id = space.parse_attribute(target)) out.push_back(*id);
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

FilterResult FilterResult::include_all(double strictness) {
  FilterResult r;
  r.strictness_ = strictness;
  return r;
}

FilterResult FilterResult::from_excluded(const DesignSpace& space, const std::array<bool, kAttributeCount>& excluded,
                                         double strictness) {
  for (int d = 0; d < kDimensionCount; ++d) {
    bool any = false;
    for (int a = 0; a < space.attribute_count(d); ++a) any |= !excluded[static_cast<std::size_t>(space.flat_index({d, a}))];
    if (!any) {
      throw Error(ErrorCode::ValidationFailed, "every attribute of " + space.dimension(d).name + " is excluded",
                  {{"dimension", space.dimension(d).name}});
    }
  }
  FilterResult r;
  r.excluded_ = excluded;
  r.strictness_ = strictness;
  return r;
}

std::vector<AttributeId> FilterResult::included_list(const DesignSpace& space) const {
  std::vector<AttributeId> out;
  for (int i = 0; i < kAttributeCount; ++i) {
    if (!excluded_[static_cast<std::size_t>(i)]) out.push_back(space.from_flat(i));
  }
  return out;
}

std::vector<AttributeId> FilterResult::excluded_list(const DesignSpace& space) const {
  std::vector<AttributeId> out;
  for (int i = 0; i < kAttributeCount; ++i) {
    if (excluded_[static_cast<std::size_t>(i)]) out.push_back(space.from_flat(i));
  }
  return out;
}

std::vector<int> FilterResult::included_in(const DesignSpace& space, int dimension) const {
  std::vector<int> out;
  for (int a = 0; a < space.attribute_count(dimension); ++a) {
    if (included(space, {dimension, a})) out.push_back(a);
  }
  return out;
}

FilterResult FilterResult::toggled(const DesignSpace& space, AttributeId id) const {
  if (!space.valid(id)) throw Error(ErrorCode::InvalidArgument, "attribute out of range");
  auto excluded = excluded_;
  auto& bit = excluded[static_cast<std::size_t>(space.flat_index(id))];
  bit = !bit;
  auto r = from_excluded(space, excluded, strictness_);
  r.fallback_ = fallback_;
  return r;
}

nlohmann::json FilterResult::to_json(const DesignSpace& space) const {
  nlohmann::json included = nlohmann::json::array(), excluded = nlohmann::json::array();
  for (const auto& id : included_list(space)) included.push_back(space.qualified_name(id));
  for (const auto& id : excluded_list(space)) excluded.push_back(space.qualified_name(id));
  return {{"included", included}, {"excluded", excluded}, {"strictness", strictness_}, {"fallback", fallback_}};
}

FilterResult FilterResult::from_json(const DesignSpace& space, const nlohmann::json& doc) {
  std::array<bool, kAttributeCount> excluded{};
  for (const auto& name : doc.at("excluded")) {
    auto id = space.parse_attribute(name.get<std::string>());
    if (!id) throw Error(ErrorCode::ValidationFailed, "unknown attribute " + name.get<std::string>());
    excluded[static_cast<std::size_t>(space.flat_index(*id))] = true;
  }
  auto r = from_excluded(space, excluded, doc.value("strictness", 0.0));
  r.fallback_ = doc.value("fallback", false);
  return r;
}

FilterRuleTable FilterRuleTable::from_json(const DesignSpace& space, const nlohmann::json& doc) {
  if (doc.value("schema_version", 0) != 1) throw Error(ErrorCode::ValidationFailed, "unsupported rule table version");
  FilterRuleTable table;
  for (const auto& r : doc.at("rules")) {
    FilterRule rule{lower(r.at("keyword").get<std::string>()), r.at("target").get<std::string>(),
                    r.at("priority").get<double>()};
    if (!(rule.priority > 0.0 && rule.priority <= 1.0)) {
      throw Error(ErrorCode::ValidationFailed, fmt::format("rule priority {} outside (0, 1]", rule.priority));
    }
    if (tokenize(rule.keyword).size() != 1) throw Error(ErrorCode::ValidationFailed, "rule keyword must be one word");
    if (resolve_target(space, rule.target).empty()) {
      throw Error(ErrorCode::ValidationFailed, "rule target matches nothing: " + rule.target);
    }
    table.rules_.push_back(std::move(rule));
  }
  return table;
}

const FilterRuleTable& FilterRuleTable::defaults() {
  static const FilterRuleTable table =
      from_json(DesignSpace::canonical(), nlohmann::json::parse(embedded::filter_rules_json()));
  return table;
}

FilterResult RuleFramingBackend::filter(const FramingRequest& request) {
  const auto& space = *space_;
  const auto type_id = space.find_attribute(kType, request.garment_type);
  std::set<std::string> words;
  for (auto& w : tokenize(request.scene)) words.insert(std::move(w));
  for (auto& w : tokenize(request.principle)) words.insert(std::move(w));

  // Lowest firing priority per attribute; the rule index breaks ties.
  struct Fired {
    double priority;
    std::size_t rule;
    int attribute;
  };
  std::array<std::vector<Fired>, kDimensionCount> per_dimension;
  std::array<bool, kAttributeCount> seen{};
  std::vector<std::pair<Fired, AttributeId>> fired;
  const auto& rules = rules_.rules();
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const auto& rule = rules[i];
    if (rule.priority > request.strictness || !words.count(rule.keyword)) continue;
    for (const auto& id : resolve_target(space, rule.target)) {
      if (type_id && id == *type_id) continue;
      fired.push_back({{rule.priority, i, id.attribute}, id});
    }
  }
  std::sort(fired.begin(), fired.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.priority, a.first.rule, a.second) < std::tie(b.first.priority, b.first.rule, b.second);
  });
  for (const auto& [f, id] : fired) {
    const auto flat = static_cast<std::size_t>(space.flat_index(id));
    if (seen[flat]) continue;
    seen[flat] = true;
    per_dimension[static_cast<std::size_t>(id.dimension)].push_back(f);
  }

  std::array<bool, kAttributeCount> excluded{};
  for (int d = 0; d < kDimensionCount; ++d) {
    const auto& list = per_dimension[static_cast<std::size_t>(d)];
    // Exclude in ascending priority but always leave one attribute standing;
    // the relaxed tail consists of the highest-priority rules.
    const std::size_t limit = std::min(list.size(), static_cast<std::size_t>(space.attribute_count(d) - 1));
    for (std::size_t k = 0; k < limit; ++k) excluded[static_cast<std::size_t>(space.flat_index({d, list[k].attribute}))] = true;
  }
  return FilterResult::from_excluded(space, excluded, request.strictness);
}

int LlmFramingBackend::keep_count(int attribute_count, double strictness) {
  const int keep = static_cast<int>(std::ceil((1.0 - strictness) * attribute_count - 1e-9));
  return std::clamp(keep, 1, attribute_count);
}

FilterResult LlmFramingBackend::filter(const FramingRequest& request) {
  if (!complete_) throw Error(ErrorCode::BackendUnavailable, "no language-model endpoint configured");
  const auto& space = *space_;
  std::array<bool, kAttributeCount> excluded{};
  if (request.strictness <= 0.0) return FilterResult::from_excluded(space, excluded, request.strictness);
  for (int d = 0; d < kDimensionCount; ++d) {
    const auto& dim = space.dimension(d);
    std::vector<std::string> words;
    for (const auto& a : dim.attributes) words.push_back(a.name);
    const int keep = keep_count(space.attribute_count(d), request.strictness);
    const std::string reply =
        complete_(render_filter_prompt(dim.name, keep, request.scene, request.garment_type, request.principle, words));
    // Keep every attribute the reply names as a whole phrase.
    const auto reply_words = tokenize(reply);
    std::string joined = " ";
    for (const auto& w : reply_words) joined += w + " ";
    std::vector<bool> kept(words.size(), false);
    bool any = false;
    for (std::size_t a = 0; a < words.size(); ++a) {
      std::string phrase = " ";
      for (const auto& w : tokenize(words[a])) phrase += w + " ";
      if (joined.find(phrase) != std::string::npos) kept[a] = any = true;
    }
    if (!any) continue;  // unusable reply: keep the dimension whole
    for (std::size_t a = 0; a < words.size(); ++a) {
      excluded[static_cast<std::size_t>(space.flat_index({d, static_cast<int>(a)}))] = !kept[a];
    }
  }
  return FilterResult::from_excluded(space, excluded, request.strictness);
}

FilterResult filter_attributes(const DesignSpace& space, const FramingRequest& request, FramingBackend& backend,
                               FramingBackend& fallback) {
  if (!(request.strictness >= 0.0 && request.strictness <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "strictness must lie in [0, 1]", {{"strictness", request.strictness}});
  }
  const auto type_id = space.find_attribute(kType, request.garment_type);
  if (!type_id) {
    throw Error(ErrorCode::InvalidArgument, "garment type must be one of the Type attributes",
                {{"garment_type", request.garment_type}});
  }
  FilterResult result = FilterResult::include_all(request.strictness);
  try {
    result = backend.filter(request);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BackendUnavailable) throw;
    result = fallback.filter(request);
    result.mark_fallback();
  }
  if (!result.included(space, *type_id)) result = result.toggled(space, *type_id);
  return result;
}

}  // namespace designbridge
