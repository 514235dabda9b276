#pragma once

#include <functional>
#include <string>
#include <vector>

#include "designbridge/design_space.hpp"

namespace designbridge {

/// Partition of all 51 attributes into included and excluded. Every
/// dimension keeps at least one included attribute.
class FilterResult {
 public:
  /// Nothing excluded.
  static FilterResult include_all(double strictness = 0.0);

  /// Builds from an exclusion mask; throws ValidationFailed if a dimension
  /// would be emptied.
  static FilterResult from_excluded(const DesignSpace& space, const std::array<bool, kAttributeCount>& excluded,
                                    double strictness);

  bool included(const DesignSpace& space, AttributeId id) const { return !excluded_[space.flat_index(id)]; }
  std::vector<AttributeId> included_list(const DesignSpace& space) const;
  std::vector<AttributeId> excluded_list(const DesignSpace& space) const;
  /// Included attribute indices of one dimension, ascending.
  std::vector<int> included_in(const DesignSpace& space, int dimension) const;

  double strictness() const { return strictness_; }
  bool fallback() const { return fallback_; }
  void mark_fallback() { fallback_ = true; }

  /// Flips one attribute; throws ValidationFailed if that empties its dimension.
  FilterResult toggled(const DesignSpace& space, AttributeId id) const;

  nlohmann::json to_json(const DesignSpace& space) const;
  static FilterResult from_json(const DesignSpace& space, const nlohmann::json& doc);

  bool operator==(const FilterResult&) const = default;

 private:
  std::array<bool, kAttributeCount> excluded_{};
  double strictness_ = 0.0;
  bool fallback_ = false;
};

struct FilterRule {
  std::string keyword;
  /// "Dimension:Attribute" or "#tag" (every attribute carrying the tag).
  std::string target;
  /// In (0, 1]; the rule fires iff priority <= strictness.
  double priority = 1.0;
};

class FilterRuleTable {
 public:
  static FilterRuleTable from_json(const DesignSpace& space, const nlohmann::json& doc);
  static const FilterRuleTable& defaults();

  const std::vector<FilterRule>& rules() const { return rules_; }

 private:
  std::vector<FilterRule> rules_;
};

struct FramingRequest {
  std::string garment_type;
  std::string scene;
  std::string principle;
  double strictness = 0.0;
};

/// Attribute filtering backend seam.
class FramingBackend {
 public:
  virtual ~FramingBackend() = default;
  virtual std::string name() const = 0;
  /// May throw BackendUnavailable.
  virtual FilterResult filter(const FramingRequest& request) = 0;
};

/// Keyword rule engine. Fired exclusions are applied per dimension in
/// ascending priority and stop before the last attribute, so the result is
/// monotone in strictness.
class RuleFramingBackend final : public FramingBackend {
 public:
  RuleFramingBackend(const DesignSpace& space, FilterRuleTable rules) : space_(&space), rules_(std::move(rules)) {}
  std::string name() const override { return "rules"; }
  FilterResult filter(const FramingRequest& request) override;

 private:
  const DesignSpace* space_;
  FilterRuleTable rules_;
};

/// Language-model backend: one filtering prompt per dimension, keeping the
/// words named in the reply. `complete` performs the remote call; an empty
/// function means no endpoint is configured.
class LlmFramingBackend final : public FramingBackend {
 public:
  using Completion = std::function<std::string(const std::string& prompt)>;

  LlmFramingBackend(const DesignSpace& space, Completion complete) : space_(&space), complete_(std::move(complete)) {}
  std::string name() const override { return "llm"; }
  FilterResult filter(const FramingRequest& request) override;

  /// Number of words the prompt asks to keep for a dimension.
  static int keep_count(int attribute_count, double strictness);

 private:
  const DesignSpace* space_;
  Completion complete_;
};

/// Validates the request, delegates to `backend`, and falls back to
/// `fallback` (flagging the result) when the backend is unavailable.
/// The chosen garment type is always included.
FilterResult filter_attributes(const DesignSpace& space, const FramingRequest& request, FramingBackend& backend,
                               FramingBackend& fallback);

/// Lowercase alphanumeric words of a text.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace designbridge
