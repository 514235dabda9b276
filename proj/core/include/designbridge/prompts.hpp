#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "designbridge/design_space.hpp"

namespace designbridge {

enum class PromptStage { Framing, Informed };

/// Per-dimension detail clauses for informed generation, keyed by dimension index.
using DetailMap = std::map<int, std::string>;

/// Partially chosen design; unfilled dimensions render as "[Dimension]".
using PartialSelection = std::array<std::optional<int>, kDimensionCount>;

/// Garment description template with whatever slots are filled.
std::string render_template(const DesignSpace& space, const PartialSelection& selection);

/// Generation prompt for a complete design. The informed stage appends one
/// "For <Dimension> part, ..." sentence per detail entry, in dimension order.
/// Throws MissingDetail for the informed stage with no detail.
std::string render_prompt(const DesignSpace& space, const DesignVector& v, PromptStage stage,
                          const DetailMap& detail = {});

/// Parses {"Collar Shape": "text", ...} into a DetailMap. Throws InvalidArgument on unknown names.
DetailMap detail_from_json(const DesignSpace& space, const nlohmann::json& doc);

enum class Gender { Male, Female, Unspecified };

/// Mannequin prompt with height/weight/gender filled in.
std::string render_avatar_prompt(Gender gender, double height_cm, double weight_kg);

/// Prompt-polishing request for the try-on background of a scene.
std::string render_background_prompt(const std::string& scene);

/// Per-dimension filtering request for a language-model framing backend.
std::string render_filter_prompt(const std::string& dimension, int keep_count, const std::string& scene,
                                 const std::string& garment_type, const std::string& principle,
                                 const std::vector<std::string>& words);

/// "175" for 175.0, "175.5" for 175.5.
std::string format_number(double value);

}  // namespace designbridge
