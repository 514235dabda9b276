#include "designbridge/prompts.hpp"

#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "designbridge/error.hpp"

namespace designbridge {
namespace {

constexpr std::string_view kGarmentPreamble =
    "An image of a clear master piece of real garment without a model, with a white background. "
    "There shouldn't a person or more than one garment in the image.";

std::string slot(const DesignSpace& space, const PartialSelection& selection, int d) {
  const auto& choice = selection[static_cast<std::size_t>(d)];
  if (!choice) return "[" + space.dimension(d).name + "]";
  return space.attribute_name({d, *choice});
}

struct Pronouns {
  std::string_view article, subject, subject_cap, possessive, possessive_cap;
};

Pronouns pronouns(Gender gender) {
  if (gender == Gender::Female) return {"A woman", "she", "She", "her", "Her"};
  return {"A man", "he", "He", "his", "His"};
}

}  // namespace

std::string format_number(double value) {
  if (std::isfinite(value) && value == std::floor(value) && std::fabs(value) < 1e15) {
    return fmt::format("{}", static_cast<long long>(value));
  }
  return fmt::format("{}", value);
}

std::string render_template(const DesignSpace& space, const PartialSelection& selection) {
  auto s = [&](int d) { return slot(space, selection, d); };
  return fmt::format(
      "{}\n"
      "The garment is a {} featuring {} sleeves and a {} collar.\n"
      "It is worn in a {} style and has a {} pattern in a {} arrangement.\n"
      "The garment comes in a {} color scheme, with specific colors including {}. The material is {}.",
      kGarmentPreamble, s(kType), s(kSleeveLength), s(kCollarShape), s(kWearingStyle), s(kPatternStyle),
      s(kPatternArrangement), s(kColorCategory), s(kSpecificColors), s(kMaterial));
}

std::string render_prompt(const DesignSpace& space, const DesignVector& v, PromptStage stage, const DetailMap& detail) {
  if (!space.valid(v)) throw Error(ErrorCode::InvalidArgument, "design vector out of range");
  PartialSelection full;
  for (int d = 0; d < kDimensionCount; ++d) full[static_cast<std::size_t>(d)] = v[d];
  std::string out = render_template(space, full);
  if (stage == PromptStage::Framing) return out;
  if (detail.empty()) throw Error(ErrorCode::MissingDetail, "informed prompts need at least one detail entry");
  for (const auto& [d, text] : detail) {
    if (d < 0 || d >= kDimensionCount) throw Error(ErrorCode::InvalidArgument, "detail dimension out of range");
    out += fmt::format("\nFor {} part, with detailed descriptions of {}.", space.dimension(d).name, text);
  }
  return out;
}

DetailMap detail_from_json(const DesignSpace& space, const nlohmann::json& doc) {
  DetailMap out;
  if (doc.is_null()) return out;
  if (!doc.is_object()) throw Error(ErrorCode::InvalidArgument, "detail must be an object");
  for (const auto& [name, text] : doc.items()) {
    auto d = space.find_dimension(name);
    if (!d) throw Error(ErrorCode::InvalidArgument, "unknown dimension in detail: " + name);
    out[*d] = text.get<std::string>();
  }
  return out;
}

std::string render_avatar_prompt(Gender gender, double height_cm, double weight_kg) {
  const auto p = pronouns(gender);
  return fmt::format(
      "{}, {} is {} in height (cm) and {} in weight (kg). {} is standing gracefully in the center of the frame. "
      "{} upper body is fully visible, wearing a short sleeve t-shirt with elegant details.\n"
      "{} has a gentle smile on {} face. The focus is on {} upper body, with only a slight glimpse of {} trousers "
      "visible at the bottom of the frame.\n"
      "Photographic Details:\n"
      "The image is taken with a Canon EOS camera, using a SIGMA Art Lens 35mm F1.4, set at ISO 200 and a shutter "
      "speed of 1/2000. The image captures every detail in stunning clarity and realism, with a high-quality, "
      "cinematic feel.\n"
      "The image is taken from the front side. {} body should face towards the front. It remains unobstructed in "
      "front of the body.",
      p.article, p.subject, format_number(height_cm), format_number(weight_kg), p.subject_cap, p.possessive_cap,
      p.subject_cap, p.possessive, p.possessive, p.possessive, p.possessive_cap);
}

std::string render_background_prompt(const std::string& scene) {
  return fmt::format(
      "You are an expert at polishing text prompts. Based on the following task description, refine and enhance the "
      "text to make it suitable for high-quality background generation.\n"
      "Task:\n"
      "I want to generate a high quality background for virtual try-on. The background should be suitable for {} "
      "scene. Please help me polish my text prompt to make it suitable for background generation.\n"
      "Polished Prompt Example:\n"
      "A vibrant and inviting spring scene. The backdrop should evoke the essence of warm spring days with elements "
      "like clear blue skies, lush greenery, and gently swaying trees.\n"
      "Instructions:\n"
      "- Preserve the intent of the original task while enhancing clarity, vividness, and visual richness.\n"
      "- Make the scene description evocative and suitable for AI-based background generation tools.\n"
      "- Keep the language natural, descriptive, and concise.",
      scene);
}

std::string render_filter_prompt(const std::string& dimension, int keep_count, const std::string& scene,
                                 const std::string& garment_type, const std::string& principle,
                                 const std::vector<std::string>& words) {
  return fmt::format(
      "You are an expert at designing garments and matching different scenes. Based on the following task "
      "description, refine and execute the filtering process with scene-appropriate reasoning.\n"
      "Task:\n"
      "I have a list of words describing {} of a garment. I want to know which of these words are suitable to wear "
      "in a specific scene with detailed descriptions. Please help me keep {} words remained, which are suitable for "
      "a {} scene, a {} type, and a {} principle.\n"
      "Sample Response:\n"
      "Based on the criteria you provided for a frozen winter day scene, here are the two most suitable options:\n"
      "1. Hoodie: This option fits perfectly, especially for a frozen winter day attire. It is suitable for casual "
      "wear and comfortable in cold weather.\n"
      "2. Sweater: Considering frozen winter scene, a woolen sweater with a high collar can match the description. "
      "You can find warm sweater in various styles, including those that can be worn in cold conditions if styled "
      "appropriately.\n"
      "These two options should fit your specified scenario and condition.\n"
      "Instructions:\n"
      "- Evaluate each word in the given list according to the specified scene, type, and design principle.\n"
      "- Select and retain only the most relevant options based on contextual fit.\n"
      "- Provide detailed justification for each retained word.\n"
      "- Maintain a descriptive, professional tone with a clear focus on fashion suitability and practicality.\n"
      "Words: {}",
      dimension, keep_count, scene, garment_type, principle, fmt::join(words, ", "));
}

}  // namespace designbridge
