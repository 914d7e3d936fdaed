#pragma once

// Pinned prompt strings, typed independently of the library sources.

#include <array>
#include <string_view>

namespace stereovol::fixtures {

// Rendered with class "apple", volume 250 and 0 decimals.
inline constexpr std::array<std::string_view, 6> kTemplatesApple250 = {
    "These are stereo image pairs of apple whose approximate volume is 250 mL.",
    "Detected object: apple estimated volume: 250 mL",
    "Object identified as apple with volume approximately 250 mL",
    "Classification: apple | Volume estimate: 250 mL",
    "This appears to be a apple measuring roughly 250 mL in volume",
    "The object is apple and the approximate volume is 250 mL",
};

inline constexpr std::string_view kVlmSingleNoContext =
    R"(Answer with ONLY a single floating-point number (milliliters). No units, no extra text.
Estimate the object's volume in milliliters from the image.
Return ONLY a single floating-point number (milliliters), no units, no words, no punctuation, no JSON, no code fences.)";

inline constexpr std::string_view kVlmSingleBanana =
    R"(Answer with ONLY a single floating-point number (milliliters). No units, no extra text.
Given this is an image of a banana, estimate its volume in milliliters.
Return ONLY a single floating-point number (milliliters), no units, no words, no punctuation, no JSON, no code fences.)";

inline constexpr std::string_view kVlmStereo =
    R"(You are given TWO images of the SAME object, captured from different viewpoints.
Use both images jointly (stereo cues, parallax, shape consistency) to estimate the object's volume in milliliters.
Assume similar scale and camera distance; modest viewpoint change is present.
RESPONSE FORMAT (STRICT JSON, one object, no code fences, no extra text):
{
  "volume_ml": <float>,
  "explanation": "<2-4 concise sentences on the visual cues you used>"
}
Rules:
- Return ONLY the JSON object above (no markdown, no reasoning sections, no additional keys).
- "volume_ml" MUST be a single floating-point number (no units, no commas).
Return ONLY the final JSON object; do not include chain-of-thought or extra text.)";

} // namespace stereovol::fixtures
