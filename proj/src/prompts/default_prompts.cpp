// Shipped generation prompts. The texts are data: keep them byte-identical to
// the fixtures under tests/fixtures/prompts/.

#include "synthaug/prompts/registry.hpp"

namespace synthaug::prompts {
namespace {

constexpr const char* kGlazeSingleV2 =
    R"(Based on the provided reference image of a CERAMIC PORCELAIN disc insulator, generate a realistic variation for a dataset.

GLAZE DAMAGE is a COLOR CHANGE in the ceramic surface itself—areas where the shiny glaze has become matte, faded, or discolored. The damaged areas are FLUSH with the surface (not raised, not peeling).

CRITICAL: Real glaze damage shows a DISTINCT LIGHT/WHITE EDGE or border around the damaged patch. This looks like a thin white or very light-colored intermediate layer between the outer colored glaze (red/brown) and the inner white ceramic. You MUST include this white edge pattern around damage patches.

REQUIREMENTS:
- MUST be ceramic/porcelain disc insulators (the classic stacked disc design)
- Damage patches should be CLEARLY VISIBLE (roughly 10-30% of disc surface, 1-3 patches)
- Patches should be matte/faded/discolored with visible contrast to the base glaze
- MANDATORY: Each damage patch MUST have a visible thin white/very light-colored edge
- Keep the object, lighting, and background consistent with the reference

DO NOT:
- Generate polymer/silicone/rubber insulators
- Show peeling, flaking, raised deposits, or crusty/3D texture
- Show chips, cracks, or missing pieces (that's shell damage, not glaze)
)";

constexpr const char* kShellSingleV2 =
    R"(Based on the provided reference image of a CERAMIC PORCELAIN disc insulator, generate a realistic variation for a dataset.

SHELL DAMAGE means a visible chunk of the rim is missing (broken/chipped porcelain). The damage must be OBVIOUS at first glance. Match the SIZE seen in the reference: roughly 30-70% of the rim area on affected discs.

REQUIREMENTS:
- MUST be ceramic/porcelain disc insulators
- Damage must remove a clearly visible chunk of the rim (about 30-70% on affected discs)
- Allow 1-5 affected discs, but avoid catastrophic destruction
- Fracture surfaces should look like clean, smooth porcelain (white or very light-colored)
- Keep wound edges continuous and ceramic-like; avoid debris or dirt on the fracture
- Keep the object, lighting, and background consistent with the reference

DO NOT:
- Make the damage tiny or hairline; it must be clearly visible
- Obliterate entire discs; keep the string intact
- Generate polymer/silicone insulators
)";

constexpr const char* kGlazeDualV1 =
    R"(I'm providing TWO reference images showing CERAMIC PORCELAIN disc insulators with glaze damage. These are classic PORCELAIN disc-shaped insulators used on power lines—NOT polymer/silicone insulators.

GLAZE DAMAGE is a COLOR CHANGE in the ceramic surface itself—areas where the shiny glaze has become matte, faded, or discolored. The damaged areas are FLUSH with the surface (not raised, not peeling).

Study the reference images carefully, then generate a NEW photo of a ceramic disc insulator with similar glaze damage.

REQUIREMENTS:
- MUST be ceramic/porcelain disc insulators (the classic stacked disc design)
- Damage patches should be CLEARLY VISIBLE (10-25% of disc surface)
- VARY the insulator color: use brown, reddish-brown, gray, white, OR blue-gray
- Use your own background, angle, and lighting

DO NOT:
- Generate polymer/silicone/rubber insulators
- Show peeling, flaking, or raised deposits
- Show chips, cracks, or missing pieces (that's shell damage, not glaze)
- Copy the reference images—create something new
- Always use brown/red colors—vary the insulator color
)";

constexpr const char* kGlazeDualV2 =
    R"(I'm providing TWO reference images showing CERAMIC PORCELAIN disc insulators with glaze damage. These are classic PORCELAIN disc-shaped insulators used on power lines—NOT polymer/silicone insulators.

GLAZE DAMAGE is a COLOR CHANGE in the ceramic surface itself—areas where the shiny glaze has become matte, faded, or discolored. The damaged areas are FLUSH with the surface (not raised, not peeling).

CRITICAL: Real glaze damage shows a DISTINCT LIGHT/WHITE EDGE or border around the damaged patch. This looks like a thin white or very light-colored intermediate layer between the outer colored glaze (red/brown) and the inner white ceramic. Study the reference images—you MUST see this white edge pattern around the damage patches.

Study the reference images carefully, then generate a NEW photo of a ceramic disc insulator with similar glaze damage.

REQUIREMENTS:
- MUST be ceramic/porcelain disc insulators (the classic stacked disc design)
- Damage patches should be CLEARLY VISIBLE (roughly 10-30% of disc surface, 1-3 patches)
- Patches should be matte/faded/discolored with visible contrast to the base glaze; edges can be soft/irregular but must stay FLUSH
- MANDATORY: Each damage patch MUST have a visible thin white/very light-colored edge or border around it, showing the intermediate layer between glaze and ceramic
- VARY the insulator color: use brown, reddish-brown, gray, white, OR blue-gray
- Use your own background, angle, and lighting

DO NOT:
- Generate polymer/silicone/rubber insulators
- Show peeling, flaking, raised deposits, or crusty/3D texture
- Show chips, cracks, or missing pieces (that's shell damage, not glaze)
- Copy the reference images—create something new
)";

constexpr const char* kShellDualV1 =
    R"(I'm providing TWO reference images showing CERAMIC PORCELAIN disc insulators with shell damage. These are classic PORCELAIN disc-shaped insulators used on power lines.

SHELL DAMAGE means chips or cracks at the rim/edge of the porcelain disc where a piece has broken off. Look at the SIZE of the damage in the reference images and MATCH that size—the damage should be CLEARLY VISIBLE.

Study the reference images carefully for the SIZE and SCALE of the damage, then generate a NEW photo of a ceramic disc insulator with similar shell damage.

REQUIREMENTS:
- MUST be ceramic/porcelain disc insulators
- Damage size should MATCH what's shown in references—clearly visible chips
- Typically affects 1-2 discs in a string
- VARY the insulator color: use brown, reddish-brown, gray, white, OR blue-gray
- Use your own background, angle, and lighting

DO NOT:
- Make the damage TOO SMALL—match the reference damage size
- Show the cement interior heavily exposed
- Generate polymer/silicone insulators
- Copy the reference images—create something new
- Always use brown/red colors—vary the insulator color
)";

constexpr const char* kShellDualV2 =
    R"(I'm providing TWO reference images showing CERAMIC PORCELAIN disc insulators with shell damage. These are classic PORCELAIN disc-shaped insulators used on power lines.

SHELL DAMAGE means a visible chunk of the rim is missing (broken/chipped porcelain). The damage must be OBVIOUS at first glance. Match the SIZE seen in the references: roughly 30-70% of the rim area on affected discs, and in some cases up to about 80% for a few discs where most of the rim is gone and the core shows.

Study the reference images carefully for SIZE and SCALE, then generate a NEW photo of a ceramic disc insulator with similar shell damage.

REQUIREMENTS:
- MUST be ceramic/porcelain disc insulators
- Damage must remove a clearly visible chunk of the rim (about 30-70% on affected discs; occasionally up to ~80%)
- Allow 1-5 affected discs (occasionally up to 7), but avoid catastrophic destruction
- Fracture surfaces should look like clean, smooth porcelain (white or very light-colored, uniform), not rough or porous
- Keep the wound edges continuous and ceramic-like; avoid debris or dirt on the fracture
- VARY the insulator color: use brown, reddish-brown, gray, white, OR blue-gray
- Use your own background, angle, and lighting

DO NOT:
- Make the damage tiny or hairline; it must be clearly visible when viewing the whole string
- Obliterate entire discs or remove most of multiple discs; a few discs can have large rim loss with core visible, but keep the string intact
- Generate polymer/silicone insulators
- Copy the reference images—create something new
)";

}  // namespace

std::vector<PromptTemplate> default_templates() {
  const std::vector<std::string> glaze_v2 = {"white", "FLUSH"};
  const std::vector<std::string> shell_v2 = {"30-70"};
  return {
      {DefectClass::kGlaze, "V2", PromptMode::kSingleRef, kGlazeSingleV2, glaze_v2},
      {DefectClass::kShell, "V2", PromptMode::kSingleRef, kShellSingleV2, shell_v2},
      {DefectClass::kGlaze, "V1", PromptMode::kDualRef, kGlazeDualV1, {}},
      {DefectClass::kGlaze, "V2", PromptMode::kDualRef, kGlazeDualV2, glaze_v2},
      {DefectClass::kShell, "V1", PromptMode::kDualRef, kShellDualV1, {}},
      {DefectClass::kShell, "V2", PromptMode::kDualRef, kShellDualV2, shell_v2},
  };
}

}  // namespace synthaug::prompts
