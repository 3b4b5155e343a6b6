#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace synthaug {

// The two defect types of the curated task. Index order is the label-vector
// order: (shell, glaze).
enum class DefectClass : std::uint8_t { kShell = 0, kGlaze = 1 };

inline constexpr std::array<DefectClass, 2> kAllClasses = {DefectClass::kShell,
                                                           DefectClass::kGlaze};
inline constexpr std::size_t kNumClasses = kAllClasses.size();

std::string_view to_string(DefectClass c);
DefectClass parse_defect_class(std::string_view s);

inline constexpr std::size_t class_index(DefectClass c) {
  return static_cast<std::size_t>(c);
}

// Binary targets per defect type, (shell, glaze).
using LabelVector = std::array<int, kNumClasses>;

inline LabelVector one_hot(DefectClass c) {
  LabelVector v{0, 0};
  v[class_index(c)] = 1;
  return v;
}

// Returns the single set class of a one-hot vector; throws DataError otherwise.
DefectClass class_of(const LabelVector& v);

// Pixel rectangle, half-open on neither side: x_min < x_max, y_min < y_max.
struct Box {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool contains(const Box& o) const {
    return x_min <= o.x_min && y_min <= o.y_min && x_max >= o.x_max && y_max >= o.y_max;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

}  // namespace synthaug
