#include "synthaug/common/types.hpp"

#include <string>

#include "synthaug/common/errors.hpp"

namespace synthaug {

std::string_view to_string(DefectClass c) {
  switch (c) {
    case DefectClass::kShell:
      return "shell";
    case DefectClass::kGlaze:
      return "glaze";
  }
  return "unknown";
}

DefectClass parse_defect_class(std::string_view s) {
  if (s == "shell") return DefectClass::kShell;
  if (s == "glaze") return DefectClass::kGlaze;
  throw DataError("unknown defect class '" + std::string(s) + "' (expected shell or glaze)");
}

DefectClass class_of(const LabelVector& v) {
  if (v[0] + v[1] != 1 || (v[0] != 0 && v[0] != 1) || (v[1] != 0 && v[1] != 1)) {
    throw DataError("label vector [" + std::to_string(v[0]) + "," + std::to_string(v[1]) +
                    "] is not one-hot");
  }
  return v[0] == 1 ? DefectClass::kShell : DefectClass::kGlaze;
}

}  // namespace synthaug
