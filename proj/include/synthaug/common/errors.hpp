#pragma once

#include <stdexcept>
#include <string>

namespace synthaug {

// Process exit codes used by the CLI, one per error family.
enum class ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfig = 2,
  kMissingArtifact = 3,
  kData = 4,
  kConflict = 5,
  kBackend = 6,
  kNotFound = 7,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual ExitCode exit_code() const { return ExitCode::kInternal; }
};

#define SYNTHAUG_ERROR(Name, Code)                                      \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(what) {}             \
    ExitCode exit_code() const override { return ExitCode::Code; }      \
  };

SYNTHAUG_ERROR(ConfigError, kConfig)
SYNTHAUG_ERROR(CurationError, kData)
SYNTHAUG_ERROR(DataError, kData)
SYNTHAUG_ERROR(ManifestError, kData)
SYNTHAUG_ERROR(ValidationError, kData)
SYNTHAUG_ERROR(LeakageError, kData)
SYNTHAUG_ERROR(LookupError, kNotFound)
SYNTHAUG_ERROR(NotFoundError, kNotFound)
SYNTHAUG_ERROR(ConflictError, kConflict)
SYNTHAUG_ERROR(StateError, kConflict)
SYNTHAUG_ERROR(BackendError, kBackend)
SYNTHAUG_ERROR(MissingArtifactError, kMissingArtifact)

#undef SYNTHAUG_ERROR

}  // namespace synthaug
