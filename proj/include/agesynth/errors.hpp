#pragma once

#include <stdexcept>
#include <string>

namespace agesynth {

/// Broad failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
  shape,
  argument,
  schema,
  config,
  data,
  geometry,
  manifest,
  load,
  numeric,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

#define AGESYNTH_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                              \
  public:                                                                  \
    explicit Name(const std::string& message) : Error(Kind, message) {}    \
  };

AGESYNTH_DEFINE_ERROR(ShapeError, ErrorKind::shape)
AGESYNTH_DEFINE_ERROR(ArgumentError, ErrorKind::argument)
AGESYNTH_DEFINE_ERROR(SchemaError, ErrorKind::schema)
AGESYNTH_DEFINE_ERROR(ConfigError, ErrorKind::config)
AGESYNTH_DEFINE_ERROR(DataError, ErrorKind::data)
AGESYNTH_DEFINE_ERROR(GeometryError, ErrorKind::geometry)
AGESYNTH_DEFINE_ERROR(ManifestError, ErrorKind::manifest)
AGESYNTH_DEFINE_ERROR(LoadError, ErrorKind::load)
AGESYNTH_DEFINE_ERROR(NumericError, ErrorKind::numeric)

#undef AGESYNTH_DEFINE_ERROR

}  // namespace agesynth
