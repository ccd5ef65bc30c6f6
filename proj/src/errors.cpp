#include "agesynth/errors.hpp"

namespace agesynth {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::shape: return "shape";
    case ErrorKind::argument: return "argument";
    case ErrorKind::schema: return "schema";
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::geometry: return "geometry";
    case ErrorKind::manifest: return "manifest";
    case ErrorKind::load: return "load";
    case ErrorKind::numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace agesynth
