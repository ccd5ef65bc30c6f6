#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "json.hpp"

#include "agesynth/tensor.hpp"

namespace agesynth {

/// A versioned bag of named float64 arrays plus a JSON metadata object.
///
/// On disk: 8-byte magic, u32 format version, u64 manifest length, the
/// manifest (JSON: metadata plus name/shape/offset per array), then the raw
/// little-endian array payload in name order. Serialization is canonical:
/// equal archives produce identical bytes.
class Archive {
public:
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Tensor> arrays;

  std::string serialize() const;
  /// Throws LoadError on bad magic, version, manifest or payload size.
  static Archive deserialize(const std::string& bytes);

  /// Writes to a sibling temporary file and renames over `path`.
  void save(const std::string& path) const;
  static Archive load(const std::string& path);

  const Tensor& array(const std::string& name) const;
};

}  // namespace agesynth
