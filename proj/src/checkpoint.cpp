#include "agesynth/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "agesynth/errors.hpp"

namespace agesynth {

namespace {

constexpr char kMagic[8] = {'A', 'G', 'E', 'S', 'Y', 'N', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "archive payload is written in native little-endian order");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw LoadError("archive truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string Archive::serialize() const {
  nlohmann::json manifest;
  manifest["metadata"] = metadata;
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : arrays) {
    const Shape s = t.shape();
    entries.push_back({{"name", name},
                       {"shape", {s.n, s.h, s.w, s.c}},
                       {"offset", offset}});
    offset += t.numel();
  }
  manifest["arrays"] = std::move(entries);
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset * sizeof(double));
  for (const auto& [name, t] : arrays) {
    out.append(reinterpret_cast<const char*>(t.data().data()),
               t.numel() * sizeof(double));
  }
  return out;
}

Archive Archive::deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw LoadError("not a checkpoint archive (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kVersion) {
    throw LoadError("checkpoint format version " + std::to_string(version) +
                    ", expected " + std::to_string(kVersion));
  }
  const auto manifest_size = get<std::uint64_t>(bytes, pos);
  if (manifest_size > bytes.size() - pos) throw LoadError("archive truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(pos, manifest_size));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  pos += manifest_size;
  const std::size_t payload = bytes.size() - pos;

  Archive a;
  try {
    a.metadata = manifest.at("metadata");
    std::uint64_t expected_offset = 0;
    for (const auto& e : manifest.at("arrays")) {
      const auto name = e.at("name").get<std::string>();
      const auto dims = e.at("shape").get<std::vector<int>>();
      const auto offset = e.at("offset").get<std::uint64_t>();
      if (dims.size() != 4 || offset != expected_offset) {
        throw LoadError("corrupt checkpoint manifest entry '" + name + "'");
      }
      for (int d : dims) {
        if (d < 0) throw LoadError("negative extent in '" + name + "'");
      }
      const Shape shape{dims[0], dims[1], dims[2], dims[3]};
      const std::uint64_t count = shape.numel();
      if ((offset + count) * sizeof(double) > payload) {
        throw LoadError("checkpoint payload truncated at '" + name + "'");
      }
      std::vector<double> values(count);
      std::memcpy(values.data(), bytes.data() + pos + offset * sizeof(double),
                  count * sizeof(double));
      a.arrays.emplace(name, Tensor(shape, std::move(values)));
      expected_offset += count;
    }
    if (expected_offset * sizeof(double) != payload) {
      throw LoadError("checkpoint payload has trailing bytes");
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  return a;
}

void Archive::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw LoadError("cannot write checkpoint '" + tmp + "'");
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw LoadError("short write to '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

const Tensor& Archive::array(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end()) {
    throw LoadError("checkpoint has no array '" + name + "'");
  }
  return it->second;
}

}  // namespace agesynth
