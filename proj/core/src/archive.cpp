#include "semi2i/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "semi2i/errors.hpp"

namespace semi2i {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'I', '2', 'I', 'A', 'R'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw InvalidCheckpoint("truncated archive " + path.string());
  }
  return v;
}

}  // namespace

const Tensor* Archive::find(const std::string& key) const {
  auto it = std::ranges::find_if(entries, [&](const NamedTensor& e) { return e.name == key; });
  return it == entries.end() ? nullptr : &it->tensor;
}

const Tensor& Archive::get(const std::string& key) const {
  const Tensor* t = find(key);
  if (!t) throw InvalidCheckpoint("archive has no entry '" + key + "'");
  return *t;
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write archive " + path.string());
    os.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(os, kArchiveVersion);
    put<std::uint64_t>(os, archive.metadata_json.size());
    os.write(archive.metadata_json.data(), static_cast<std::streamsize>(archive.metadata_json.size()));
    put<std::uint64_t>(os, archive.entries.size());
    for (const auto& e : archive.entries) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
      os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      const Shape& s = e.tensor.shape();
      put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
      for (int d : s) put<std::int32_t>(os, d);
      auto v = e.tensor.values();
      os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    if (!os) throw DataError("failed writing archive " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidCheckpoint("cannot open archive " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw InvalidCheckpoint(path.string() + " is not a semi2i archive");
  }
  const auto version = take<std::uint32_t>(is, path);
  if (version != kArchiveVersion) {
    throw InvalidCheckpoint("unsupported archive version " + std::to_string(version));
  }
  Archive a;
  const auto meta_len = take<std::uint64_t>(is, path);
  if (meta_len > (1u << 30)) throw InvalidCheckpoint("corrupt archive metadata length");
  a.metadata_json.resize(meta_len);
  if (!is.read(a.metadata_json.data(), static_cast<std::streamsize>(meta_len))) {
    throw InvalidCheckpoint("truncated archive " + path.string());
  }
  const auto count = take<std::uint64_t>(is, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto key_len = take<std::uint32_t>(is, path);
    if (key_len > 4096) throw InvalidCheckpoint("corrupt archive key length");
    std::string key(key_len, '\0');
    if (!is.read(key.data(), key_len)) throw InvalidCheckpoint("truncated archive " + path.string());
    const auto rank = take<std::uint32_t>(is, path);
    if (rank > 8) throw InvalidCheckpoint("corrupt archive rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = take<std::int32_t>(is, path);
      if (d < 0) throw InvalidCheckpoint("corrupt archive dimension");
    }
    std::vector<double> values(numel(shape));
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)))) {
      throw InvalidCheckpoint("truncated archive " + path.string());
    }
    a.add(std::move(key), Tensor(std::move(shape), std::move(values)));
  }
  return a;
}

void load_parameters(const Archive& archive, const ParameterList& params, const std::string& prefix) {
  for (const auto& p : params) {
    const Tensor& src = archive.get(prefix + p.name);
    if (src.shape() != p.tensor.shape()) {
      throw InvalidCheckpoint("shape mismatch for '" + p.name + "': archive " + to_string(src.shape()) +
                              ", model " + to_string(p.tensor.shape()));
    }
    Tensor dst = p.tensor;
    std::ranges::copy(src.values(), dst.mutable_values().begin());
  }
}

}  // namespace semi2i
