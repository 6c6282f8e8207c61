#include "semi2i/dataset.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "semi2i/errors.hpp"

namespace semi2i {

namespace fs = std::filesystem;
using nlohmann::json;

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "semi2i-manifest" || j.value("version", 0) != 1) {
    throw DataError("manifest " + path.string() + " is not a version-1 semi2i manifest");
  }
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  Manifest m;
  try {
    m.domain = j.value("domain", "");
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.image = resolve(e.at("image").get<std::string>());
      if (e.contains("label") && !e.at("label").is_null()) entry.label = resolve(e.at("label").get<std::string>());
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path abs = fs::absolute(p);
    const fs::path r = abs.lexically_relative(base);
    if (!r.empty() && *r.begin() != "..") return r.generic_string();
    return abs.generic_string();
  };
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json item{{"image", rel(e.image)}};
    if (e.label) item["label"] = rel(*e.label);
    entries.push_back(std::move(item));
  }
  const json j{{"format", "semi2i-manifest"}, {"version", 1}, {"domain", manifest.domain}, {"entries", entries}};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<LabeledImage> load_dataset(const Manifest& manifest) {
  std::vector<LabeledImage> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    LabeledImage item{e.image.stem().string(), read_png(e.image), std::nullopt};
    if (e.label) {
      item.label = read_label_png(*e.label);
      if (item.label->height != item.image.height || item.label->width != item.image.width) {
        throw DataError("label " + e.label->string() + " does not match image dimensions");
      }
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::pair<std::size_t, std::size_t> sample_pair(std::size_t size_a, std::size_t size_b, std::mt19937_64& rng) {
  if (size_a == 0 || size_b == 0) throw InvalidInput("sample_pair: empty dataset");
  std::uniform_int_distribution<std::size_t> da(0, size_a - 1);
  std::uniform_int_distribution<std::size_t> db(0, size_b - 1);
  const std::size_t i = da(rng);
  const std::size_t j = db(rng);
  return {i, j};
}

}  // namespace semi2i
