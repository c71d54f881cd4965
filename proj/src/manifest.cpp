// SPDX-License-Identifier: Apache-2.0

#include "dkps/manifest.hpp"

#include <algorithm>
#include <fstream>

#include "dkps/csv.hpp"
#include "dkps/errors.hpp"

namespace dkps {

namespace fs = std::filesystem;

namespace {

void fnv1a(std::uint64_t& hash, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001B3ULL;
  }
}

}  // namespace

std::string dataset_checksum(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) files.push_back(entry.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (const fs::path& file : files) {
    const std::string name = file.filename().string();
    fnv1a(hash, name.data(), name.size());
    const std::string contents = read_text_file(file);
    fnv1a(hash, contents.data(), contents.size());
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

void atomic_write(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_manifest(const fs::path& out_dir, const RunManifest& manifest) {
  nlohmann::json doc;
  doc["schema"] = "dkps.manifest.v1";
  doc["tool_version"] = kToolVersion;
  doc["command"] = manifest.command;
  doc["config"] = manifest.config;
  doc["dataset_checksum"] = manifest.dataset_checksum;
  doc["seed"] = manifest.seed;
  doc["outputs"] = manifest.outputs;
  atomic_write(out_dir / "manifest.json", doc.dump(2) + "\n");
}

}  // namespace dkps
