// SPDX-License-Identifier: Apache-2.0
//
// Run manifests: every output directory gets a manifest.json carrying the
// command, the fully resolved configuration, a dataset checksum, and the
// seed — enough to re-run the command bit-identically. Writes are atomic
// (temp file + rename) and carry no timestamps, so reruns produce
// byte-identical manifests too.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace dkps {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;             // argv joined for replay
  nlohmann::json config;           // resolved configuration
  std::string dataset_checksum;    // empty when no dataset involved
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
};

// FNV-1a 64-bit over the regular files of a dataset directory (sorted by
// relative name, hashing name then contents).
std::string dataset_checksum(const std::filesystem::path& dir);

void atomic_write(const std::filesystem::path& path, const std::string& contents);

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& manifest);

}  // namespace dkps
