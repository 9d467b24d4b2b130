#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace nppc {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Effective configuration of one CLI run. Keys are kept sorted, so the dump
/// is canonical.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  int workers = 1;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();  // input name -> sha256 of its content

  /// Everything that determines the outputs: command, seed, params and inputs.
  nlohmann::json hashed() const;
  std::string hash() const;
  /// Written beside the outputs; the output directory is implied by the location.
  std::string dump() const;

  static RunManifest parse(std::string_view text);
  static RunManifest load(const std::filesystem::path& path);
};

}  // namespace nppc
