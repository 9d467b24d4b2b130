#include "nppc/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>

#include "nppc/errors.hpp"

namespace nppc {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(content);
}

nlohmann::json RunManifest::hashed() const {
  return {{"command", command}, {"seed", seed}, {"params", params}, {"inputs", inputs}};
}

std::string RunManifest::hash() const { return sha256_hex(hashed().dump()); }

std::string RunManifest::dump() const {
  nlohmann::json j = hashed();
  j["workers"] = workers;
  j["sha256"] = hash();
  return j.dump(2) + "\n";
}

RunManifest RunManifest::parse(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("manifest must be a JSON object");
  RunManifest m;
  try {
    if (j.contains("command")) m.command = j.at("command").get<std::string>();
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("workers")) m.workers = j.at("workers").get<int>();
    if (j.contains("params")) m.params = j.at("params");
    if (j.contains("inputs")) m.inputs = j.at("inputs");
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("manifest field has the wrong type: ") + e.what());
  }
  if (!m.params.is_object()) throw UsageError("manifest params must be an object");
  return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open manifest " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text);
}

}  // namespace nppc
