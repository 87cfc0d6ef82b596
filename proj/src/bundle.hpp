#pragma once

// Derived objects (subspaces, affine maps, axes) are stored as a JSON header
// plus one f64 RGEO file per array, named `<stem>.<array>.rgeo` next to the
// header and referenced from it by relative file name.

#include "repgeo/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace repgeo::detail {

struct Bundle {
  nlohmann::json header;
  std::map<std::string, Matrix> arrays;
};

void write_bundle(const std::filesystem::path& path, const std::string& type, const Bundle& bundle);

// Checks the "type" field and loads every referenced array.
Bundle read_bundle(const std::filesystem::path& path, const std::string& type);

// Wraps json access errors in metadata_mismatch.
template <typename T>
T field(const nlohmann::json& j, const char* key, const std::filesystem::path& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::metadata_mismatch, path.string() + ": field '" + key + "': " + e.what());
  }
}

const Matrix& array(const Bundle& b, const std::string& name, const std::filesystem::path& path);

}  // namespace repgeo::detail
