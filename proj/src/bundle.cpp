#include "bundle.hpp"

#include "repgeo/rgeo_format.hpp"

namespace repgeo::detail {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string array_file_name(const fs::path& header_path, const std::string& name) {
  fs::path stem = header_path.filename();
  if (stem.extension() == ".json") stem.replace_extension();
  return stem.string() + "." + name + ".rgeo";
}

}  // namespace

void write_bundle(const fs::path& path, const std::string& type, const Bundle& bundle) {
  json header = bundle.header;
  header["type"] = type;
  json arrays = json::object();
  for (const auto& [name, m] : bundle.arrays) {
    const std::string file = array_file_name(path, name);
    arrays[name] = {{"file", file}, {"rows", m.rows()}, {"cols", m.cols()}, {"dtype", "f64"}};
    write_rgeo_f64(path.parent_path() / file, m);
  }
  header["arrays"] = std::move(arrays);
  write_file_atomic(path, header.dump(2) + "\n");
}

Bundle read_bundle(const fs::path& path, const std::string& type) {
  Bundle b;
  try {
    b.header = json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(Errc::metadata_mismatch, path.string() + ": " + e.what());
  }
  const auto got = field<std::string>(b.header, "type", path);
  if (got != type) fail(Errc::metadata_mismatch, path.string() + ": expected a " + type + " file, found " + got);
  const auto arrays = field<json>(b.header, "arrays", path);
  for (const auto& [name, info] : arrays.items()) {
    const auto file = field<std::string>(info, "file", path);
    Matrix m = read_rgeo_f64(path.parent_path() / file);
    const auto rows = field<Eigen::Index>(info, "rows", path);
    const auto cols = field<Eigen::Index>(info, "cols", path);
    if (m.rows() != rows || m.cols() != cols) {
      fail(Errc::metadata_mismatch, path.string() + ": array '" + name + "' is " + std::to_string(m.rows()) + "x" +
                                        std::to_string(m.cols()) + ", header says " + std::to_string(rows) + "x" +
                                        std::to_string(cols));
    }
    b.arrays.emplace(name, std::move(m));
  }
  return b;
}

const Matrix& array(const Bundle& b, const std::string& name, const fs::path& path) {
  auto it = b.arrays.find(name);
  if (it == b.arrays.end()) fail(Errc::metadata_mismatch, path.string() + ": missing array '" + name + "'");
  return it->second;
}

}  // namespace repgeo::detail
