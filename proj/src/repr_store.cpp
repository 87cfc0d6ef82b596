#include "repgeo/repr_store.hpp"

#include "repgeo/rgeo_format.hpp"
#include "repgeo/rng.hpp"

#include <json.hpp>

#include <numeric>

namespace repgeo {
namespace fs = std::filesystem;
using nlohmann::json;

void ReprMatrix::validate() const {
  if (static_cast<Eigen::Index>(meta.size()) != data.rows()) {
    fail(Errc::metadata_mismatch, "metadata has " + std::to_string(meta.size()) + " records for " +
                                      std::to_string(data.rows()) + " rows");
  }
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const auto& r = meta[i];
    if (r.layer < 0 || r.layer > kMaxLayer) {
      fail(Errc::invalid_argument, "row " + std::to_string(i) + ": layer " + std::to_string(r.layer) + " out of range");
    }
    if (r.position < 0 || r.position > kMaxPosition) {
      fail(Errc::invalid_argument,
           "row " + std::to_string(i) + ": position " + std::to_string(r.position) + " out of range");
    }
  }
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (!data.row(i).allFinite()) fail(Errc::non_finite, "non-finite values in row " + std::to_string(i));
  }
}

ReprMatrix make_repr(FloatRows data, const std::string& language, int layer, std::vector<int> positions,
                     std::vector<std::int64_t> token_ids) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (!positions.empty() && positions.size() != n) {
    fail(Errc::metadata_mismatch, "positions size " + std::to_string(positions.size()) + " != rows " + std::to_string(n));
  }
  if (!token_ids.empty() && token_ids.size() != n) {
    fail(Errc::metadata_mismatch, "token_ids size " + std::to_string(token_ids.size()) + " != rows " + std::to_string(n));
  }
  ReprMatrix m;
  m.data = std::move(data);
  m.meta.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.meta[i].language = language;
    m.meta[i].layer = layer;
    m.meta[i].position = positions.empty() ? static_cast<int>(i % (kMaxPosition + 1)) : positions[i];
    m.meta[i].token_id = token_ids.empty() ? static_cast<std::int64_t>(i) : token_ids[i];
  }
  return m;
}

fs::path sidecar_path(const fs::path& path) {
  fs::path p = path;
  p += ".meta.json";
  return p;
}

void write_repr_matrix(const ReprMatrix& m, const fs::path& path) {
  m.validate();
  std::string language;
  int layer = 0;
  if (!m.meta.empty()) {
    language = m.meta.front().language;
    layer = m.meta.front().layer;
    for (std::size_t i = 1; i < m.meta.size(); ++i) {
      if (m.meta[i].language != language || m.meta[i].layer != layer) {
        fail(Errc::metadata_mismatch, "row " + std::to_string(i) + " has language/layer " + m.meta[i].language + "/" +
                                          std::to_string(m.meta[i].layer) + ", file holds " + language + "/" +
                                          std::to_string(layer));
      }
    }
  }
  json side;
  side["language"] = language;
  side["layer"] = layer;
  auto positions = json::array();
  auto token_ids = json::array();
  for (const auto& r : m.meta) {
    positions.push_back(r.position);
    token_ids.push_back(r.token_id);
  }
  side["positions"] = std::move(positions);
  side["token_ids"] = std::move(token_ids);
  if (m.has_pos_tags) {
    auto tags = json::array();
    for (const auto& r : m.meta) tags.push_back(r.pos_tags);
    side["pos_tags"] = std::move(tags);
  }
  side["source"] = m.source;
  if (m.seed) side["seed"] = *m.seed;

  write_rgeo_f32(path, m.data);
  write_file_atomic(sidecar_path(path), side.dump() + "\n");
}

ReprMatrix read_repr_matrix(const fs::path& path) {
  ReprMatrix m;
  m.data = read_rgeo_f32(path);
  const auto n = static_cast<std::size_t>(m.data.rows());

  const fs::path side_path = sidecar_path(path);
  if (!fs::exists(side_path)) fail(Errc::not_found, "missing metadata sidecar " + side_path.string());
  json side;
  try {
    side = json::parse(read_file(side_path));
    const auto language = side.at("language").get<std::string>();
    const int layer = side.at("layer").get<int>();
    const auto& positions = side.at("positions");
    const auto& token_ids = side.at("token_ids");
    if (positions.size() != n || token_ids.size() != n) {
      fail(Errc::metadata_mismatch, side_path.string() + ": " + std::to_string(positions.size()) + " positions and " +
                                        std::to_string(token_ids.size()) + " token ids for " + std::to_string(n) +
                                        " rows");
    }
    m.meta.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      m.meta[i].language = language;
      m.meta[i].layer = layer;
      m.meta[i].position = positions[i].get<int>();
      m.meta[i].token_id = token_ids[i].get<std::int64_t>();
    }
    if (auto it = side.find("pos_tags"); it != side.end() && !it->is_null()) {
      if (it->size() != n) {
        fail(Errc::metadata_mismatch,
             side_path.string() + ": " + std::to_string(it->size()) + " pos_tags entries for " + std::to_string(n) + " rows");
      }
      m.has_pos_tags = true;
      for (std::size_t i = 0; i < n; ++i) m.meta[i].pos_tags = (*it)[i].get<std::vector<std::string>>();
    }
    m.source = side.value("source", std::string{});
    if (auto it = side.find("seed"); it != side.end() && !it->is_null()) m.seed = it->get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(Errc::metadata_mismatch, side_path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed) {
  if (count > n) {
    fail(Errc::invalid_argument, "cannot sample " + std::to_string(count) + " rows from " + std::to_string(n));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  CounterRng rng(seed);
  // Partial Fisher-Yates: the first `count` slots hold the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

ReprMatrix select_rows(const ReprMatrix& m, std::span<const std::size_t> indices) {
  ReprMatrix out;
  out.data.resize(static_cast<Eigen::Index>(indices.size()), m.dim());
  out.meta.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(indices[i]);
    if (src >= m.rows()) fail(Errc::invalid_argument, "row index " + std::to_string(src) + " out of range");
    out.data.row(static_cast<Eigen::Index>(i)) = m.data.row(src);
    out.meta.push_back(m.meta[indices[i]]);
  }
  out.has_pos_tags = m.has_pos_tags;
  out.source = m.source;
  out.seed = m.seed;
  return out;
}

ReprMatrix sample_rows(const ReprMatrix& m, std::size_t count, std::uint64_t seed) {
  const auto idx = sample_indices(static_cast<std::size_t>(m.rows()), count, seed);
  ReprMatrix out = select_rows(m, idx);
  out.seed = seed;
  return out;
}

ReprMatrix concat_rows(std::span<const ReprMatrix> parts) {
  ReprMatrix out;
  if (parts.empty()) return out;
  Eigen::Index n = 0;
  const Eigen::Index d = parts.front().dim();
  bool tags = true;
  for (const auto& p : parts) {
    require_dims(p.dim(), d, "concat_rows");
    n += p.rows();
    tags = tags && p.has_pos_tags;
  }
  out.data.resize(n, d);
  out.meta.reserve(static_cast<std::size_t>(n));
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.data.middleRows(at, p.rows()) = p.data;
    at += p.rows();
    out.meta.insert(out.meta.end(), p.meta.begin(), p.meta.end());
  }
  out.has_pos_tags = tags;
  out.source = parts.front().source;
  return out;
}

}  // namespace repgeo
