#include "repgeo/vocab_stats.hpp"

#include "repgeo/common.hpp"
#include "repgeo/rgeo_format.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace repgeo {
namespace fs = std::filesystem;
using nlohmann::json;

TokenCounts read_token_counts(const fs::path& path) {
  const std::string text = read_file(path);
  TokenCounts c;
  bool have_total = false;
  if (path.extension() == ".json") {
    try {
      const json j = json::parse(text);
      c.total = j.at("total").get<std::int64_t>();
      have_total = true;
      for (const auto& [k, v] : j.at("counts").items()) c.counts[std::stoll(k)] = v.get<std::int64_t>();
    } catch (const std::exception& e) {
      fail(Errc::metadata_mismatch, path.string() + ": " + e.what());
    }
  } else {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line == "token_id,count") continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) fail(Errc::metadata_mismatch, path.string() + ":" + std::to_string(lineno) + ": expected two fields");
      const std::string key = line.substr(0, comma);
      try {
        const std::int64_t value = std::stoll(line.substr(comma + 1));
        if (key == "total") {
          c.total = value;
          have_total = true;
        } else {
          c.counts[std::stoll(key)] = value;
        }
      } catch (const std::logic_error&) {
        fail(Errc::metadata_mismatch, path.string() + ":" + std::to_string(lineno) + ": not an integer");
      }
    }
  }
  if (!have_total) fail(Errc::metadata_mismatch, path.string() + ": missing total");
  return c;
}

void write_token_counts(const TokenCounts& c, const fs::path& path) {
  if (path.extension() == ".json") {
    json counts = json::object();
    for (const auto& [k, v] : c.counts) counts[std::to_string(k)] = v;
    write_file_atomic(path, json{{"total", c.total}, {"counts", counts}}.dump() + "\n");
    return;
  }
  std::ostringstream out;
  out << "token_id,count\n";
  for (const auto& [k, v] : c.counts) out << k << ',' << v << '\n';
  out << "total," << c.total << '\n';
  write_file_atomic(path, out.str());
}

VocabSet build_vocab(const std::map<TokenId, std::int64_t>& counts, std::int64_t total, double threshold,
                     const std::string& language) {
  if (total <= 0) fail(Errc::invalid_argument, "vocabulary total must be positive, got " + std::to_string(total));
  VocabSet v;
  v.language = language;
  v.threshold = threshold;
  v.corpus_tokens = total;
  const double denom = static_cast<double>(total);
  for (const auto& [token, count] : counts) {
    if (count > 0 && static_cast<double>(count) / denom >= threshold) v.token_ids.insert(token);
  }
  return v;
}

TokenSet common_tokens(std::span<const VocabSet> vocabs, double fraction) {
  if (vocabs.empty()) fail(Errc::invalid_argument, "common_tokens needs at least one vocabulary");
  // The small slack keeps e.g. 0.9 * 10 from rounding up to 10.
  const auto need = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(vocabs.size()) - 1e-9));
  std::map<TokenId, std::size_t> seen;
  for (const auto& v : vocabs)
    for (TokenId t : v.token_ids) ++seen[t];
  TokenSet out;
  for (const auto& [t, n] : seen) {
    if (n >= need) out.insert(t);
  }
  return out;
}

ProportionReport token_proportions(std::span<const TokenId> preds, const VocabSet& v_eval, const VocabSet& v_target,
                                   const TokenSet& common) {
  if (preds.empty()) fail(Errc::invalid_argument, "token_proportions needs at least one prediction");
  std::size_t n_common = 0, n_both = 0, n_eval = 0, n_target = 0, n_other = 0;
  for (TokenId t : preds) {
    const bool in_eval = v_eval.token_ids.count(t) > 0;
    const bool in_target = v_target.token_ids.count(t) > 0;
    if (common.count(t) > 0) {
      ++n_common;
    } else if (in_eval && in_target) {
      ++n_both;
    } else if (in_eval) {
      ++n_eval;
    } else if (in_target) {
      ++n_target;
    } else {
      ++n_other;
    }
  }
  const double n = static_cast<double>(preds.size());
  ProportionReport r;
  r.eval_language = v_eval.language;
  r.target_language = v_target.language;
  r.n_predictions = preds.size();
  r.p_common = static_cast<double>(n_common) / n;
  r.p_both = static_cast<double>(n_both) / n;
  r.p_eval_only = static_cast<double>(n_eval) / n;
  r.p_target_only = static_cast<double>(n_target) / n;
  r.p_other = static_cast<double>(n_other) / n;
  r.p_eval = (static_cast<double>(n_eval) + 0.5 * static_cast<double>(n_both)) / n;
  r.p_target = (static_cast<double>(n_target) + 0.5 * static_cast<double>(n_both)) / n;
  return r;
}

GeometricSummary geometric_mean_ratio(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) fail(Errc::invalid_argument, "geometric_mean_ratio needs at least one pair");
  std::vector<double> logs;
  logs.reserve(pairs.size());
  for (const auto& [projected, baseline] : pairs) {
    if (!(projected > 0.0) || !(baseline > 0.0)) {
      fail(Errc::invalid_argument, "perplexities must be positive, got (" + format_double(projected) + ", " +
                                       format_double(baseline) + ")");
    }
    logs.push_back(std::log(projected) - std::log(baseline));
  }
  double sum = 0.0;
  for (double l : logs) sum += l;
  const double mean = sum / static_cast<double>(logs.size());
  double ss = 0.0;
  for (double l : logs) ss += (l - mean) * (l - mean);
  const double sd = std::sqrt(ss / static_cast<double>(logs.size()));
  return {std::exp(mean), std::exp(sd)};
}

}  // namespace repgeo
