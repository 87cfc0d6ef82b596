#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace repgeo {

using TokenId = std::int64_t;
using TokenSet = std::set<TokenId>;

struct TokenCounts {
  std::map<TokenId, std::int64_t> counts;
  std::int64_t total = 0;
};

// CSV "token_id,count" rows plus a "total,<n>" line, or JSON
// {"total": n, "counts": {"<id>": count, ...}}; chosen by extension.
TokenCounts read_token_counts(const std::filesystem::path& path);
void write_token_counts(const TokenCounts& c, const std::filesystem::path& path);

struct VocabSet {
  std::string language;
  TokenSet token_ids;
  double threshold = 1e-6;
  std::int64_t corpus_tokens = 0;
};

inline constexpr double kDefaultVocabThreshold = 1e-6;
inline constexpr double kDefaultCommonFraction = 0.9;

// Tokens with count / total >= threshold.
VocabSet build_vocab(const std::map<TokenId, std::int64_t>& counts, std::int64_t total,
                     double threshold = kDefaultVocabThreshold, const std::string& language = {});

// Tokens present in at least ceil(fraction * vocabs.size()) vocabularies.
TokenSet common_tokens(std::span<const VocabSet> vocabs, double fraction = kDefaultCommonFraction);

// Predicted tokens fall into exactly one bucket, in precedence order
// common > both (eval and target) > eval only > target only > other.
// p_eval and p_target each absorb half of the "both" bucket, so
// p_eval + p_target + p_common + p_other = 1.
struct ProportionReport {
  std::string eval_language;
  std::string target_language;
  double p_eval = 0.0;
  double p_target = 0.0;
  double p_common = 0.0;
  double p_other = 0.0;
  double p_both = 0.0;
  double p_eval_only = 0.0;
  double p_target_only = 0.0;
  std::size_t n_predictions = 0;
};

ProportionReport token_proportions(std::span<const TokenId> preds, const VocabSet& v_eval, const VocabSet& v_target,
                                   const TokenSet& common);

struct GeometricSummary {
  double mean = 1.0;
  double gsd = 1.0;
};

// exp(mean(ln(projected / baseline))) and exp(population stddev of those logs).
GeometricSummary geometric_mean_ratio(std::span<const std::pair<double, double>> pairs);

}  // namespace repgeo
