#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace cngcf {

/// Item ids sorted by descending score, ties by ascending id. Ids flagged in
/// `excluded` (when given, sized like `scores`) are dropped from the ranking.
std::vector<std::uint32_t> rank_by_score(std::span<const double> scores,
                                         const std::vector<char>* excluded = nullptr);

/// precision = |top-k intersect relevant| / k,
/// recall    = |top-k intersect relevant| / |relevant|.
/// `ranked` must be duplicate-free, `relevant` sorted ascending and nonempty,
/// k >= 1.
std::pair<double, double> precision_recall_at_k(std::span<const std::uint32_t> ranked,
                                                std::span<const std::uint32_t> relevant,
                                                std::size_t k);

/// Binary-relevance NDCG with 1/log2(i+1) position discount; the ideal DCG
/// uses min(k, |relevant|) hits.
double ndcg_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> relevant,
                 std::size_t k);

}  // namespace cngcf
