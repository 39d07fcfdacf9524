#include "cngcf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cngcf/error.hpp"

namespace cngcf {

std::vector<std::uint32_t> rank_by_score(std::span<const double> scores,
                                         const std::vector<char>* excluded) {
    if (excluded != nullptr && excluded->size() != scores.size()) {
        throw InvalidInputError("rank_by_score: exclusion mask size mismatch");
    }
    std::vector<std::uint32_t> order;
    order.reserve(scores.size());
    for (std::uint32_t i = 0; i < scores.size(); ++i) {
        if (excluded == nullptr || !(*excluded)[i]) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&scores](std::uint32_t a, std::uint32_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    return order;
}

namespace {

void validate_ranking_inputs(std::span<const std::uint32_t> ranked,
                             std::span<const std::uint32_t> relevant, std::size_t k) {
    if (k < 1) throw InvalidInputError("top-k metrics: k must be >= 1");
    if (relevant.empty()) {
        throw InvalidInputError("top-k metrics: empty relevant set (caller must skip the user)");
    }
    std::unordered_set<std::uint32_t> seen;
    seen.reserve(ranked.size());
    for (std::uint32_t item : ranked) {
        if (!seen.insert(item).second) {
            throw InvalidInputError("top-k metrics: duplicate item " + std::to_string(item) +
                                    " in ranking");
        }
    }
}

bool is_relevant(std::span<const std::uint32_t> relevant, std::uint32_t item) {
    return std::binary_search(relevant.begin(), relevant.end(), item);
}

}  // namespace

std::pair<double, double> precision_recall_at_k(std::span<const std::uint32_t> ranked,
                                                std::span<const std::uint32_t> relevant,
                                                std::size_t k) {
    validate_ranking_inputs(ranked, relevant, k);
    const std::size_t depth = std::min(k, ranked.size());
    std::size_t hits = 0;
    for (std::size_t pos = 0; pos < depth; ++pos) {
        if (is_relevant(relevant, ranked[pos])) ++hits;
    }
    return {static_cast<double>(hits) / static_cast<double>(k),
            static_cast<double>(hits) / static_cast<double>(relevant.size())};
}

double ndcg_at_k(std::span<const std::uint32_t> ranked, std::span<const std::uint32_t> relevant,
                 std::size_t k) {
    validate_ranking_inputs(ranked, relevant, k);
    const std::size_t depth = std::min(k, ranked.size());
    double dcg = 0.0;
    for (std::size_t pos = 0; pos < depth; ++pos) {
        if (is_relevant(relevant, ranked[pos])) {
            dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
        }
    }
    const std::size_t ideal_hits = std::min(k, relevant.size());
    double idcg = 0.0;
    for (std::size_t pos = 0; pos < ideal_hits; ++pos) {
        idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
    }
    return dcg / idcg;
}

}  // namespace cngcf
