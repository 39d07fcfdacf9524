#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cngcf/graph.hpp"
#include "cngcf/metrics.hpp"
#include "cngcf/trainer.hpp"

namespace cngcf {

struct MetricRow {
    std::size_t k{0};
    double precision{0}, recall{0}, ndcg{0};
};

struct PerUserMetrics {
    std::uint32_t user{0};
    std::size_t k{0};
    double precision{0}, recall{0}, ndcg{0};
};

struct EvalReport {
    std::vector<MetricRow> averages;
    std::vector<PerUserMetrics> per_user;
    std::size_t users_evaluated{0};
    std::size_t users_skipped{0};  // users with no target interactions
    std::string config_hash;
    std::uint64_t seed{0};
    std::string dataset_manifest;

    std::string to_json() const;
    std::string to_table() const;  // aligned human-readable table
};

enum class EvalSplit { validation, test };

/// Top-K evaluation: for every user with target items, rank the full item
/// catalog minus the user's training items and average Precision/Recall/NDCG
/// at each K. Deterministic given model and split.
EvalReport evaluate(const TrainedModel& model, const InteractionGraph& graph,
                    const SplitDataset& splits, EvalSplit which, std::span<const std::size_t> ks);

// ---------------------------------------------------------------------------
// ablations & sweeps
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string variant;
    double precision10{0}, recall10{0}, ndcg10{0};
    double delta_precision10{0}, delta_recall10{0}, delta_ndcg10{0};  // variant - full
};

struct AblationTable {
    std::vector<AblationRow> rows;
    std::string csv() const;
};

/// Trains and evaluates each requested variant under the same seed and base
/// configuration. Known variants: cngcf (always included first), no_messages,
/// no_counterfactual, gcn, mf. Deltas are against the full model.
AblationTable run_ablations(const InteractionGraph& graph, const SplitDataset& splits,
                            const TrainConfig& base, std::span<const std::string> variants);

/// One train/evaluate run per value; axis is "dropout" or "embedding_size"
/// (the semi-implicit hidden width). Returns CSV
/// `value,precision@10,recall@10,ndcg@10`.
std::string sweep(const InteractionGraph& graph, const SplitDataset& splits,
                  const TrainConfig& base, const std::string& axis,
                  std::span<const double> values, std::size_t jobs = 1);

}  // namespace cngcf
