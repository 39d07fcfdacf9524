#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cngcf/rng.hpp"
#include "cngcf/tensor.hpp"

namespace cngcf {

/// Per-user CSR over item ids with set semantics: items are sorted and
/// de-duplicated within each user.
class InteractionSet {
  public:
    InteractionSet() = default;
    InteractionSet(std::size_t n_users, std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs);

    std::size_t n_users() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    std::span<const std::uint32_t> items_of(std::uint32_t user) const;
    bool contains(std::uint32_t user, std::uint32_t item) const;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs() const;

  private:
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> items_;
};

/// User/item interaction graph with per-node causal adjacency vectors.
/// Node ids are global: users occupy [0, n_users), items
/// [n_users, n_users + n_items). Adjacency lists hold global ids, so a
/// user's causal parents may be users and/or items.
struct InteractionGraph {
    std::size_t n_users{0};
    std::size_t n_items{0};
    Tensor user_features;  // n_users x d_fu
    Tensor item_features;  // n_items x d_fv
    InteractionSet interactions;
    std::vector<std::vector<std::uint32_t>> user_causal_adj;
    std::vector<std::vector<std::uint32_t>> item_causal_adj;
    std::vector<std::string> user_ids;  // dense id -> original id
    std::vector<std::string> item_ids;

    std::size_t n_nodes() const { return n_users + n_items; }
    std::uint32_t item_node(std::uint32_t item) const {
        return static_cast<std::uint32_t>(n_users) + item;
    }
    std::size_t user_degree(std::uint32_t user) const { return interactions.items_of(user).size(); }
    std::vector<std::size_t> item_degrees() const;

    /// Throws DataError on any violated structural invariant.
    void validate() const;
};

bool graph_equal(const InteractionGraph& a, const InteractionGraph& b);

// ---------------------------------------------------------------------------
// ingestion
// ---------------------------------------------------------------------------

struct IngestOptions {
    std::filesystem::path interactions;
    std::optional<std::filesystem::path> user_features;
    std::optional<std::filesystem::path> item_features;
    std::optional<std::filesystem::path> user_neighbors;
    std::optional<std::filesystem::path> item_neighbors;
    double rating_threshold{3.0};
};

/// Reads raw interaction logs. Keeps interactions with rating strictly above
/// the threshold; the node universe is every id appearing in the
/// interactions file. Ids are remapped to dense 0-based indices (numeric
/// order when all ids of a namespace parse as integers, lexicographic
/// otherwise); originals are kept in the side tables. Nodes missing from a
/// feature file get zero features; without a feature file nodes get one-hot
/// identity features. Neighbor-file values may carry a `u:` or `i:`
/// namespace prefix; unprefixed values take the file's own namespace.
InteractionGraph ingest(const IngestOptions& options);

/// Fills causal adjacency from co-interactions: a user's neighbors are all
/// users sharing at least one item plus the user's interacted items; an
/// item's neighbors are all items sharing at least one user plus the item's
/// interacting users. Lists are capped at `max_neighbors` by highest
/// co-count first (a direct user-item edge counts 1), ties by ascending
/// global id. The cap applies per node, so capped lists need not stay
/// symmetric.
void derive_co_interaction_neighbors(InteractionGraph& graph, std::size_t max_neighbors = 50);

/// Iteratively removes users and items with degree < k until a fixed point;
/// the result is empty or every node has degree >= k. Features, adjacency
/// and id tables are filtered and reindexed. k >= 1.
InteractionGraph k_core_filter(const InteractionGraph& graph, std::size_t k);

/// |interactions| / (n_users * n_items).
double density(const InteractionGraph& graph);

// ---------------------------------------------------------------------------
// splits
// ---------------------------------------------------------------------------

struct SplitRatios {
    double train{0.7};
    double validation{0.1};
    double test{0.2};
};

struct SplitDataset {
    InteractionSet train;
    InteractionSet validation;
    InteractionSet test;
};

/// Per-user stratified split by largest-remainder apportionment of each
/// user's shuffled items (ties favour train, then validation). Every user
/// with >= 3 interactions lands in train. Deterministic under the stream's
/// seed regardless of user iteration order.
SplitDataset split(const InteractionGraph& graph, const SplitRatios& ratios,
                   const RngStream& rng);

// ---------------------------------------------------------------------------
// canonical dump
// ---------------------------------------------------------------------------

struct DumpInfo {
    double rating_threshold{3.0};
    std::size_t k_core{0};
    std::uint64_t seed{0};
    std::string source{"ingested"};  // "ingested" | "synthetic"
    std::string extra_manifest_json; // serialized object merged into the manifest
};

/// Writes interactions/features/neighbors CSVs plus manifest.json. Emission
/// is fully deterministic: same graph + info, same bytes.
void write_canonical_dump(const InteractionGraph& graph, const std::filesystem::path& dir,
                          const DumpInfo& info);

struct LoadedDump {
    InteractionGraph graph;
    DumpInfo info;
};

LoadedDump load_canonical_dump(const std::filesystem::path& dir);

}  // namespace cngcf
