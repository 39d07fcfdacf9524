#include "cngcf/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "cngcf/csv.hpp"
#include "cngcf/error.hpp"
#include "cngcf/log.hpp"
#include "cngcf/util.hpp"

namespace cngcf {

using nlohmann::json;

// --------------------------------------------------------------------------
// InteractionSet
// --------------------------------------------------------------------------

InteractionSet::InteractionSet(std::size_t n_users,
                               std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    offsets_.assign(n_users + 1, 0);
    items_.reserve(pairs.size());
    for (const auto& [user, item] : pairs) {
        if (user >= n_users) {
            throw DataError("interaction references user " + std::to_string(user) +
                            " outside [0," + std::to_string(n_users) + ")");
        }
        offsets_[user + 1] += 1;
        items_.push_back(item);
    }
    for (std::size_t u = 0; u < n_users; ++u) offsets_[u + 1] += offsets_[u];
}

std::span<const std::uint32_t> InteractionSet::items_of(std::uint32_t user) const {
    if (user + 1 >= offsets_.size()) return {};
    return std::span<const std::uint32_t>(items_.data() + offsets_[user],
                                          offsets_[user + 1] - offsets_[user]);
}

bool InteractionSet::contains(std::uint32_t user, std::uint32_t item) const {
    const auto items = items_of(user);
    return std::binary_search(items.begin(), items.end(), item);
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> InteractionSet::pairs() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    out.reserve(items_.size());
    for (std::size_t u = 0; u + 1 < offsets_.size(); ++u) {
        for (std::size_t k = offsets_[u]; k < offsets_[u + 1]; ++k) {
            out.emplace_back(static_cast<std::uint32_t>(u), items_[k]);
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// InteractionGraph
// --------------------------------------------------------------------------

std::vector<std::size_t> InteractionGraph::item_degrees() const {
    std::vector<std::size_t> deg(n_items, 0);
    for (std::uint32_t u = 0; u < n_users; ++u) {
        for (std::uint32_t i : interactions.items_of(u)) deg[i] += 1;
    }
    return deg;
}

void InteractionGraph::validate() const {
    if (interactions.n_users() != n_users) {
        throw DataError("interaction set sized for " + std::to_string(interactions.n_users()) +
                        " users, graph has " + std::to_string(n_users));
    }
    for (std::uint32_t u = 0; u < n_users; ++u) {
        for (std::uint32_t i : interactions.items_of(u)) {
            if (i >= n_items) {
                throw DataError("interaction (" + std::to_string(u) + "," + std::to_string(i) +
                                ") references invalid item");
            }
        }
    }
    if (user_ids.size() != n_users || item_ids.size() != n_items) {
        throw DataError("id side tables do not match node counts");
    }
    if (user_causal_adj.size() != n_users || item_causal_adj.size() != n_items) {
        throw DataError("causal adjacency lists do not match node counts");
    }
    auto check_adj = [this](const std::vector<std::uint32_t>& adj, std::uint32_t self,
                            const char* kind) {
        std::unordered_set<std::uint32_t> seen;
        for (std::uint32_t gid : adj) {
            if (gid >= n_nodes()) {
                throw DataError(std::string(kind) + " adjacency references unknown node " +
                                std::to_string(gid));
            }
            if (gid == self) {
                throw DataError(std::string(kind) + " adjacency contains a self-loop at node " +
                                std::to_string(self));
            }
            if (!seen.insert(gid).second) {
                throw DataError(std::string(kind) + " adjacency contains duplicates at node " +
                                std::to_string(self));
            }
        }
    };
    for (std::uint32_t u = 0; u < n_users; ++u) check_adj(user_causal_adj[u], u, "user");
    for (std::uint32_t i = 0; i < n_items; ++i) check_adj(item_causal_adj[i], item_node(i), "item");
    if (user_features.defined() &&
        (user_features.rank() != 2 || user_features.rows() != n_users)) {
        throw DataError("user feature matrix shape does not match user count");
    }
    if (item_features.defined() &&
        (item_features.rank() != 2 || item_features.rows() != n_items)) {
        throw DataError("item feature matrix shape does not match item count");
    }
    if (!user_features.all_finite() || !item_features.all_finite()) {
        throw DataError("feature matrices contain non-finite values");
    }
}

bool graph_equal(const InteractionGraph& a, const InteractionGraph& b) {
    if (a.n_users != b.n_users || a.n_items != b.n_items) return false;
    if (a.user_ids != b.user_ids || a.item_ids != b.item_ids) return false;
    if (a.interactions.pairs() != b.interactions.pairs()) return false;
    if (a.user_causal_adj != b.user_causal_adj || a.item_causal_adj != b.item_causal_adj) {
        return false;
    }
    auto tensors_equal = [](const Tensor& x, const Tensor& y) {
        if (x.shape() != y.shape()) return false;
        const auto xd = x.data();
        const auto yd = y.data();
        for (std::size_t i = 0; i < xd.size(); ++i) {
            if (xd[i] != yd[i]) return false;
        }
        return true;
    };
    return tensors_equal(a.user_features, b.user_features) &&
           tensors_equal(a.item_features, b.item_features);
}

// --------------------------------------------------------------------------
// ingest
// --------------------------------------------------------------------------

namespace {

bool parses_as_uint(const std::string& s, std::uint64_t& out) {
    if (s.empty()) return false;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

// Dense remap: numeric order when every id parses as an integer (ties by
// string), lexicographic otherwise.
std::vector<std::string> ordered_universe(const std::unordered_set<std::string>& ids) {
    std::vector<std::string> out(ids.begin(), ids.end());
    bool all_numeric = true;
    for (const std::string& s : out) {
        std::uint64_t v = 0;
        if (!parses_as_uint(s, v)) {
            all_numeric = false;
            break;
        }
    }
    if (all_numeric) {
        std::sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
            std::uint64_t va = 0, vb = 0;
            parses_as_uint(a, va);
            parses_as_uint(b, vb);
            return va != vb ? va < vb : a < b;
        });
    } else {
        std::sort(out.begin(), out.end());
    }
    return out;
}

using IdMap = std::unordered_map<std::string, std::uint32_t>;

IdMap build_id_map(const std::vector<std::string>& ordered) {
    IdMap map;
    map.reserve(ordered.size());
    for (std::uint32_t i = 0; i < ordered.size(); ++i) map[ordered[i]] = i;
    return map;
}

Tensor read_feature_matrix(const std::filesystem::path& path, const IdMap& ids,
                           std::size_t n_rows, const std::string& what) {
    const CsvFile csv = read_csv(path);
    if (csv.header.size() < 2 || csv.header[0] != "id") {
        throw DataError(path.string() + ": expected header id,f1,... for " + what);
    }
    const std::size_t width = csv.header.size() - 1;
    std::vector<double> data(n_rows * width, 0.0);
    std::vector<char> seen(n_rows, 0);
    for (const CsvRow& row : csv.rows) {
        const std::string where = path.string() + " line " + std::to_string(row.line_number);
        if (row.fields.size() != csv.header.size()) {
            throw DataError(where + ": expected " + std::to_string(csv.header.size()) +
                            " columns, got " + std::to_string(row.fields.size()));
        }
        const auto it = ids.find(row.fields[0]);
        if (it == ids.end()) {
            throw DataError(where + ": unknown id '" + row.fields[0] + "' in " + what);
        }
        if (seen[it->second]) throw DataError(where + ": duplicate id '" + row.fields[0] + "'");
        seen[it->second] = 1;
        for (std::size_t f = 0; f < width; ++f) {
            data[it->second * width + f] = parse_double(row.fields[f + 1], where);
        }
    }
    return Tensor::from_vector({n_rows, width}, std::move(data));
}

Tensor one_hot_features(std::size_t n) {
    std::vector<double> data(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
    return Tensor::from_vector({n, n}, std::move(data));
}

// "u:x" / "i:y" / bare value in the file's own namespace -> global node id.
std::uint32_t resolve_node(const std::string& token, const IdMap& users, const IdMap& items,
                           std::size_t n_users, bool default_is_user, const std::string& where) {
    std::string value = token;
    bool is_user = default_is_user;
    if (token.rfind("u:", 0) == 0) {
        is_user = true;
        value = token.substr(2);
    } else if (token.rfind("i:", 0) == 0) {
        is_user = false;
        value = token.substr(2);
    }
    const IdMap& map = is_user ? users : items;
    const auto it = map.find(value);
    if (it == map.end()) {
        throw DataError(where + ": unknown " + (is_user ? "user" : "item") + " id '" + value + "'");
    }
    return is_user ? it->second : static_cast<std::uint32_t>(n_users) + it->second;
}

void read_neighbor_file(const std::filesystem::path& path, const IdMap& users, const IdMap& items,
                        std::size_t n_users, bool file_is_user_side,
                        std::vector<std::vector<std::uint32_t>>& adjacency) {
    const CsvFile csv = read_csv(path);
    if (csv.header.size() != 2) {
        throw DataError(path.string() + ": expected header id,neighbor_id");
    }
    for (const CsvRow& row : csv.rows) {
        const std::string where = path.string() + " line " + std::to_string(row.line_number);
        if (row.fields.size() != 2) {
            throw DataError(where + ": expected 2 columns, got " +
                            std::to_string(row.fields.size()));
        }
        const IdMap& own = file_is_user_side ? users : items;
        const auto self_it = own.find(row.fields[0]);
        if (self_it == own.end()) {
            throw DataError(where + ": unknown " + (file_is_user_side ? "user" : "item") +
                            " id '" + row.fields[0] + "'");
        }
        const std::uint32_t self_global =
            file_is_user_side ? self_it->second
                              : static_cast<std::uint32_t>(n_users) + self_it->second;
        const std::uint32_t neighbor =
            resolve_node(row.fields[1], users, items, n_users, file_is_user_side, where);
        if (neighbor == self_global) continue;  // self-loops dropped
        adjacency[self_it->second].push_back(neighbor);
    }
    for (auto& list : adjacency) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
}

}  // namespace

InteractionGraph ingest(const IngestOptions& options) {
    const CsvFile csv = read_csv(options.interactions);
    if (csv.header.size() < 3 || csv.header[0] != "user_id" || csv.header[1] != "item_id" ||
        csv.header[2] != "rating") {
        throw DataError(options.interactions.string() +
                        ": expected header user_id,item_id,rating[,timestamp]");
    }

    struct RawRow {
        std::string user, item;
        double rating;
    };
    std::vector<RawRow> raw;
    raw.reserve(csv.rows.size());
    std::unordered_set<std::string> user_universe, item_universe;
    for (const CsvRow& row : csv.rows) {
        const std::string where =
            options.interactions.string() + " line " + std::to_string(row.line_number);
        if (row.fields.size() != 3 && row.fields.size() != 4) {
            throw DataError(where + ": expected 3 columns (plus optional timestamp), got " +
                            std::to_string(row.fields.size()));
        }
        RawRow r{row.fields[0], row.fields[1], parse_double(row.fields[2], where)};
        user_universe.insert(r.user);
        item_universe.insert(r.item);
        raw.push_back(std::move(r));
    }
    if (raw.empty()) throw DataError(options.interactions.string() + ": no interaction rows");

    InteractionGraph graph;
    graph.user_ids = ordered_universe(user_universe);
    graph.item_ids = ordered_universe(item_universe);
    graph.n_users = graph.user_ids.size();
    graph.n_items = graph.item_ids.size();
    const IdMap user_map = build_id_map(graph.user_ids);
    const IdMap item_map = build_id_map(graph.item_ids);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> positives;
    for (const RawRow& r : raw) {
        if (r.rating > options.rating_threshold) {
            positives.emplace_back(user_map.at(r.user), item_map.at(r.item));
        }
    }
    if (positives.empty()) {
        throw DataError("empty dataset: no interactions with rating above " +
                        format_double(options.rating_threshold));
    }
    graph.interactions = InteractionSet(graph.n_users, std::move(positives));

    graph.user_features = options.user_features
                              ? read_feature_matrix(*options.user_features, user_map,
                                                    graph.n_users, "user features")
                              : one_hot_features(graph.n_users);
    graph.item_features = options.item_features
                              ? read_feature_matrix(*options.item_features, item_map,
                                                    graph.n_items, "item features")
                              : one_hot_features(graph.n_items);

    graph.user_causal_adj.assign(graph.n_users, {});
    graph.item_causal_adj.assign(graph.n_items, {});
    if (options.user_neighbors) {
        read_neighbor_file(*options.user_neighbors, user_map, item_map, graph.n_users, true,
                           graph.user_causal_adj);
    }
    if (options.item_neighbors) {
        read_neighbor_file(*options.item_neighbors, user_map, item_map, graph.n_users, false,
                           graph.item_causal_adj);
    }

    graph.validate();
    return graph;
}

// --------------------------------------------------------------------------
// co-interaction neighbors
// --------------------------------------------------------------------------

void derive_co_interaction_neighbors(InteractionGraph& graph, std::size_t max_neighbors) {
    const std::size_t n_users = graph.n_users;
    const std::size_t n_items = graph.n_items;

    std::vector<std::vector<std::uint32_t>> users_of_item(n_items);
    for (std::uint32_t u = 0; u < n_users; ++u) {
        for (std::uint32_t i : graph.interactions.items_of(u)) users_of_item[i].push_back(u);
    }

    struct Candidate {
        std::uint32_t global_id;
        std::size_t count;
    };
    auto select = [max_neighbors](std::vector<Candidate>& candidates) {
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            return a.count != b.count ? a.count > b.count : a.global_id < b.global_id;
        });
        if (candidates.size() > max_neighbors) candidates.resize(max_neighbors);
        std::vector<std::uint32_t> out;
        out.reserve(candidates.size());
        for (const Candidate& c : candidates) out.push_back(c.global_id);
        std::sort(out.begin(), out.end());
        return out;
    };

    graph.user_causal_adj.assign(n_users, {});
    std::unordered_map<std::uint32_t, std::size_t> co_count;
    for (std::uint32_t u = 0; u < n_users; ++u) {
        co_count.clear();
        const auto items = graph.interactions.items_of(u);
        for (std::uint32_t i : items) {
            for (std::uint32_t w : users_of_item[i]) {
                if (w != u) co_count[w] += 1;
            }
        }
        std::vector<Candidate> candidates;
        candidates.reserve(co_count.size() + items.size());
        for (const auto& [w, c] : co_count) candidates.push_back({w, c});
        for (std::uint32_t i : items) candidates.push_back({graph.item_node(i), 1});
        graph.user_causal_adj[u] = select(candidates);
    }

    graph.item_causal_adj.assign(n_items, {});
    for (std::uint32_t i = 0; i < n_items; ++i) {
        co_count.clear();
        for (std::uint32_t u : users_of_item[i]) {
            for (std::uint32_t j : graph.interactions.items_of(u)) {
                if (j != i) co_count[graph.item_node(j)] += 1;
            }
        }
        std::vector<Candidate> candidates;
        candidates.reserve(co_count.size() + users_of_item[i].size());
        for (const auto& [gid, c] : co_count) candidates.push_back({gid, c});
        for (std::uint32_t u : users_of_item[i]) candidates.push_back({u, 1});
        graph.item_causal_adj[i] = select(candidates);
    }
}

// --------------------------------------------------------------------------
// k-core
// --------------------------------------------------------------------------

InteractionGraph k_core_filter(const InteractionGraph& graph, std::size_t k) {
    if (k < 1) throw InvalidInputError("k_core_filter: k must be >= 1");

    std::vector<char> user_alive(graph.n_users, 1);
    std::vector<char> item_alive(graph.n_items, 1);
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::size_t> user_deg(graph.n_users, 0);
        std::vector<std::size_t> item_deg(graph.n_items, 0);
        for (std::uint32_t u = 0; u < graph.n_users; ++u) {
            if (!user_alive[u]) continue;
            for (std::uint32_t i : graph.interactions.items_of(u)) {
                if (!item_alive[i]) continue;
                user_deg[u] += 1;
                item_deg[i] += 1;
            }
        }
        for (std::uint32_t u = 0; u < graph.n_users; ++u) {
            if (user_alive[u] && user_deg[u] < k) {
                user_alive[u] = 0;
                changed = true;
            }
        }
        for (std::uint32_t i = 0; i < graph.n_items; ++i) {
            if (item_alive[i] && item_deg[i] < k) {
                item_alive[i] = 0;
                changed = true;
            }
        }
    }

    constexpr std::uint32_t kGone = 0xFFFFFFFFu;
    std::vector<std::uint32_t> user_remap(graph.n_users, kGone);
    std::vector<std::uint32_t> item_remap(graph.n_items, kGone);
    InteractionGraph out;
    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        if (user_alive[u]) {
            user_remap[u] = static_cast<std::uint32_t>(out.user_ids.size());
            out.user_ids.push_back(graph.user_ids[u]);
        }
    }
    for (std::uint32_t i = 0; i < graph.n_items; ++i) {
        if (item_alive[i]) {
            item_remap[i] = static_cast<std::uint32_t>(out.item_ids.size());
            out.item_ids.push_back(graph.item_ids[i]);
        }
    }
    out.n_users = out.user_ids.size();
    out.n_items = out.item_ids.size();
    if (out.n_users == 0 || out.n_items == 0) {
        log::warn("k_core_filter(k=", k, ") removed every node");
        out.n_users = 0;
        out.n_items = 0;
        out.user_ids.clear();
        out.item_ids.clear();
        out.user_features = Tensor::zeros({0, 1});
        out.item_features = Tensor::zeros({0, 1});
        out.interactions = InteractionSet(0, {});
        return out;
    }

    auto gather_rows_plain = [](const Tensor& m, const std::vector<char>& alive,
                                std::size_t kept) {
        const std::size_t width = m.cols();
        std::vector<double> data;
        data.reserve(kept * width);
        const auto src = m.data();
        for (std::size_t r = 0; r < alive.size(); ++r) {
            if (!alive[r]) continue;
            data.insert(data.end(), src.begin() + static_cast<std::ptrdiff_t>(r * width),
                        src.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
        }
        return Tensor::from_vector({kept, width}, std::move(data));
    };
    out.user_features = gather_rows_plain(graph.user_features, user_alive, out.n_users);
    out.item_features = gather_rows_plain(graph.item_features, item_alive, out.n_items);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        if (!user_alive[u]) continue;
        for (std::uint32_t i : graph.interactions.items_of(u)) {
            if (item_alive[i]) pairs.emplace_back(user_remap[u], item_remap[i]);
        }
    }
    out.interactions = InteractionSet(out.n_users, std::move(pairs));

    auto remap_global = [&](std::uint32_t gid) -> std::uint32_t {
        if (gid < graph.n_users) return user_remap[gid];
        const std::uint32_t item = gid - static_cast<std::uint32_t>(graph.n_users);
        const std::uint32_t mapped = item_remap[item];
        return mapped == kGone ? kGone : static_cast<std::uint32_t>(out.n_users) + mapped;
    };
    out.user_causal_adj.assign(out.n_users, {});
    out.item_causal_adj.assign(out.n_items, {});
    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        if (!user_alive[u]) continue;
        for (std::uint32_t gid : graph.user_causal_adj[u]) {
            const std::uint32_t mapped = remap_global(gid);
            if (mapped != kGone) out.user_causal_adj[user_remap[u]].push_back(mapped);
        }
    }
    for (std::uint32_t i = 0; i < graph.n_items; ++i) {
        if (!item_alive[i]) continue;
        for (std::uint32_t gid : graph.item_causal_adj[i]) {
            const std::uint32_t mapped = remap_global(gid);
            if (mapped != kGone) out.item_causal_adj[item_remap[i]].push_back(mapped);
        }
    }

    out.validate();
    return out;
}

double density(const InteractionGraph& graph) {
    if (graph.n_users == 0 || graph.n_items == 0) {
        throw InvalidInputError("density: graph has no users or no items");
    }
    return static_cast<double>(graph.interactions.size()) /
           (static_cast<double>(graph.n_users) * static_cast<double>(graph.n_items));
}

// --------------------------------------------------------------------------
// split
// --------------------------------------------------------------------------

SplitDataset split(const InteractionGraph& graph, const SplitRatios& ratios,
                   const RngStream& rng) {
    const double total = ratios.train + ratios.validation + ratios.test;
    if (std::abs(total - 1.0) > 1e-9) {
        throw ConfigError("split ratios must sum to 1, got " + format_double(total));
    }
    if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0) {
        throw ConfigError("split ratios must be nonnegative");
    }

    std::vector<std::pair<std::uint32_t, std::uint32_t>> train_pairs, val_pairs, test_pairs;
    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        const auto items = graph.interactions.items_of(u);
        const std::size_t n = items.size();
        if (n == 0) continue;
        std::vector<std::uint32_t> shuffled(items.begin(), items.end());
        RngStream user_rng = rng.derive("user", u);
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = user_rng.uniform_int(i + 1);
            std::swap(shuffled[i], shuffled[j]);
        }

        // Largest-remainder apportionment; ties favour train, then validation.
        const double quotas[3] = {ratios.train * static_cast<double>(n),
                                  ratios.validation * static_cast<double>(n),
                                  ratios.test * static_cast<double>(n)};
        std::size_t counts[3];
        double remainders[3];
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            counts[s] = static_cast<std::size_t>(std::floor(quotas[s]));
            remainders[s] = quotas[s] - std::floor(quotas[s]);
            assigned += counts[s];
        }
        int order[3] = {0, 1, 2};
        std::sort(order, order + 3, [&remainders](int a, int b) {
            return remainders[a] != remainders[b] ? remainders[a] > remainders[b] : a < b;
        });
        for (std::size_t leftover = n - assigned, s = 0; leftover > 0; --leftover, ++s) {
            counts[order[s % 3]] += 1;
        }
        if (n >= 3) {
            while (counts[0] == 0) {  // every evaluated user needs training signal
                if (counts[2] >= counts[1] && counts[2] > 0) {
                    counts[2] -= 1;
                } else {
                    counts[1] -= 1;
                }
                counts[0] += 1;
            }
        }

        std::size_t pos = 0;
        for (std::size_t c = 0; c < counts[0]; ++c) train_pairs.emplace_back(u, shuffled[pos++]);
        for (std::size_t c = 0; c < counts[1]; ++c) val_pairs.emplace_back(u, shuffled[pos++]);
        for (std::size_t c = 0; c < counts[2]; ++c) test_pairs.emplace_back(u, shuffled[pos++]);
    }

    SplitDataset out;
    out.train = InteractionSet(graph.n_users, std::move(train_pairs));
    out.validation = InteractionSet(graph.n_users, std::move(val_pairs));
    out.test = InteractionSet(graph.n_users, std::move(test_pairs));
    return out;
}

// --------------------------------------------------------------------------
// canonical dump
// --------------------------------------------------------------------------

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kInteractionsName = "interactions.csv";
constexpr const char* kUserFeaturesName = "user_features.csv";
constexpr const char* kItemFeaturesName = "item_features.csv";
constexpr const char* kUserNeighborsName = "user_neighbors.csv";
constexpr const char* kItemNeighborsName = "item_neighbors.csv";
constexpr const char* kFormatTag = "cngcf-dataset-v1";

std::vector<std::string> feature_header(std::size_t width) {
    std::vector<std::string> header{"id"};
    for (std::size_t f = 1; f <= width; ++f) header.push_back("f" + std::to_string(f));
    return header;
}

void write_features_csv(const std::filesystem::path& path, const Tensor& features,
                        const std::vector<std::string>& ids) {
    CsvWriter writer(feature_header(features.cols()));
    for (std::size_t r = 0; r < features.rows(); ++r) {
        std::vector<std::string> fields{ids[r]};
        for (std::size_t c = 0; c < features.cols(); ++c) {
            fields.push_back(format_double(features.at(r, c)));
        }
        writer.add_row(std::move(fields));
    }
    writer.write(path);
}

void write_neighbors_csv(const std::filesystem::path& path,
                         const std::vector<std::vector<std::uint32_t>>& adjacency,
                         const InteractionGraph& graph, bool user_side) {
    CsvWriter writer({"id", "neighbor_id"});
    for (std::size_t n = 0; n < adjacency.size(); ++n) {
        const std::string self =
            user_side ? graph.user_ids[n] : graph.item_ids[n];
        for (std::uint32_t gid : adjacency[n]) {
            const bool neighbor_is_user = gid < graph.n_users;
            const std::string neighbor =
                neighbor_is_user
                    ? "u:" + graph.user_ids[gid]
                    : "i:" + graph.item_ids[gid - static_cast<std::uint32_t>(graph.n_users)];
            writer.add_row({self, neighbor});
        }
    }
    writer.write(path);
}

}  // namespace

void write_canonical_dump(const InteractionGraph& graph, const std::filesystem::path& dir,
                          const DumpInfo& info) {
    graph.validate();
    std::filesystem::create_directories(dir);

    CsvWriter interactions({"user_id", "item_id", "rating"});
    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        for (std::uint32_t i : graph.interactions.items_of(u)) {
            interactions.add_row({graph.user_ids[u], graph.item_ids[i], "5"});
        }
    }
    interactions.write(dir / kInteractionsName);

    write_features_csv(dir / kUserFeaturesName, graph.user_features, graph.user_ids);
    write_features_csv(dir / kItemFeaturesName, graph.item_features, graph.item_ids);
    write_neighbors_csv(dir / kUserNeighborsName, graph.user_causal_adj, graph, true);
    write_neighbors_csv(dir / kItemNeighborsName, graph.item_causal_adj, graph, false);

    CsvWriter user_ids({"dense_id", "original_id"});
    for (std::size_t u = 0; u < graph.n_users; ++u) {
        user_ids.add_row({std::to_string(u), graph.user_ids[u]});
    }
    user_ids.write(dir / "user_ids.csv");
    CsvWriter item_ids({"dense_id", "original_id"});
    for (std::size_t i = 0; i < graph.n_items; ++i) {
        item_ids.add_row({std::to_string(i), graph.item_ids[i]});
    }
    item_ids.write(dir / "item_ids.csv");

    json manifest;
    manifest["format"] = kFormatTag;
    manifest["source"] = info.source;
    manifest["n_users"] = graph.n_users;
    manifest["n_items"] = graph.n_items;
    manifest["n_interactions"] = graph.interactions.size();
    manifest["density"] = density(graph);
    manifest["rating_threshold"] = info.rating_threshold;
    manifest["k_core"] = info.k_core;
    manifest["seed"] = info.seed;
    manifest["user_feature_dim"] = graph.user_features.cols();
    manifest["item_feature_dim"] = graph.item_features.cols();
    if (!info.extra_manifest_json.empty()) {
        manifest["extra"] = json::parse(info.extra_manifest_json);
    }
    write_text_file(dir / kManifestName, manifest.dump(2) + "\n");
}

LoadedDump load_canonical_dump(const std::filesystem::path& dir) {
    const json manifest = json::parse(read_text_file(dir / kManifestName));
    if (manifest.value("format", "") != kFormatTag) {
        throw DataError(dir.string() + ": not a canonical dataset dump");
    }

    LoadedDump out;
    out.info.source = manifest.value("source", "ingested");
    out.info.rating_threshold = manifest.value("rating_threshold", 3.0);
    out.info.k_core = manifest.value("k_core", std::size_t{0});
    out.info.seed = manifest.value("seed", std::uint64_t{0});
    if (manifest.contains("extra")) out.info.extra_manifest_json = manifest["extra"].dump();

    InteractionGraph& graph = out.graph;

    // The node universe comes from the id tables so isolated nodes survive a
    // round trip.
    auto read_ids = [&dir](const char* name) {
        const CsvFile csv = read_csv(dir / name);
        std::vector<std::string> ids(csv.rows.size());
        for (const CsvRow& row : csv.rows) {
            const std::size_t dense = parse_uint(row.fields.at(0), name);
            if (dense >= ids.size()) throw DataError(std::string(name) + ": dense ids not contiguous");
            ids[dense] = row.fields.at(1);
        }
        return ids;
    };
    graph.user_ids = read_ids("user_ids.csv");
    graph.item_ids = read_ids("item_ids.csv");
    graph.n_users = graph.user_ids.size();
    graph.n_items = graph.item_ids.size();
    const IdMap user_map = build_id_map(graph.user_ids);
    const IdMap item_map = build_id_map(graph.item_ids);

    const CsvFile inter = read_csv(dir / kInteractionsName);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    pairs.reserve(inter.rows.size());
    for (const CsvRow& row : inter.rows) {
        const std::string where =
            (dir / kInteractionsName).string() + " line " + std::to_string(row.line_number);
        if (row.fields.size() < 3) throw DataError(where + ": expected 3 columns");
        const auto u = user_map.find(row.fields[0]);
        const auto i = item_map.find(row.fields[1]);
        if (u == user_map.end() || i == item_map.end()) {
            throw DataError(where + ": id missing from id tables");
        }
        pairs.emplace_back(u->second, i->second);
    }
    graph.interactions = InteractionSet(graph.n_users, std::move(pairs));

    graph.user_features =
        read_feature_matrix(dir / kUserFeaturesName, user_map, graph.n_users, "user features");
    graph.item_features =
        read_feature_matrix(dir / kItemFeaturesName, item_map, graph.n_items, "item features");

    graph.user_causal_adj.assign(graph.n_users, {});
    graph.item_causal_adj.assign(graph.n_items, {});
    read_neighbor_file(dir / kUserNeighborsName, user_map, item_map, graph.n_users, true,
                       graph.user_causal_adj);
    read_neighbor_file(dir / kItemNeighborsName, user_map, item_map, graph.n_users, false,
                       graph.item_causal_adj);

    graph.validate();
    return out;
}

}  // namespace cngcf
