#include "cngcf/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "cngcf/csv.hpp"
#include "cngcf/error.hpp"
#include "cngcf/util.hpp"

namespace cngcf {

using nlohmann::json;

void SynthConfig::validate(std::vector<std::string>& problems, const std::string& prefix) const {
    if (n_users < 2) problems.push_back(prefix + "n_users: must be >= 2");
    if (n_items < 2) problems.push_back(prefix + "n_items: must be >= 2");
    if (n_causal_neighbors >= n_users) {
        problems.push_back(prefix + "n_causal_neighbors: must be < n_users");
    }
    if (n_causal_neighbors >= n_items) {
        problems.push_back(prefix + "n_causal_neighbors: must be < n_items");
    }
    if (latent_dim < 1) problems.push_back(prefix + "latent_dim: must be >= 1");
    if (k_min < 1) problems.push_back(prefix + "k_min: must be >= 1");
    if (k_max < k_min) problems.push_back(prefix + "k_max: must be >= k_min");
    if (k_max > n_items) problems.push_back(prefix + "k_max: must be <= n_items");
}

std::pair<Tensor, Tensor> generate_features(const SynthConfig& cfg, RngStream& rng) {
    const std::size_t user_width = 2 + cfg.n_exogenous;
    const std::size_t item_width = 3 + cfg.n_exogenous;
    std::vector<double> users(cfg.n_users * user_width);
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        double* row = users.data() + u * user_width;
        row[0] = rng.bernoulli(0.5) ? 1.0 : 0.0;  // gender
        row[1] = rng.uniform(0.0, 1000.0);        // income
        for (std::size_t e = 0; e < cfg.n_exogenous; ++e) row[2 + e] = rng.normal();
    }
    std::vector<double> items(cfg.n_items * item_width);
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        double* row = items.data() + i * item_width;
        for (int f = 0; f < 3; ++f) row[f] = rng.bernoulli(0.5) ? 1.0 : 0.0;  // type, brand, location
        for (std::size_t e = 0; e < cfg.n_exogenous; ++e) row[3 + e] = rng.normal();
    }
    return {Tensor::from_vector({cfg.n_users, user_width}, std::move(users)),
            Tensor::from_vector({cfg.n_items, item_width}, std::move(items))};
}

std::pair<std::vector<std::vector<std::uint32_t>>, std::vector<std::vector<std::uint32_t>>>
sample_causal_neighbors(const SynthConfig& cfg, const Tensor& item_features, RngStream& rng) {
    std::vector<std::vector<std::uint32_t>> user_adj(cfg.n_users);
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        std::unordered_set<std::uint32_t> chosen;
        while (chosen.size() < cfg.n_causal_neighbors) {
            const auto candidate = static_cast<std::uint32_t>(rng.uniform_int(cfg.n_users));
            if (candidate != u) chosen.insert(candidate);
        }
        user_adj[u].assign(chosen.begin(), chosen.end());
        std::sort(user_adj[u].begin(), user_adj[u].end());
    }

    const std::size_t width = item_features.cols();
    const auto feats = item_features.data();
    std::vector<std::vector<std::uint32_t>> item_adj(cfg.n_items);
    std::vector<std::pair<double, std::uint32_t>> dists;
    dists.reserve(cfg.n_items - 1);
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        dists.clear();
        const double* self = feats.data() + i * width;
        for (std::size_t j = 0; j < cfg.n_items; ++j) {
            if (j == i) continue;
            const double* other = feats.data() + j * width;
            double d2 = 0.0;
            for (std::size_t f = 0; f < width; ++f) {
                const double diff = self[f] - other[f];
                d2 += diff * diff;
            }
            dists.emplace_back(d2, static_cast<std::uint32_t>(j));
        }
        std::partial_sort(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(cfg.n_causal_neighbors),
                          dists.end());
        item_adj[i].reserve(cfg.n_causal_neighbors);
        for (std::size_t r = 0; r < cfg.n_causal_neighbors; ++r) {
            item_adj[i].push_back(static_cast<std::uint32_t>(cfg.n_users) + dists[r].second);
        }
        std::sort(item_adj[i].begin(), item_adj[i].end());
    }
    return {std::move(user_adj), std::move(item_adj)};
}

SynthPreferences estimate_preferences(const SynthConfig& cfg, RngStream& rng) {
    std::vector<double> users(cfg.n_users * cfg.latent_dim);
    for (double& v : users) v = rng.normal();
    std::vector<double> items(cfg.n_items * cfg.latent_dim);
    for (double& v : items) v = rng.normal();
    SynthPreferences prefs;
    prefs.user_factors = Tensor::from_vector({cfg.n_users, cfg.latent_dim}, std::move(users));
    prefs.item_factors = Tensor::from_vector({cfg.n_items, cfg.latent_dim}, std::move(items));
    prefs.scores = matmul_nt(prefs.user_factors, prefs.item_factors);
    return prefs;
}

std::vector<std::vector<std::uint32_t>> sample_interactions(const SynthConfig& cfg,
                                                            const Tensor& scores, RngStream& rng) {
    if (!scores.all_finite()) throw InvalidInputError("sample_interactions: non-finite scores");
    const auto values = scores.data();
    std::vector<std::vector<std::uint32_t>> out(cfg.n_users);
    std::vector<std::uint32_t> order(cfg.n_items);
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        const std::size_t k = cfg.k_min + rng.uniform_int(cfg.k_max - cfg.k_min + 1);
        const double* row = values.data() + u * cfg.n_items;
        std::iota(order.begin(), order.end(), 0u);
        // Softmax is a monotone transform, so top-k by raw score matches
        // top-k by the normalized score.
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                          [row](std::uint32_t a, std::uint32_t b) {
                              return row[a] != row[b] ? row[a] > row[b] : a < b;
                          });
        out[u].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(out[u].begin(), out[u].end());
    }
    return out;
}

SynthOutput generate(const SynthConfig& cfg) {
    std::vector<std::string> problems;
    cfg.validate(problems, "synth.");
    if (!problems.empty()) {
        std::string joined;
        for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
        throw ConfigError(joined);
    }

    const RngStream base("synth", cfg.seed);
    RngStream feature_rng = base.derive("features");
    RngStream neighbor_rng = base.derive("neighbors");
    RngStream preference_rng = base.derive("preferences");
    RngStream interaction_rng = base.derive("interactions");

    SynthOutput out;
    InteractionGraph& graph = out.graph;
    graph.n_users = cfg.n_users;
    graph.n_items = cfg.n_items;
    std::tie(graph.user_features, graph.item_features) = generate_features(cfg, feature_rng);
    std::tie(graph.user_causal_adj, graph.item_causal_adj) =
        sample_causal_neighbors(cfg, graph.item_features, neighbor_rng);
    out.preferences = estimate_preferences(cfg, preference_rng);
    const auto per_user = sample_interactions(cfg, out.preferences.scores, interaction_rng);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::uint32_t u = 0; u < cfg.n_users; ++u) {
        for (std::uint32_t i : per_user[u]) pairs.emplace_back(u, i);
    }
    graph.interactions = InteractionSet(cfg.n_users, std::move(pairs));

    graph.user_ids.reserve(cfg.n_users);
    for (std::size_t u = 0; u < cfg.n_users; ++u) graph.user_ids.push_back(std::to_string(u));
    graph.item_ids.reserve(cfg.n_items);
    for (std::size_t i = 0; i < cfg.n_items; ++i) graph.item_ids.push_back(std::to_string(i));

    graph.validate();
    return out;
}

void write_synth_dump(const SynthOutput& output, const SynthConfig& cfg,
                      const std::filesystem::path& dir) {
    json extra;
    extra["synth_config"] = {{"n_users", cfg.n_users},
                             {"n_items", cfg.n_items},
                             {"n_causal_neighbors", cfg.n_causal_neighbors},
                             {"latent_dim", cfg.latent_dim},
                             {"k_min", cfg.k_min},
                             {"k_max", cfg.k_max},
                             {"n_exogenous", cfg.n_exogenous},
                             {"seed", cfg.seed}};
    DumpInfo info;
    info.source = "synthetic";
    info.rating_threshold = 0.0;  // all sampled interactions are positive
    info.k_core = 0;
    info.seed = cfg.seed;
    info.extra_manifest_json = extra.dump();
    write_canonical_dump(output.graph, dir, info);

    const InteractionGraph& graph = output.graph;
    const auto scores = output.preferences.scores.data();
    CsvWriter ground_truth({"user_id", "item_id", "score", "softmax"});
    std::vector<double> row_softmax(graph.n_items);
    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        const double* row = scores.data() + static_cast<std::size_t>(u) * graph.n_items;
        double mx = row[0];
        for (std::size_t i = 1; i < graph.n_items; ++i) mx = std::max(mx, row[i]);
        double denom = 0.0;
        for (std::size_t i = 0; i < graph.n_items; ++i) {
            row_softmax[i] = std::exp(row[i] - mx);
            denom += row_softmax[i];
        }
        for (std::uint32_t i : graph.interactions.items_of(u)) {
            ground_truth.add_row({graph.user_ids[u], graph.item_ids[i], format_double(row[i]),
                                  format_double(row_softmax[i] / denom)});
        }
    }
    ground_truth.write(dir / "ground_truth.csv");

    auto write_factors = [&dir](const char* name, const Tensor& factors,
                                const std::vector<std::string>& ids) {
        std::vector<std::string> header{"id"};
        for (std::size_t f = 0; f < factors.cols(); ++f) header.push_back("f" + std::to_string(f));
        CsvWriter writer(std::move(header));
        for (std::size_t r = 0; r < factors.rows(); ++r) {
            std::vector<std::string> fields{ids[r]};
            for (std::size_t c = 0; c < factors.cols(); ++c) {
                fields.push_back(format_double(factors.at(r, c)));
            }
            writer.add_row(std::move(fields));
        }
        writer.write(dir / name);
    };
    write_factors("ground_truth_user_factors.csv", output.preferences.user_factors, graph.user_ids);
    write_factors("ground_truth_item_factors.csv", output.preferences.item_factors, graph.item_ids);
}

}  // namespace cngcf
