#include "cngcf/encoder.hpp"

#include <cmath>
#include <cstdlib>

#include "cngcf/error.hpp"

namespace cngcf {

namespace {

Tensor glorot(std::size_t fan_in, std::size_t fan_out, RngStream& rng, double gain = 1.0) {
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> values(fan_in * fan_out);
    for (double& v : values) v = rng.uniform(-bound, bound);
    return Tensor::param({fan_in, fan_out}, std::move(values));
}

// The variance heads feed exp(ReLU(.)); at Glorot scale the pre-activations
// start in the tens and the exp blows the KL up by orders of magnitude,
// after which the first optimizer steps kill every ReLU unit. Starting the
// heads near zero keeps sigma^2 near 1.
double head_env(const char* name, double fallback) {
    const char* v = std::getenv(name);
    return v != nullptr ? std::atof(v) : fallback;
}
// TODO(tuning): remove env overrides once acceptance config is frozen
const double kSigmaHeadGain = head_env("CNGCF_SIGMA_GAIN", 0.05);

// The mean heads also start small: the inner-product decoder turns
// representation scale into logit scale quadratically, and tens-scale logits
// saturate the likelihood before any structure is learned.
const double kMuHeadGain = head_env("CNGCF_MU_GAIN", 0.05);

Tensor zero_bias(std::size_t n) { return Tensor::param({n}, std::vector<double>(n, 0.0)); }

// ReLU mean heads start with a positive bias so units begin alive; dead
// units cannot recover through their own gradient.
Tensor mu_bias(std::size_t n) {
    return Tensor::param({n}, std::vector<double>(n, head_env("CNGCF_MU_BIAS", 0.3)));
}

// Variance heads start strongly negative. Under the direct-exp head this
// makes the first training steps nearly noise-free (sigma ~ 0.14), which the
// inner-product decoder needs; under exp(ReLU(.)) the ReLU floor maps it to
// sigma^2 = 1, the smallest value that head admits.
Tensor sigma_bias(std::size_t n) { return Tensor::param({n}, std::vector<double>(n, -4.0)); }

// Flattened (target, neighbor) pair lists over the whole graph, in node
// order with each node's stored adjacency order preserved.
struct PairIndex {
    std::vector<std::uint32_t> targets;
    std::vector<std::uint32_t> neighbors;
};

PairIndex build_pairs(const InteractionGraph& graph) {
    PairIndex out;
    std::size_t total = 0;
    for (const auto& adj : graph.user_causal_adj) total += adj.size();
    for (const auto& adj : graph.item_causal_adj) total += adj.size();
    out.targets.reserve(total);
    out.neighbors.reserve(total);
    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        for (std::uint32_t gid : graph.user_causal_adj[u]) {
            out.targets.push_back(u);
            out.neighbors.push_back(gid);
        }
    }
    for (std::uint32_t i = 0; i < graph.n_items; ++i) {
        for (std::uint32_t gid : graph.item_causal_adj[i]) {
            out.targets.push_back(graph.item_node(i));
            out.neighbors.push_back(gid);
        }
    }
    return out;
}

// Per-column standardization of raw node features. Feature files carry
// arbitrary scales (the synthetic income column spans [0,1000]) and the
// exp-based variance head cannot absorb that; the transform is a
// deterministic function of the graph, so train and eval agree.
Tensor standardize_columns(const Tensor& features) {
    const std::size_t rows = features.rows();
    const std::size_t cols = features.cols();
    if (rows == 0) return features;
    const auto data = features.data();
    std::vector<double> mean(cols, 0.0), stddev(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) mean[c] += data[r * cols + c];
    }
    for (double& m : mean) m /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double diff = data[r * cols + c] - mean[c];
            stddev[c] += diff * diff;
        }
    }
    std::vector<double> out(rows * cols);
    for (std::size_t c = 0; c < cols; ++c) {
        stddev[c] = std::sqrt(stddev[c] / static_cast<double>(rows));
        if (stddev[c] < 1e-9) stddev[c] = 1.0;  // constant column stays centered
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] = (data[r * cols + c] - mean[c]) / stddev[c];
        }
    }
    return Tensor::from_vector({rows, cols}, std::move(out));
}

// Shared message kernel: rows (t, j) -> h_j (*) ReLU(W [h_t || h_j]),
// segment-summed into per-target rows.
Tensor messages_from_pairs(const Tensor& h_prev, const PairIndex& pairs, const Tensor& w_msg,
                           std::size_t n_segments) {
    const Tensor h_targets = gather_rows(h_prev, pairs.targets);
    const Tensor h_neighbors = gather_rows(h_prev, pairs.neighbors);
    const std::vector<Tensor> sides{h_targets, h_neighbors};
    const Tensor gate = relu(matmul(concat_cols(sides), w_msg));
    return segment_sum(mul(h_neighbors, gate), pairs.targets, n_segments);
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& cfg, std::size_t user_feature_dim,
                                  std::size_t item_feature_dim, std::size_t n_users,
                                  std::size_t n_items, RngStream& rng) {
    EncoderParams p;
    p.w_in_user = glorot(user_feature_dim, cfg.h_dim, rng);
    p.w_in_item = glorot(item_feature_dim, cfg.h_dim, rng);
    if (cfg.id_embeddings) {
        p.e_user = glorot(n_users, cfg.h_dim, rng);
        p.e_item = glorot(n_items, cfg.h_dim, rng);
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        if (cfg.gcn_variant) {
            p.w_gcn.push_back(glorot(cfg.h_dim, cfg.h_dim, rng));
        } else {
            p.w_msg.push_back(glorot(2 * cfg.h_dim, cfg.h_dim, rng));
            p.w_agg.push_back(glorot(2 * cfg.h_dim + cfg.z_dim, cfg.h_dim, rng));
        }
    }
    if (cfg.decoder_bias) {
        p.b_score_user = zero_bias(n_users);
        p.b_score_item = zero_bias(n_items);
        p.b_score_global = Tensor::param({}, {0.0});
    }
    p.w_mu_user = glorot(cfg.h_dim, cfg.repr_dim, rng, kMuHeadGain);
    p.b_mu_user = mu_bias(cfg.repr_dim);
    p.w_sigma_user = glorot(cfg.h_dim, cfg.repr_dim, rng, kSigmaHeadGain);
    p.b_sigma_user = sigma_bias(cfg.repr_dim);
    p.w_mu_item = glorot(cfg.h_dim, cfg.repr_dim, rng, kMuHeadGain);
    p.b_mu_item = mu_bias(cfg.repr_dim);
    p.w_sigma_item = glorot(cfg.h_dim, cfg.repr_dim, rng, kSigmaHeadGain);
    p.b_sigma_item = sigma_bias(cfg.repr_dim);
    return p;
}

std::vector<std::pair<std::string, Tensor>> EncoderParams::named(const EncoderConfig& cfg) const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("w_in_user", w_in_user);
    out.emplace_back("w_in_item", w_in_item);
    if (cfg.id_embeddings) {
        out.emplace_back("e_user", e_user);
        out.emplace_back("e_item", e_item);
    }
    if (cfg.decoder_bias) {
        out.emplace_back("b_score_user", b_score_user);
        out.emplace_back("b_score_item", b_score_item);
        out.emplace_back("b_score_global", b_score_global);
    }
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        if (cfg.gcn_variant) {
            out.emplace_back("w_gcn." + std::to_string(l), w_gcn[l]);
        } else {
            out.emplace_back("w_msg." + std::to_string(l), w_msg[l]);
            out.emplace_back("w_agg." + std::to_string(l), w_agg[l]);
        }
    }
    out.emplace_back("w_mu_user", w_mu_user);
    out.emplace_back("b_mu_user", b_mu_user);
    out.emplace_back("w_sigma_user", w_sigma_user);
    out.emplace_back("b_sigma_user", b_sigma_user);
    out.emplace_back("w_mu_item", w_mu_item);
    out.emplace_back("b_mu_item", b_mu_item);
    out.emplace_back("w_sigma_item", w_sigma_item);
    out.emplace_back("b_sigma_item", b_sigma_item);
    return out;
}

std::vector<Tensor> EncoderParams::all(const EncoderConfig& cfg) const {
    std::vector<Tensor> out;
    for (auto& [name, tensor] : named(cfg)) out.push_back(tensor);
    return out;
}

Tensor draw_exogenous(const InteractionGraph& graph, const EncoderConfig& cfg, RngStream& rng) {
    std::vector<double> values(graph.n_nodes() * cfg.z_dim);
    for (double& v : values) v = rng.normal();
    return Tensor::from_vector({graph.n_nodes(), cfg.z_dim}, std::move(values));
}

Tensor causal_message(std::uint32_t node, const Tensor& h_prev,
                      std::span<const std::uint32_t> neighbors, const Tensor& w_msg) {
    const std::size_t h_dim = w_msg.cols();
    if (node >= h_prev.rows()) {
        throw DataError("causal_message: node " + std::to_string(node) +
                        " outside hidden state matrix");
    }
    if (neighbors.empty()) return Tensor::zeros({h_dim});
    PairIndex pairs;
    for (std::uint32_t gid : neighbors) {
        if (gid >= h_prev.rows()) {
            throw DataError("causal_message: adjacency references unknown node " +
                            std::to_string(gid));
        }
        pairs.targets.push_back(node);
        pairs.neighbors.push_back(gid);
    }
    // Single-segment instance of the batched kernel.
    std::vector<std::uint32_t> segment(neighbors.size(), 0);
    const Tensor h_targets = gather_rows(h_prev, pairs.targets);
    const Tensor h_neighbors = gather_rows(h_prev, pairs.neighbors);
    const std::vector<Tensor> sides{h_targets, h_neighbors};
    const Tensor gate = relu(matmul(concat_cols(sides), w_msg));
    return reshape(segment_sum(mul(h_neighbors, gate), segment, 1), {h_dim});
}

Tensor aggregate_node(const Tensor& h_node, const Tensor& message, const Tensor& z_node,
                      const Tensor& w_agg) {
    const Tensor input = concat(concat(h_node, message), z_node);
    if (input.size() != w_agg.rows()) {
        throw DimensionError("aggregate_node: input width " + std::to_string(input.size()) +
                             " does not match weight shape " + shape_str(w_agg.shape()));
    }
    return relu(reshape(matmul(reshape(input, {1, input.size()}), w_agg), {w_agg.cols()}));
}

Tensor layer_aggregate(std::span<const Tensor> h_layers) {
    if (h_layers.empty()) throw InvalidInputError("layer_aggregate: no layers");
    Tensor out = h_layers[0];
    for (std::size_t l = 1; l < h_layers.size(); ++l) out = add(out, h_layers[l]);
    return out;
}

Tensor gcn_node(std::uint32_t node, const Tensor& h_prev,
                std::span<const std::uint32_t> neighbors, const Tensor& w_gcn) {
    std::vector<std::uint32_t> members{node};
    members.insert(members.end(), neighbors.begin(), neighbors.end());
    std::vector<std::uint32_t> segment(members.size(), 0);
    const Tensor total = segment_sum(gather_rows(h_prev, members), segment, 1);
    const Tensor mean = scale(total, 1.0 / static_cast<double>(members.size()));
    return relu(reshape(matmul(mean, w_gcn), {w_gcn.cols()}));
}

LatentState encode(const InteractionGraph& graph, const EncoderParams& params,
                   const EncoderConfig& cfg, Mode mode, const EncodeInputs& inputs) {
    const std::size_t n_nodes = graph.n_nodes();
    const bool training = mode == Mode::train;
    if (training && inputs.noise == nullptr) {
        throw InvalidInputError("encode: train mode requires a noise stream");
    }
    if (training && cfg.dropout > 0.0 && inputs.dropout == nullptr) {
        throw InvalidInputError("encode: train mode with dropout requires a dropout stream");
    }

    LatentState state;
    state.exogenous = inputs.exogenous != nullptr ? *inputs.exogenous
                                                  : Tensor::zeros({n_nodes, cfg.z_dim});
    if (state.exogenous.rank() != 2 || state.exogenous.rows() != n_nodes ||
        state.exogenous.cols() != cfg.z_dim) {
        throw DimensionError("encode: exogenous draws must be " + std::to_string(n_nodes) + "x" +
                             std::to_string(cfg.z_dim) + ", got " +
                             shape_str(state.exogenous.shape()));
    }

    // h^0: standardized features embedded to the hidden width, users stacked
    // above items; identity embeddings are the one-hot block of the input.
    Tensor h0_users = matmul(standardize_columns(graph.user_features), params.w_in_user);
    Tensor h0_items = matmul(standardize_columns(graph.item_features), params.w_in_item);
    if (cfg.id_embeddings) {
        h0_users = add(h0_users, params.e_user);
        h0_items = add(h0_items, params.e_item);
    }
    Tensor h = vstack(h0_users, h0_items);

    PairIndex pairs;
    std::vector<std::uint32_t> gcn_members, gcn_segments;
    Tensor gcn_scale;
    if (cfg.gcn_variant) {
        // mean over {node} + neighbors, per node
        for (std::uint32_t node = 0; node < n_nodes; ++node) {
            const auto& adj = node < graph.n_users
                                  ? graph.user_causal_adj[node]
                                  : graph.item_causal_adj[node - graph.n_users];
            gcn_members.push_back(node);
            gcn_segments.push_back(node);
            for (std::uint32_t gid : adj) {
                gcn_members.push_back(gid);
                gcn_segments.push_back(node);
            }
        }
        std::vector<double> inv(n_nodes * cfg.h_dim);
        for (std::uint32_t node = 0; node < n_nodes; ++node) {
            const auto& adj = node < graph.n_users
                                  ? graph.user_causal_adj[node]
                                  : graph.item_causal_adj[node - graph.n_users];
            const double w = 1.0 / static_cast<double>(1 + adj.size());
            for (std::size_t c = 0; c < cfg.h_dim; ++c) inv[node * cfg.h_dim + c] = w;
        }
        gcn_scale = Tensor::from_vector({n_nodes, cfg.h_dim}, std::move(inv));
    } else if (cfg.causal_messages) {
        pairs = build_pairs(graph);
    }

    state.h_layers.reserve(cfg.layers);
    for (std::size_t layer = 0; layer < cfg.layers; ++layer) {
        Tensor next;
        if (cfg.gcn_variant) {
            const Tensor mean =
                mul(segment_sum(gather_rows(h, gcn_members), gcn_segments, n_nodes), gcn_scale);
            next = relu(matmul(mean, params.w_gcn[layer]));
        } else {
            Tensor messages =
                cfg.causal_messages && !pairs.targets.empty()
                    ? messages_from_pairs(h, pairs, params.w_msg[layer], n_nodes)
                    : Tensor::zeros({n_nodes, cfg.h_dim});
            const std::vector<Tensor> blocks{h, messages, state.exogenous};
            next = relu(matmul(concat_cols(blocks), params.w_agg[layer]));
        }
        if (training && cfg.dropout > 0.0) {
            next = dropout(next, cfg.dropout, true, *inputs.dropout);
        }
        if (!next.all_finite()) {
            throw NumericError("non-finite activation at encoder layer " +
                               std::to_string(layer + 1));
        }
        state.h_layers.push_back(next);
        h = next;
    }
    state.h = layer_aggregate(state.h_layers);

    const Tensor h_users = slice_rows(state.h, 0, graph.n_users);
    const Tensor h_items = slice_rows(state.h, graph.n_users, n_nodes);
    auto head = [&cfg](const Tensor& hidden, const Tensor& w_mu, const Tensor& b_mu,
                       const Tensor& w_sigma, const Tensor& b_sigma) {
        const Tensor mu = relu(add_row_broadcast(matmul(hidden, w_mu), b_mu));
        const Tensor pre = add_row_broadcast(matmul(hidden, w_sigma), b_sigma);
        const Tensor sigma_sq = cngcf::exp(cfg.sigma_exp_direct ? pre : relu(pre));
        return std::make_pair(mu, sigma_sq);
    };
    std::tie(state.mu_user, state.sigma_sq_user) =
        head(h_users, params.w_mu_user, params.b_mu_user, params.w_sigma_user, params.b_sigma_user);
    std::tie(state.mu_item, state.sigma_sq_item) =
        head(h_items, params.w_mu_item, params.b_mu_item, params.w_sigma_item, params.b_sigma_item);
    if (!state.mu_user.all_finite() || !state.sigma_sq_user.all_finite() ||
        !state.mu_item.all_finite() || !state.sigma_sq_item.all_finite()) {
        throw NumericError("non-finite activation at encoder heads");
    }

    if (training) {
        auto draw_noise = [&inputs](std::size_t rows, std::size_t cols) {
            std::vector<double> values(rows * cols);
            for (double& v : values) v = inputs.noise->normal();
            return Tensor::from_vector({rows, cols}, std::move(values));
        };
        const Tensor noise_u = draw_noise(graph.n_users, cfg.repr_dim);
        const Tensor noise_v = draw_noise(graph.n_items, cfg.repr_dim);
        state.u = gaussian_sample(state.mu_user, cngcf::sqrt(state.sigma_sq_user), noise_u);
        state.v = gaussian_sample(state.mu_item, cngcf::sqrt(state.sigma_sq_item), noise_v);
    } else {
        state.u = state.mu_user;
        state.v = state.mu_item;
    }
    return state;
}

}  // namespace cngcf
