#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cngcf/graph.hpp"
#include "cngcf/rng.hpp"
#include "cngcf/tensor.hpp"

namespace cngcf {

/// Causal graph encoder: causality-aware message passing feeding Gaussian
/// user/item encoder heads, with a plain-GCN variant for ablations.
struct EncoderConfig {
    std::size_t h_dim{32};     // hidden factor width per layer
    std::size_t repr_dim{64};  // representation size d
    std::size_t z_dim{4};      // exogenous noise width
    std::size_t layers{2};
    double dropout{0.0};
    bool causal_messages{true};   // false: messages forced to zero
    bool gcn_variant{false};      // mean-aggregating GCN layers instead
    bool sigma_exp_direct{false}; // sigma^2 = exp(x) instead of exp(relu(x))
    /// Node features include the node's identity: h^0 gets a learned
    /// per-node embedding added to the embedded feature vector (the linear
    /// embedding of [features || one-hot id]).
    bool id_embeddings{true};
    /// Koren-style free bias terms on the decoder score:
    /// e_uv = <u,v> + b_u + b_v + b0. Off reproduces the bare inner product.
    bool decoder_bias{false};
};

struct EncoderParams {
    Tensor w_in_user;  // d_fu x h
    Tensor w_in_item;  // d_fv x h
    Tensor e_user;     // n_users x h id embeddings (when enabled)
    Tensor e_item;     // n_items x h
    std::vector<Tensor> w_msg;  // per layer: 2h x h
    std::vector<Tensor> w_agg;  // per layer: (2h + z) x h
    std::vector<Tensor> w_gcn;  // per layer: h x h (gcn variant)
    Tensor w_mu_user, b_mu_user, w_sigma_user, b_sigma_user;  // h x d, d
    Tensor w_mu_item, b_mu_item, w_sigma_item, b_sigma_item;
    Tensor b_score_user, b_score_item, b_score_global;  // decoder biases (optional)

    /// Glorot-uniform weights, zero biases.
    static EncoderParams init(const EncoderConfig& cfg, std::size_t user_feature_dim,
                              std::size_t item_feature_dim, std::size_t n_users,
                              std::size_t n_items, RngStream& rng);

    /// Stable (name, tensor) ordering shared by the optimizer and
    /// checkpoints. Tensor handles alias the live parameters.
    std::vector<std::pair<std::string, Tensor>> named(const EncoderConfig& cfg) const;
    std::vector<Tensor> all(const EncoderConfig& cfg) const;
};

struct LatentState {
    Tensor exogenous;              // N x z (zeros in eval mode)
    std::vector<Tensor> h_layers;  // N x h per layer
    Tensor h;                      // layer-aggregated hidden factors
    Tensor mu_user, sigma_sq_user;  // n_users x d
    Tensor mu_item, sigma_sq_item;  // n_items x d
    Tensor u;  // n_users x d sampled (train) or mean (eval) representations
    Tensor v;  // n_items x d
};

enum class Mode { train, eval };

struct EncodeInputs {
    /// N x z_dim exogenous draws; nullptr means zeros (eval, or gcn variant).
    const Tensor* exogenous{nullptr};
    /// Reparameterization noise; required in train mode.
    RngStream* noise{nullptr};
    /// Dropout stream; required in train mode when cfg.dropout > 0.
    RngStream* dropout{nullptr};
};

/// Runs `layers` rounds of message passing + aggregation over all nodes,
/// layer-aggregates, applies the Gaussian heads and (in train mode) draws
/// reparameterized representations. Eval mode is a deterministic pure
/// function of (graph, params).
LatentState encode(const InteractionGraph& graph, const EncoderParams& params,
                   const EncoderConfig& cfg, Mode mode, const EncodeInputs& inputs = {});

/// Exogenous draws Z ~ N(0, I) for every node; resampled per epoch by the
/// trainer.
Tensor draw_exogenous(const InteractionGraph& graph, const EncoderConfig& cfg, RngStream& rng);

// ---------------------------------------------------------------------------
// per-node building blocks (the batched encode uses the same kernels)
// ---------------------------------------------------------------------------

/// Message for one node: sum over neighbors j of h_j (*) ReLU(W [h_node||h_j]).
/// An empty neighbor set yields the zero vector.
Tensor causal_message(std::uint32_t node, const Tensor& h_prev,
                      std::span<const std::uint32_t> neighbors, const Tensor& w_msg);

/// Hidden factor for one node: ReLU(W [h_node || message || z_node]).
Tensor aggregate_node(const Tensor& h_node, const Tensor& message, const Tensor& z_node,
                      const Tensor& w_agg);

/// Elementwise sum of per-layer hidden factors.
Tensor layer_aggregate(std::span<const Tensor> h_layers);

/// Plain GCN layer for one node: ReLU(W * mean over {node} + neighbors).
Tensor gcn_node(std::uint32_t node, const Tensor& h_prev,
                std::span<const std::uint32_t> neighbors, const Tensor& w_gcn);

}  // namespace cngcf
