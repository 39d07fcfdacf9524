#pragma once

#include <cstdint>
#include <vector>

#include "cngcf/encoder.hpp"
#include "cngcf/graph.hpp"
#include "cngcf/tensor.hpp"

namespace cngcf {

/// Latent-factor preference score <u, v>.
Tensor score(const Tensor& u_repr, const Tensor& v_repr);

/// Logistic interaction log-likelihood of a binary item row given scores;
/// probabilities are clamped at 1e-12.
Tensor log_likelihood(const Tensor& y_row, const Tensor& e_row);

/// Items sorted by descending preference score for one user, ties broken by
/// ascending item id. Training items are excluded when a train set is given.
std::vector<std::uint32_t> rank_items(std::uint32_t user, const LatentState& state,
                                      const InteractionGraph& graph,
                                      const InteractionSet* exclude_train);

/// Full n_users x n_items score matrix from the state's representations.
Tensor score_matrix(const LatentState& state);

/// Score matrix including the optional decoder bias terms.
Tensor score_matrix(const LatentState& state, const EncoderParams& params,
                    const EncoderConfig& cfg);

/// Scores for a subset of users (batch rows), with biases when enabled.
Tensor score_rows(const LatentState& state, const EncoderParams& params,
                  const EncoderConfig& cfg, std::span<const std::uint32_t> users);

}  // namespace cngcf
