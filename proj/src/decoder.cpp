#include "cngcf/decoder.hpp"

#include "cngcf/error.hpp"
#include "cngcf/metrics.hpp"

namespace cngcf {

Tensor score(const Tensor& u_repr, const Tensor& v_repr) { return dot(u_repr, v_repr); }

Tensor log_likelihood(const Tensor& y_row, const Tensor& e_row) {
    return logistic_log_likelihood(y_row, e_row);
}

std::vector<std::uint32_t> rank_items(std::uint32_t user, const LatentState& state,
                                      const InteractionGraph& graph,
                                      const InteractionSet* exclude_train) {
    if (user >= graph.n_users) {
        throw InvalidInputError("rank_items: unknown user " + std::to_string(user));
    }
    const std::size_t d = state.u.cols();
    const auto u_data = state.u.data();
    const auto v_data = state.v.data();
    const double* u_row = u_data.data() + static_cast<std::size_t>(user) * d;
    std::vector<double> scores(graph.n_items);
    for (std::size_t i = 0; i < graph.n_items; ++i) {
        const double* v_row = v_data.data() + i * d;
        double acc = 0.0;
        for (std::size_t f = 0; f < d; ++f) acc += u_row[f] * v_row[f];
        scores[i] = acc;
    }
    if (exclude_train == nullptr) return rank_by_score(scores);
    std::vector<char> excluded(graph.n_items, 0);
    for (std::uint32_t i : exclude_train->items_of(user)) excluded[i] = 1;
    return rank_by_score(scores, &excluded);
}

Tensor score_matrix(const LatentState& state) { return matmul_nt(state.u, state.v); }

Tensor score_matrix(const LatentState& state, const EncoderParams& params,
                    const EncoderConfig& cfg) {
    Tensor scores = matmul_nt(state.u, state.v);
    if (!cfg.decoder_bias) return scores;
    scores = add_col_broadcast(scores, params.b_score_user);
    scores = add_row_broadcast(scores, params.b_score_item);
    return add_scalar_broadcast(scores, params.b_score_global);
}

Tensor score_rows(const LatentState& state, const EncoderParams& params,
                  const EncoderConfig& cfg, std::span<const std::uint32_t> users) {
    Tensor scores = matmul_nt(gather_rows(state.u, users), state.v);
    if (!cfg.decoder_bias) return scores;
    scores = add_col_broadcast(scores, gather_rows(params.b_score_user, users));
    scores = add_row_broadcast(scores, params.b_score_item);
    return add_scalar_broadcast(scores, params.b_score_global);
}

}  // namespace cngcf
