#include "cngcf/objective.hpp"

#include <cmath>

#include "cngcf/error.hpp"
#include "cngcf/util.hpp"

namespace cngcf {

UserBatch make_user_batch(const InteractionSet& train, std::span<const std::uint32_t> users,
                          std::size_t n_items) {
    UserBatch batch;
    batch.users.assign(users.begin(), users.end());
    std::vector<double> y(users.size() * n_items, 0.0);
    for (std::size_t r = 0; r < users.size(); ++r) {
        for (std::uint32_t item : train.items_of(users[r])) {
            y[r * n_items + item] = 1.0;
        }
    }
    batch.y = Tensor::from_vector({users.size(), n_items}, std::move(y));
    return batch;
}

namespace {

Tensor kl_terms(std::span<const std::uint32_t> users, const LatentState& state,
                std::size_t n_users_total) {
    const Tensor kl_users = kl_diag_normal(gather_rows(state.mu_user, users),
                                           gather_rows(state.sigma_sq_user, users));
    const Tensor kl_items = kl_diag_normal(state.mu_item, state.sigma_sq_item);
    const double item_weight =
        static_cast<double>(users.size()) / static_cast<double>(n_users_total);
    return add(kl_users, scale(kl_items, item_weight));
}

}  // namespace

ElboTerms elbo_clean(const UserBatch& batch, const LatentState& state,
                     std::size_t n_users_total, bool multinomial_likelihood) {
    if (batch.users.empty()) throw InvalidInputError("elbo_clean: empty batch");
    const Tensor scores = matmul_nt(gather_rows(state.u, batch.users), state.v);
    ElboTerms terms;
    terms.recon = multinomial_likelihood ? multinomial_log_likelihood(batch.y, scores)
                                         : logistic_log_likelihood(batch.y, scores);
    terms.kl = kl_terms(batch.users, state, n_users_total);
    terms.elbo = sub(terms.recon, terms.kl);
    return terms;
}

CounterfactualBatch make_counterfactual(const UserBatch& batch, const InterventionSpec& spec,
                                        RngStream& rng) {
    if (spec.mode != InterventionMode::counterfactual) {
        throw InvalidInputError("make_counterfactual: spec is not in counterfactual mode");
    }
    const CounterfactualDistribution& dist = spec.distribution;
    if (dist.kind == CounterfactualDistribution::Kind::normal && dist.scale < 0.0) {
        throw ConfigError("counterfactual distribution: stddev must be >= 0");
    }
    if (dist.kind == CounterfactualDistribution::Kind::uniform && dist.scale < dist.location) {
        throw ConfigError("counterfactual distribution: upper bound below lower bound");
    }

    const std::size_t rows = batch.y.rows();
    const std::size_t n_items = batch.y.cols();
    CounterfactualBatch out;
    out.users = batch.users;

    // e' first (row-major), then y'; the draw order is part of the
    // reproducibility contract.
    std::vector<double> e_prime(rows * n_items);
    for (double& v : e_prime) {
        v = dist.kind == CounterfactualDistribution::Kind::normal
                ? rng.normal(dist.location, dist.scale)
                : rng.uniform(dist.location, dist.scale);
    }
    std::vector<double> y_prime(rows * n_items);
    for (std::size_t i = 0; i < y_prime.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-e_prime[i]));
        y_prime[i] = rng.bernoulli(p) ? 1.0 : 0.0;
    }
    out.e_prime = Tensor::from_vector({rows, n_items}, std::move(e_prime));
    out.y_prime = Tensor::from_vector({rows, n_items}, std::move(y_prime));
    return out;
}

ElboTerms elbo_counterfactual(const CounterfactualBatch& batch, const LatentState& state,
                              std::size_t n_users_total, bool multinomial_likelihood) {
    if (batch.users.empty()) throw InvalidInputError("elbo_counterfactual: empty batch");
    ElboTerms terms;
    // e' is a constant, so the reconstruction carries no encoder gradient.
    terms.recon = multinomial_likelihood
                      ? multinomial_log_likelihood(batch.y_prime, batch.e_prime)
                      : logistic_log_likelihood(batch.y_prime, batch.e_prime);
    terms.kl = kl_terms(batch.users, state, n_users_total);
    terms.elbo = sub(terms.recon, terms.kl);
    return terms;
}

Tensor loss_augmented(const Tensor& elbo_clean_term, const Tensor& elbo_cf_term, double lambda,
                      std::size_t batch_users) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ConfigError("lambda: must be in [0,1], got " + format_double(lambda));
    }
    if (batch_users == 0) throw InvalidInputError("loss_augmented: empty batch");
    const Tensor mix = add(scale(elbo_clean_term, lambda), scale(elbo_cf_term, 1.0 - lambda));
    return scale(mix, 1.0 / static_cast<double>(batch_users));
}

LossBreakdown make_breakdown(const ElboTerms& clean, const ElboTerms* counterfactual,
                             double lambda, std::size_t batch_users) {
    const double inv = 1.0 / static_cast<double>(batch_users);
    LossBreakdown out;
    out.lambda = lambda;
    out.recon = clean.recon.item() * inv;
    out.kl = clean.kl.item() * inv;
    out.elbo_clean = clean.elbo.item() * inv;
    out.elbo_cf = counterfactual != nullptr ? counterfactual->elbo.item() * inv : 0.0;
    out.total = lambda * out.elbo_clean + (1.0 - lambda) * out.elbo_cf;
    return out;
}

}  // namespace cngcf
