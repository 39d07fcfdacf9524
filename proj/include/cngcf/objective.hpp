#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cngcf/encoder.hpp"
#include "cngcf/graph.hpp"
#include "cngcf/rng.hpp"
#include "cngcf/tensor.hpp"

namespace cngcf {

enum class InterventionMode { clean, counterfactual };

struct CounterfactualDistribution {
    enum class Kind { normal, uniform };
    Kind kind{Kind::normal};
    double location{0.0};  // mean, or lower bound for uniform
    double scale{1.0};     // stddev, or upper bound for uniform
};

/// do(e=o) retains the observed preference (clean scenario); do(e=e') draws
/// intervened preference vectors from the configured distribution.
struct InterventionSpec {
    InterventionMode mode{InterventionMode::clean};
    CounterfactualDistribution distribution{};
};

struct LossBreakdown {
    double recon{0.0};
    double kl{0.0};
    double elbo_clean{0.0};
    double elbo_cf{0.0};
    double total{0.0};
    double lambda{1.0};
};

struct UserBatch {
    std::vector<std::uint32_t> users;
    Tensor y;  // |B| x n_items binary targets built from the training split
};

UserBatch make_user_batch(const InteractionSet& train, std::span<const std::uint32_t> users,
                          std::size_t n_items);

struct ElboTerms {
    Tensor recon;
    Tensor kl;
    Tensor elbo;  // recon - kl
};

/// Clean-scenario ELBO over a user batch: one-sample logistic reconstruction
/// of the observed rows minus the KL of the batch users and the item table.
/// The item KL is weighted by |B| / n_users_total so an epoch's batches sum
/// to exactly one full item pass.
ElboTerms elbo_clean(const UserBatch& batch, const LatentState& state,
                     std::size_t n_users_total, bool multinomial_likelihood = false);

struct CounterfactualBatch {
    std::vector<std::uint32_t> users;
    Tensor e_prime;  // |B| x n_items intervened preference scores
    Tensor y_prime;  // |B| x n_items targets drawn Bernoulli(sigmoid(e'))
};

/// Counterfactual instances for do(e=e'): i.i.d. intervened scores with the
/// same dimension as e, then resampled targets. Deterministic under the
/// stream's seed.
CounterfactualBatch make_counterfactual(const UserBatch& batch, const InterventionSpec& spec,
                                        RngStream& rng);

/// Counterfactual ELBO: the intervention severs e from its parents, so e'
/// enters the likelihood directly and no gradient reaches the encoder through
/// the reconstruction term; the KL terms match the clean scenario.
ElboTerms elbo_counterfactual(const CounterfactualBatch& batch, const LatentState& state,
                              std::size_t n_users_total, bool multinomial_likelihood = false);

/// lambda * elbo_clean + (1 - lambda) * elbo_cf, averaged over batch users
/// (a maximization objective; the trainer minimizes its negation).
/// lambda must lie in [0, 1].
Tensor loss_augmented(const Tensor& elbo_clean_term, const Tensor& elbo_cf_term, double lambda,
                      std::size_t batch_users);

LossBreakdown make_breakdown(const ElboTerms& clean, const ElboTerms* counterfactual,
                             double lambda, std::size_t batch_users);

}  // namespace cngcf
