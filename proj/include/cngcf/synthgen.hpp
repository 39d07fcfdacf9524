#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "cngcf/graph.hpp"
#include "cngcf/rng.hpp"
#include "cngcf/tensor.hpp"

namespace cngcf {

/// Four-step synthetic dataset: feature generation, causal neighbor
/// sampling, Gaussian preference estimation, top-k interaction sampling.
struct SynthConfig {
    std::size_t n_users{1000};
    std::size_t n_items{1000};
    std::size_t n_causal_neighbors{10};  // N_c
    std::size_t latent_dim{64};          // preference vector size d
    std::size_t k_min{20};
    std::size_t k_max{100};
    std::size_t n_exogenous{4};
    std::uint64_t seed{0};

    void validate(std::vector<std::string>& problems, const std::string& prefix) const;
};

/// Step 1. Users: Bernoulli(0.5) gender, uniform income on [0,1000]; items:
/// three Bernoulli(0.5) columns (type, brand, location); both sides get
/// n_exogenous N(0,1) columns appended.
std::pair<Tensor, Tensor> generate_features(const SynthConfig& cfg, RngStream& rng);

/// Step 2. Each user: N_c distinct users uniformly at random (self excluded);
/// each item: the N_c feature-space nearest items by Euclidean distance,
/// ties by ascending id. Lists hold global node ids, sorted ascending.
std::pair<std::vector<std::vector<std::uint32_t>>, std::vector<std::vector<std::uint32_t>>>
sample_causal_neighbors(const SynthConfig& cfg, const Tensor& item_features, RngStream& rng);

struct SynthPreferences {
    Tensor user_factors;  // n_users x d, N(0, I)
    Tensor item_factors;  // n_items x d
    Tensor scores;        // n_users x n_items inner products
};

/// Step 3. Per-node standard normal factors; score = <u, v>.
SynthPreferences estimate_preferences(const SynthConfig& cfg, RngStream& rng);

/// Step 4. Per user draws k uniformly from [k_min, k_max] and keeps the k
/// items with the highest softmax-normalized scores (equivalently by raw
/// score, softmax being monotone), ties by ascending item id.
std::vector<std::vector<std::uint32_t>> sample_interactions(const SynthConfig& cfg,
                                                            const Tensor& scores, RngStream& rng);

struct SynthOutput {
    InteractionGraph graph;
    SynthPreferences preferences;
};

/// Runs all four steps with per-step streams derived from cfg.seed. Same
/// config, same dataset, bit for bit.
SynthOutput generate(const SynthConfig& cfg);

/// Canonical dataset dump plus ground_truth.csv (raw and softmax-normalized
/// scores of interacted pairs) and the ground-truth factor matrices.
void write_synth_dump(const SynthOutput& output, const SynthConfig& cfg,
                      const std::filesystem::path& dir);

}  // namespace cngcf
