#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cngcf/adam.hpp"
#include "cngcf/encoder.hpp"
#include "cngcf/graph.hpp"
#include "cngcf/objective.hpp"

namespace cngcf {

struct TrainConfig {
    std::string kind{"cngcf"};  // "cngcf" | "mf"
    double learning_rate{0.001};
    double l2_weight{1e-4};
    double dropout{0.1};
    std::size_t batch_size{1024};
    std::size_t max_epochs{400};
    std::size_t patience{20};
    double lambda{0.5};
    std::size_t h_dim{32};
    std::size_t repr_dim{64};
    std::size_t z_dim{4};
    std::size_t layers{2};
    std::string encoder{"causal"};  // "causal" | "gcn"
    bool ablate_messages{false};
    bool ablate_counterfactual{false};
    bool multinomial_likelihood{false};
    bool sigma_exp_direct{false};
    bool id_embeddings{true};
    std::size_t elbo_samples{1};
    /// Linear KL warm-up: the KL weight ramps 0 -> kl_weight over this many
    /// epochs (0 disables the ramp). Optimizer detail; logged KL values stay
    /// unweighted.
    std::size_t kl_warmup_epochs{0};
    /// Final KL scale (beta). 1 is the plain ELBO.
    double kl_weight{1.0};
    CounterfactualDistribution cf_dist{};
    SplitRatios ratios{};
    std::uint64_t seed{0};

    void validate(std::vector<std::string>& problems, const std::string& prefix) const;
    EncoderConfig encoder_config() const;
};

struct EpochLog {
    std::size_t epoch{0};
    double elbo_clean{0}, elbo_cf{0}, kl{0}, recon{0}, total{0};
    double val_precision10{0};
};

/// `epoch,elbo_clean,elbo_cf,kl,recon,total,val_precision@10` rows; numbers
/// in shortest round-trip form so identical runs produce identical bytes.
std::string training_log_csv(const std::vector<EpochLog>& log);

struct TrainedModel {
    std::string kind;  // "cngcf" | "mf"
    EncoderConfig encoder_config{};
    EncoderParams encoder_params{};
    Tensor mf_user_factors;
    Tensor mf_item_factors;

    /// Eval-mode full score matrix (users x items), detached.
    Tensor scores(const InteractionGraph& graph) const;
    std::vector<std::pair<std::string, Tensor>> named_params() const;
};

struct TrainResult {
    TrainedModel best;   // parameters at the best validation epoch
    TrainedModel last;   // parameters after the final epoch
    std::vector<EpochLog> log;
    std::size_t epochs_run{0};
    std::size_t best_epoch{0};
    double best_val_precision10{-1.0};
    bool stopped_early{false};
};

struct TrainOptions {
    /// Non-empty: checkpoint directory updated after every epoch.
    std::filesystem::path checkpoint_dir;
    /// Continue a previous run; training state and streams line up so the
    /// combined log equals an uninterrupted run bit for bit.
    std::optional<std::filesystem::path> resume_from;
    /// Pause after this many epochs in this session (0 = unlimited). Early
    /// stopping and max_epochs still apply.
    std::size_t session_epoch_limit{0};
};

/// Full-graph training with the counterfactual-augmented objective, Adam,
/// L2 added to the loss, per-epoch validation Precision@10 and patience-based
/// early stopping.
TrainResult train(const InteractionGraph& graph, const SplitDataset& splits,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Matrix-factorization baseline with the pairwise ranking loss
/// log sigmoid(e_pos - e_neg), one uniformly resampled negative per positive
/// per epoch, same optimizer and early-stopping machinery.
TrainResult train_mf_baseline(const InteractionGraph& graph, const SplitDataset& splits,
                              const TrainConfig& config, const TrainOptions& options = {});

/// Dispatches on config.kind.
TrainResult train_model(const InteractionGraph& graph, const SplitDataset& splits,
                        const TrainConfig& config, const TrainOptions& options = {});

// ---------------------------------------------------------------------------
// checkpoints: params/ bundle (current.bin, best.bin) + manifest.json +
// optimizer.bin; parameter bundles round-trip bit-exactly.
// ---------------------------------------------------------------------------

struct Checkpoint {
    TrainConfig config;
    std::string config_hash;
    std::size_t epoch{0};
    std::size_t best_epoch{0};
    double best_val_precision10{-1.0};
    std::size_t epochs_since_improvement{0};
    std::vector<EpochLog> log;
    TrainedModel current;
    TrainedModel best;
    std::vector<char> optimizer_blob;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// grid search
// ---------------------------------------------------------------------------

struct GridSpace {
    std::vector<double> learning_rates{0.0001, 0.0005, 0.001, 0.005};
    std::vector<double> l2_weights{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
    std::vector<double> dropouts{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
};

struct GridResult {
    TrainConfig best_config;
    double best_val_precision10{-1.0};
    std::string results_csv;  // lr,l2,dropout,seed,val_precision@10,epochs
};

/// Trains every grid point (job seed = base seed + job index), selects the
/// best validation Precision@10, ties by lower L2 then lower learning rate.
GridResult grid_search(const InteractionGraph& graph, const SplitDataset& splits,
                       const TrainConfig& base, const GridSpace& space, std::size_t jobs = 1);

}  // namespace cngcf
