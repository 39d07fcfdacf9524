#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cngcf/graph.hpp"
#include "cngcf/synthgen.hpp"
#include "cngcf/trainer.hpp"

namespace cngcf {

struct IngestConfig {
    std::filesystem::path interactions;
    std::filesystem::path user_features;
    std::filesystem::path item_features;
    std::filesystem::path user_neighbors;
    std::filesystem::path item_neighbors;
    double rating_threshold{3.0};
    std::size_t k_core{10};
    std::size_t max_neighbors{50};
    /// Derive co-interaction adjacency for sides without a neighbor file.
    bool derive_neighbors{true};
};

struct SweepConfig {
    std::string axis{"dropout"};  // "dropout" | "embedding_size"
    std::vector<double> values;
};

struct RunConfig {
    std::uint64_t seed{0};
    std::vector<std::size_t> eval_ks{10, 20};
    std::size_t jobs{1};
    std::filesystem::path out_dir;
    std::filesystem::path data_dir;
    std::filesystem::path ckpt_dir;
    SynthConfig synth{};
    TrainConfig train{};
    IngestConfig ingest{};
    GridSpace grid{};
    SweepConfig sweep{};
    std::vector<std::string> ablate_variants{"cngcf", "no_messages", "no_counterfactual", "gcn",
                                             "mf"};
};

/// Parses and validates a config. Every violated constraint is reported with
/// its field path in a single aggregated ConfigError. Blank text means all
/// defaults. A top-level "seed" fills synth.seed and train.seed unless the
/// file sets those explicitly.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& file);

/// Full JSON echo with every default filled in; parse(render(x))
/// reproduces x losslessly.
std::string render_run_config(const RunConfig& config);
std::string run_config_hash(const RunConfig& config);

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& json_text);
std::string train_config_hash(const TrainConfig& config);

}  // namespace cngcf
