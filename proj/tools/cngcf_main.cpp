#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cngcf/commands.hpp"
#include "cngcf/config.hpp"
#include "cngcf/error.hpp"

namespace {

struct CommonFlags {
    std::string config_file;
    std::string out, data, ckpt;
    std::uint64_t seed{0};
    bool seed_given{false};
    std::vector<std::size_t> ks;
    std::size_t jobs{0};
    std::string sweep_axis;
    std::vector<double> sweep_values;
    std::string interactions, user_features, item_features, user_neighbors, item_neighbors;
    double threshold{-1.0};
    bool threshold_given{false};
    long long k_core{-1};
};

void add_common_options(CLI::App* sub, CommonFlags& flags) {
    sub->add_option("--config", flags.config_file, "JSON config file");
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--data", flags.data, "canonical dataset directory");
    sub->add_option("--ckpt", flags.ckpt, "checkpoint directory");
    sub->add_option("--seed", flags.seed, "seed override for every stage")
        ->each([&flags](const std::string&) { flags.seed_given = true; });
    sub->add_option("--k", flags.ks, "evaluation cutoff K (repeatable)");
    sub->add_option("--jobs", flags.jobs, "parallel jobs for grid/sweep/ablate");
}

cngcf::RunConfig build_config(const CommonFlags& flags) {
    cngcf::RunConfig config = flags.config_file.empty()
                                  ? cngcf::parse_run_config("")
                                  : cngcf::load_run_config(flags.config_file);
    if (!flags.out.empty()) config.out_dir = flags.out;
    if (!flags.data.empty()) config.data_dir = flags.data;
    if (!flags.ckpt.empty()) config.ckpt_dir = flags.ckpt;
    if (flags.seed_given) {
        config.seed = flags.seed;
        config.synth.seed = flags.seed;
        config.train.seed = flags.seed;
    }
    if (!flags.ks.empty()) config.eval_ks = flags.ks;
    if (flags.jobs > 0) config.jobs = flags.jobs;
    if (!flags.sweep_axis.empty()) config.sweep.axis = flags.sweep_axis;
    if (!flags.sweep_values.empty()) config.sweep.values = flags.sweep_values;
    if (!flags.interactions.empty()) config.ingest.interactions = flags.interactions;
    if (!flags.user_features.empty()) config.ingest.user_features = flags.user_features;
    if (!flags.item_features.empty()) config.ingest.item_features = flags.item_features;
    if (!flags.user_neighbors.empty()) config.ingest.user_neighbors = flags.user_neighbors;
    if (!flags.item_neighbors.empty()) config.ingest.item_neighbors = flags.item_neighbors;
    if (flags.threshold_given) config.ingest.rating_threshold = flags.threshold;
    if (flags.k_core >= 0) config.ingest.k_core = static_cast<std::size_t>(flags.k_core);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CNGCF: causality-aware graph collaborative filtering"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
    add_common_options(synth, flags);

    auto* ingest = app.add_subcommand("ingest", "ingest raw interaction logs into a canonical dump");
    add_common_options(ingest, flags);
    ingest->add_option("--interactions", flags.interactions, "interactions CSV");
    ingest->add_option("--user-features", flags.user_features, "user feature CSV");
    ingest->add_option("--item-features", flags.item_features, "item feature CSV");
    ingest->add_option("--user-neighbors", flags.user_neighbors, "user neighbor edges CSV");
    ingest->add_option("--item-neighbors", flags.item_neighbors, "item neighbor edges CSV");
    ingest->add_option("--threshold", flags.threshold, "positive-rating threshold")
        ->each([&flags](const std::string&) { flags.threshold_given = true; });
    ingest->add_option("--k-core", flags.k_core, "k-core filter (0 disables)");

    auto* train = app.add_subcommand("train", "train a model on a canonical dataset");
    add_common_options(train, flags);

    auto* evaluate = app.add_subcommand("evaluate", "top-K evaluation of a checkpoint");
    add_common_options(evaluate, flags);

    auto* ablate = app.add_subcommand("ablate", "train and compare ablation variants");
    add_common_options(ablate, flags);

    auto* sweep = app.add_subcommand("sweep", "sweep one encoder parameter axis");
    add_common_options(sweep, flags);
    sweep->add_option("--axis", flags.sweep_axis, "dropout | embedding_size");
    sweep->add_option("--values", flags.sweep_values, "axis values (repeatable)");

    auto* gridsearch = app.add_subcommand("gridsearch", "hyper-parameter grid search");
    add_common_options(gridsearch, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        const cngcf::RunConfig config = build_config(flags);
        if (synth->parsed()) {
            cngcf::commands::run_synth(config);
        } else if (ingest->parsed()) {
            cngcf::commands::run_ingest(config);
        } else if (train->parsed()) {
            cngcf::commands::run_train(config);
        } else if (evaluate->parsed()) {
            cngcf::commands::run_evaluate(config);
        } else if (ablate->parsed()) {
            cngcf::commands::run_ablate(config);
        } else if (sweep->parsed()) {
            cngcf::commands::run_sweep(config);
        } else if (gridsearch->parsed()) {
            cngcf::commands::run_gridsearch(config);
        }
        return 0;
    } catch (const cngcf::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const cngcf::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const cngcf::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
