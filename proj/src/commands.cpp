#include "cngcf/commands.hpp"

#include <iostream>

#include "cngcf/error.hpp"
#include "cngcf/eval.hpp"
#include "cngcf/log.hpp"
#include "cngcf/synthgen.hpp"
#include "cngcf/trainer.hpp"
#include "cngcf/util.hpp"

namespace cngcf::commands {

namespace {

void require_out(const RunConfig& config) {
    if (config.out_dir.empty()) throw ConfigError("--out: output directory required");
}

void write_config_echo(const RunConfig& config) {
    write_text_file(config.out_dir / "config.json", render_run_config(config));
}

struct LoadedData {
    InteractionGraph graph;
    SplitDataset splits;
};

LoadedData load_data(const RunConfig& config) {
    if (config.data_dir.empty()) throw ConfigError("--data: dataset directory required");
    LoadedData out;
    out.graph = load_canonical_dump(config.data_dir).graph;
    const RngStream split_rng("split", config.train.seed);
    out.splits = split(out.graph, config.train.ratios, split_rng);
    return out;
}

}  // namespace

void run_synth(const RunConfig& config) {
    require_out(config);
    write_config_echo(config);
    const SynthOutput output = generate(config.synth);
    write_synth_dump(output, config.synth, config.out_dir);
    log::info("synth: ", output.graph.n_users, " users, ", output.graph.n_items, " items, ",
              output.graph.interactions.size(), " interactions (density ",
              format_double(density(output.graph)), ") -> ", config.out_dir.string());
}

void run_ingest(const RunConfig& config) {
    require_out(config);
    if (config.ingest.interactions.empty()) {
        throw ConfigError("ingest.interactions: interactions file required");
    }
    write_config_echo(config);

    IngestOptions options;
    options.interactions = config.ingest.interactions;
    if (!config.ingest.user_features.empty()) options.user_features = config.ingest.user_features;
    if (!config.ingest.item_features.empty()) options.item_features = config.ingest.item_features;
    if (!config.ingest.user_neighbors.empty()) {
        options.user_neighbors = config.ingest.user_neighbors;
    }
    if (!config.ingest.item_neighbors.empty()) {
        options.item_neighbors = config.ingest.item_neighbors;
    }
    options.rating_threshold = config.ingest.rating_threshold;

    InteractionGraph graph = ingest(options);
    log::info("ingest: ", graph.n_users, " users, ", graph.n_items, " items, ",
              graph.interactions.size(), " positive interactions");
    if (config.ingest.k_core >= 1) {
        graph = k_core_filter(graph, config.ingest.k_core);
        log::info("k-core(", config.ingest.k_core, "): ", graph.n_users, " users, ",
                  graph.n_items, " items, ", graph.interactions.size(), " interactions remain");
        if (graph.n_users == 0 || graph.n_items == 0) {
            throw DataError("k-core filtering removed the whole dataset");
        }
    }
    if (config.ingest.derive_neighbors) {
        // preserve any adjacency that came from explicit neighbor files
        const bool keep_users = options.user_neighbors.has_value();
        const bool keep_items = options.item_neighbors.has_value();
        if (!keep_users || !keep_items) {
            const auto saved_users = graph.user_causal_adj;
            const auto saved_items = graph.item_causal_adj;
            derive_co_interaction_neighbors(graph, config.ingest.max_neighbors);
            if (keep_users) graph.user_causal_adj = saved_users;
            if (keep_items) graph.item_causal_adj = saved_items;
        }
    }

    DumpInfo info;
    info.source = "ingested";
    info.rating_threshold = config.ingest.rating_threshold;
    info.k_core = config.ingest.k_core;
    info.seed = config.seed;
    write_canonical_dump(graph, config.out_dir, info);
    log::info("ingest: canonical dump written to ", config.out_dir.string());
}

void run_train(const RunConfig& config) {
    require_out(config);
    write_config_echo(config);
    const LoadedData data = load_data(config);

    TrainOptions options;
    options.checkpoint_dir = config.out_dir / "checkpoint";
    if (!config.ckpt_dir.empty()) options.resume_from = config.ckpt_dir;

    const TrainResult result = train_model(data.graph, data.splits, config.train, options);
    write_text_file(config.out_dir / "training_log.csv", training_log_csv(result.log));
    log::info("train: ", result.epochs_run, " epochs, best validation Precision@10 ",
              format_double(result.best_val_precision10), " at epoch ", result.best_epoch,
              (result.stopped_early ? " (early stop)" : ""));
}

void run_evaluate(const RunConfig& config) {
    require_out(config);
    if (config.ckpt_dir.empty()) throw ConfigError("--ckpt: checkpoint directory required");
    write_config_echo(config);

    const Checkpoint checkpoint = load_checkpoint(config.ckpt_dir);
    if (config.data_dir.empty()) throw ConfigError("--data: dataset directory required");
    const InteractionGraph graph = load_canonical_dump(config.data_dir).graph;
    const RngStream split_rng("split", checkpoint.config.seed);
    const SplitDataset splits = split(graph, checkpoint.config.ratios, split_rng);

    EvalReport report =
        evaluate(checkpoint.best, graph, splits, EvalSplit::test, config.eval_ks);
    report.config_hash = checkpoint.config_hash;
    report.seed = checkpoint.config.seed;
    report.dataset_manifest = (config.data_dir / "manifest.json").string();

    write_text_file(config.out_dir / "report.json", report.to_json());
    write_text_file(config.out_dir / "report.txt", report.to_table());
    std::cout << report.to_table();
}

void run_ablate(const RunConfig& config) {
    require_out(config);
    write_config_echo(config);
    const LoadedData data = load_data(config);
    const AblationTable table =
        run_ablations(data.graph, data.splits, config.train, config.ablate_variants);
    write_text_file(config.out_dir / "ablations.csv", table.csv());
    std::cout << table.csv();
}

void run_sweep(const RunConfig& config) {
    require_out(config);
    if (config.sweep.values.empty()) throw ConfigError("sweep.values: at least one value required");
    write_config_echo(config);
    const LoadedData data = load_data(config);
    const std::string csv = sweep(data.graph, data.splits, config.train, config.sweep.axis,
                                  config.sweep.values, config.jobs);
    write_text_file(config.out_dir / "sweep.csv", csv);
    std::cout << csv;
}

void run_gridsearch(const RunConfig& config) {
    require_out(config);
    write_config_echo(config);
    const LoadedData data = load_data(config);
    const GridResult result =
        grid_search(data.graph, data.splits, config.train, config.grid, config.jobs);
    write_text_file(config.out_dir / "gridsearch.csv", result.results_csv);
    write_text_file(config.out_dir / "best_config.json", train_config_to_json(result.best_config) + "\n");
    log::info("gridsearch: best validation Precision@10 ",
              format_double(result.best_val_precision10), " at lr=",
              format_double(result.best_config.learning_rate), " l2=",
              format_double(result.best_config.l2_weight), " dropout=",
              format_double(result.best_config.dropout));
}

}  // namespace cngcf::commands
