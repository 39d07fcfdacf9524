#include "cngcf/config.hpp"

#include <algorithm>

#include <json.hpp>

#include "cngcf/error.hpp"
#include "cngcf/util.hpp"

namespace cngcf {

using nlohmann::json;

namespace {

// Collects every violated constraint instead of stopping at the first.
struct Problems {
    std::vector<std::string> list;

    void add(const std::string& path, const std::string& message) {
        list.push_back(path + ": " + message);
    }
    void raise_if_any() const {
        if (list.empty()) return;
        std::string joined = "invalid configuration:";
        for (const std::string& p : list) joined += "\n- " + p;
        throw ConfigError(joined);
    }
};

void check_known_keys(const json& object, const std::string& path,
                      std::initializer_list<const char*> known, Problems& problems) {
    for (const auto& [key, value] : object.items()) {
        if (std::find_if(known.begin(), known.end(),
                         [&key](const char* k) { return key == k; }) == known.end()) {
            problems.add(path.empty() ? key : path + "." + key, "unknown field");
        }
    }
}

template <typename T>
T get_or(const json& object, const char* key, T fallback, const std::string& path,
         Problems& problems) {
    if (!object.contains(key)) return fallback;
    try {
        return object.at(key).get<T>();
    } catch (const json::exception&) {
        problems.add(path + key, "wrong type");
        return fallback;
    }
}

json cf_dist_to_json(const CounterfactualDistribution& dist) {
    return {{"kind", dist.kind == CounterfactualDistribution::Kind::normal ? "normal" : "uniform"},
            {"location", dist.location},
            {"scale", dist.scale}};
}

CounterfactualDistribution cf_dist_from_json(const json& object, const std::string& path,
                                             Problems& problems) {
    CounterfactualDistribution dist;
    check_known_keys(object, path, {"kind", "location", "scale"}, problems);
    const std::string kind = get_or<std::string>(object, "kind", "normal", path + ".", problems);
    if (kind == "normal") {
        dist.kind = CounterfactualDistribution::Kind::normal;
    } else if (kind == "uniform") {
        dist.kind = CounterfactualDistribution::Kind::uniform;
    } else {
        problems.add(path + ".kind", "must be 'normal' or 'uniform'");
    }
    dist.location = get_or<double>(object, "location", 0.0, path + ".", problems);
    dist.scale = get_or<double>(object, "scale", 1.0, path + ".", problems);
    return dist;
}

json train_to_json(const TrainConfig& c) {
    json out;
    out["kind"] = c.kind;
    out["learning_rate"] = c.learning_rate;
    out["l2_weight"] = c.l2_weight;
    out["dropout"] = c.dropout;
    out["batch_size"] = c.batch_size;
    out["max_epochs"] = c.max_epochs;
    out["patience"] = c.patience;
    out["lambda"] = c.lambda;
    out["h_dim"] = c.h_dim;
    out["repr_dim"] = c.repr_dim;
    out["z_dim"] = c.z_dim;
    out["layers"] = c.layers;
    out["encoder"] = c.encoder;
    out["ablate_messages"] = c.ablate_messages;
    out["ablate_counterfactual"] = c.ablate_counterfactual;
    out["multinomial_likelihood"] = c.multinomial_likelihood;
    out["sigma_exp_direct"] = c.sigma_exp_direct;
    out["id_embeddings"] = c.id_embeddings;
    out["kl_warmup_epochs"] = c.kl_warmup_epochs;
    out["kl_weight"] = c.kl_weight;
    out["elbo_samples"] = c.elbo_samples;
    out["cf_dist"] = cf_dist_to_json(c.cf_dist);
    out["ratios"] = {{"train", c.ratios.train},
                     {"validation", c.ratios.validation},
                     {"test", c.ratios.test}};
    out["seed"] = c.seed;
    return out;
}

TrainConfig train_from_json(const json& object, const std::string& path, Problems& problems,
                            std::uint64_t default_seed) {
    TrainConfig c;
    check_known_keys(object, path,
                     {"kind", "learning_rate", "l2_weight", "dropout", "batch_size", "max_epochs",
                      "patience", "lambda", "h_dim", "repr_dim", "z_dim", "layers", "encoder",
                      "ablate_messages", "ablate_counterfactual", "multinomial_likelihood",
                      "sigma_exp_direct", "id_embeddings", "elbo_samples", "kl_warmup_epochs",
                      "kl_weight", "cf_dist", "ratios", "seed"},
                     problems);
    const std::string prefix = path + ".";
    c.kind = get_or<std::string>(object, "kind", c.kind, prefix, problems);
    c.learning_rate = get_or<double>(object, "learning_rate", c.learning_rate, prefix, problems);
    c.l2_weight = get_or<double>(object, "l2_weight", c.l2_weight, prefix, problems);
    c.dropout = get_or<double>(object, "dropout", c.dropout, prefix, problems);
    c.batch_size = get_or<std::size_t>(object, "batch_size", c.batch_size, prefix, problems);
    c.max_epochs = get_or<std::size_t>(object, "max_epochs", c.max_epochs, prefix, problems);
    c.patience = get_or<std::size_t>(object, "patience", c.patience, prefix, problems);
    c.lambda = get_or<double>(object, "lambda", c.lambda, prefix, problems);
    c.h_dim = get_or<std::size_t>(object, "h_dim", c.h_dim, prefix, problems);
    c.repr_dim = get_or<std::size_t>(object, "repr_dim", c.repr_dim, prefix, problems);
    c.z_dim = get_or<std::size_t>(object, "z_dim", c.z_dim, prefix, problems);
    c.layers = get_or<std::size_t>(object, "layers", c.layers, prefix, problems);
    c.encoder = get_or<std::string>(object, "encoder", c.encoder, prefix, problems);
    c.ablate_messages = get_or<bool>(object, "ablate_messages", false, prefix, problems);
    c.ablate_counterfactual = get_or<bool>(object, "ablate_counterfactual", false, prefix, problems);
    c.multinomial_likelihood =
        get_or<bool>(object, "multinomial_likelihood", false, prefix, problems);
    c.sigma_exp_direct = get_or<bool>(object, "sigma_exp_direct", false, prefix, problems);
    c.id_embeddings = get_or<bool>(object, "id_embeddings", true, prefix, problems);
    c.kl_warmup_epochs =
        get_or<std::size_t>(object, "kl_warmup_epochs", c.kl_warmup_epochs, prefix, problems);
    c.kl_weight = get_or<double>(object, "kl_weight", c.kl_weight, prefix, problems);
    c.elbo_samples = get_or<std::size_t>(object, "elbo_samples", c.elbo_samples, prefix, problems);
    if (object.contains("cf_dist") && object.at("cf_dist").is_object()) {
        c.cf_dist = cf_dist_from_json(object.at("cf_dist"), path + ".cf_dist", problems);
    }
    if (object.contains("ratios") && object.at("ratios").is_object()) {
        const json& r = object.at("ratios");
        check_known_keys(r, path + ".ratios", {"train", "validation", "test"}, problems);
        c.ratios.train = get_or<double>(r, "train", 0.7, prefix + "ratios.", problems);
        c.ratios.validation = get_or<double>(r, "validation", 0.1, prefix + "ratios.", problems);
        c.ratios.test = get_or<double>(r, "test", 0.2, prefix + "ratios.", problems);
    }
    c.seed = get_or<std::uint64_t>(object, "seed", default_seed, prefix, problems);
    return c;
}

json synth_to_json(const SynthConfig& c) {
    json out;
    out["n_users"] = c.n_users;
    out["n_items"] = c.n_items;
    out["n_causal_neighbors"] = c.n_causal_neighbors;
    out["latent_dim"] = c.latent_dim;
    out["k_min"] = c.k_min;
    out["k_max"] = c.k_max;
    out["n_exogenous"] = c.n_exogenous;
    out["seed"] = c.seed;
    return out;
}

SynthConfig synth_from_json(const json& object, const std::string& path, Problems& problems,
                            std::uint64_t default_seed) {
    SynthConfig c;
    check_known_keys(object, path,
                     {"n_users", "n_items", "n_causal_neighbors", "latent_dim", "k_min", "k_max",
                      "n_exogenous", "seed"},
                     problems);
    const std::string prefix = path + ".";
    c.n_users = get_or<std::size_t>(object, "n_users", c.n_users, prefix, problems);
    c.n_items = get_or<std::size_t>(object, "n_items", c.n_items, prefix, problems);
    c.n_causal_neighbors =
        get_or<std::size_t>(object, "n_causal_neighbors", c.n_causal_neighbors, prefix, problems);
    c.latent_dim = get_or<std::size_t>(object, "latent_dim", c.latent_dim, prefix, problems);
    c.k_min = get_or<std::size_t>(object, "k_min", c.k_min, prefix, problems);
    c.k_max = get_or<std::size_t>(object, "k_max", c.k_max, prefix, problems);
    c.n_exogenous = get_or<std::size_t>(object, "n_exogenous", c.n_exogenous, prefix, problems);
    c.seed = get_or<std::uint64_t>(object, "seed", default_seed, prefix, problems);
    return c;
}

json ingest_to_json(const IngestConfig& c) {
    json out;
    out["interactions"] = c.interactions.string();
    out["user_features"] = c.user_features.string();
    out["item_features"] = c.item_features.string();
    out["user_neighbors"] = c.user_neighbors.string();
    out["item_neighbors"] = c.item_neighbors.string();
    out["rating_threshold"] = c.rating_threshold;
    out["k_core"] = c.k_core;
    out["max_neighbors"] = c.max_neighbors;
    out["derive_neighbors"] = c.derive_neighbors;
    return out;
}

IngestConfig ingest_from_json(const json& object, const std::string& path, Problems& problems) {
    IngestConfig c;
    check_known_keys(object, path,
                     {"interactions", "user_features", "item_features", "user_neighbors",
                      "item_neighbors", "rating_threshold", "k_core", "max_neighbors",
                      "derive_neighbors"},
                     problems);
    const std::string prefix = path + ".";
    c.interactions = get_or<std::string>(object, "interactions", "", prefix, problems);
    c.user_features = get_or<std::string>(object, "user_features", "", prefix, problems);
    c.item_features = get_or<std::string>(object, "item_features", "", prefix, problems);
    c.user_neighbors = get_or<std::string>(object, "user_neighbors", "", prefix, problems);
    c.item_neighbors = get_or<std::string>(object, "item_neighbors", "", prefix, problems);
    c.rating_threshold =
        get_or<double>(object, "rating_threshold", c.rating_threshold, prefix, problems);
    c.k_core = get_or<std::size_t>(object, "k_core", c.k_core, prefix, problems);
    c.max_neighbors = get_or<std::size_t>(object, "max_neighbors", c.max_neighbors, prefix, problems);
    c.derive_neighbors = get_or<bool>(object, "derive_neighbors", true, prefix, problems);
    return c;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    std::string trimmed = json_text;
    trimmed.erase(std::remove_if(trimmed.begin(), trimmed.end(),
                                 [](unsigned char c) { return std::isspace(c); }),
                  trimmed.end());
    json root;
    if (trimmed.empty()) {
        root = json::object();  // empty file: all defaults
    } else {
        try {
            root = json::parse(json_text);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
    }
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");

    Problems problems;
    check_known_keys(root, "",
                     {"seed", "eval_ks", "jobs", "data", "out", "ckpt", "synth", "train", "ingest",
                      "grid", "sweep", "ablate"},
                     problems);

    RunConfig config;
    config.seed = get_or<std::uint64_t>(root, "seed", 0, "", problems);
    config.eval_ks = get_or<std::vector<std::size_t>>(root, "eval_ks", {10, 20}, "", problems);
    config.jobs = get_or<std::size_t>(root, "jobs", 1, "", problems);
    config.data_dir = get_or<std::string>(root, "data", "", "", problems);
    config.out_dir = get_or<std::string>(root, "out", "", "", problems);
    config.ckpt_dir = get_or<std::string>(root, "ckpt", "", "", problems);

    config.synth = root.contains("synth") && root.at("synth").is_object()
                       ? synth_from_json(root.at("synth"), "synth", problems, config.seed)
                       : SynthConfig{.seed = config.seed};
    config.train = root.contains("train") && root.at("train").is_object()
                       ? train_from_json(root.at("train"), "train", problems, config.seed)
                       : [&] {
                             TrainConfig t;
                             t.seed = config.seed;
                             return t;
                         }();
    if (root.contains("ingest") && root.at("ingest").is_object()) {
        config.ingest = ingest_from_json(root.at("ingest"), "ingest", problems);
    }
    if (root.contains("grid") && root.at("grid").is_object()) {
        const json& g = root.at("grid");
        check_known_keys(g, "grid", {"learning_rates", "l2_weights", "dropouts"}, problems);
        config.grid.learning_rates = get_or<std::vector<double>>(
            g, "learning_rates", config.grid.learning_rates, "grid.", problems);
        config.grid.l2_weights =
            get_or<std::vector<double>>(g, "l2_weights", config.grid.l2_weights, "grid.", problems);
        config.grid.dropouts =
            get_or<std::vector<double>>(g, "dropouts", config.grid.dropouts, "grid.", problems);
    }
    if (root.contains("sweep") && root.at("sweep").is_object()) {
        const json& s = root.at("sweep");
        check_known_keys(s, "sweep", {"axis", "values"}, problems);
        config.sweep.axis = get_or<std::string>(s, "axis", "dropout", "sweep.", problems);
        config.sweep.values =
            get_or<std::vector<double>>(s, "values", {}, "sweep.", problems);
    }
    if (root.contains("ablate") && root.at("ablate").is_object()) {
        const json& a = root.at("ablate");
        check_known_keys(a, "ablate", {"variants"}, problems);
        config.ablate_variants = get_or<std::vector<std::string>>(a, "variants",
                                                                  config.ablate_variants,
                                                                  "ablate.", problems);
    }

    // semantic validation (aggregated)
    config.train.validate(problems.list, "train.");
    config.synth.validate(problems.list, "synth.");
    for (std::size_t k : config.eval_ks) {
        if (k < 1) problems.add("eval_ks", "every K must be >= 1");
    }
    if (config.eval_ks.empty()) problems.add("eval_ks", "at least one K required");
    if (config.jobs < 1) problems.add("jobs", "must be >= 1");
    if (config.sweep.axis != "dropout" && config.sweep.axis != "embedding_size") {
        problems.add("sweep.axis", "must be 'dropout' or 'embedding_size'");
    }

    problems.raise_if_any();
    return config;
}

RunConfig load_run_config(const std::filesystem::path& file) {
    return parse_run_config(read_text_file(file));
}

std::string render_run_config(const RunConfig& config) {
    json root;
    root["seed"] = config.seed;
    root["eval_ks"] = config.eval_ks;
    root["jobs"] = config.jobs;
    root["data"] = config.data_dir.string();
    root["out"] = config.out_dir.string();
    root["ckpt"] = config.ckpt_dir.string();
    root["synth"] = synth_to_json(config.synth);
    root["train"] = train_to_json(config.train);
    root["ingest"] = ingest_to_json(config.ingest);
    root["grid"] = {{"learning_rates", config.grid.learning_rates},
                    {"l2_weights", config.grid.l2_weights},
                    {"dropouts", config.grid.dropouts}};
    root["sweep"] = {{"axis", config.sweep.axis}, {"values", config.sweep.values}};
    root["ablate"] = {{"variants", config.ablate_variants}};
    return root.dump(2) + "\n";
}

std::string run_config_hash(const RunConfig& config) {
    return hash_hex(fnv1a_hash(render_run_config(config)));
}

std::string train_config_to_json(const TrainConfig& config) {
    return train_to_json(config).dump(2);
}

TrainConfig train_config_from_json(const std::string& json_text) {
    json object;
    try {
        object = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train config is not valid JSON: ") + e.what());
    }
    Problems problems;
    TrainConfig config = train_from_json(object, "train", problems, 0);
    problems.raise_if_any();
    return config;
}

std::string train_config_hash(const TrainConfig& config) {
    return hash_hex(fnv1a_hash(train_config_to_json(config)));
}

}  // namespace cngcf
