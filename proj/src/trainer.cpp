#include "cngcf/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cngcf/config.hpp"
#include "cngcf/decoder.hpp"
#include "cngcf/error.hpp"
#include "cngcf/log.hpp"
#include "cngcf/metrics.hpp"
#include "cngcf/util.hpp"

namespace cngcf {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "parameter bundles assume a little-endian host");

void TrainConfig::validate(std::vector<std::string>& problems, const std::string& prefix) const {
    if (kind != "cngcf" && kind != "mf") {
        problems.push_back(prefix + "kind: must be 'cngcf' or 'mf'");
    }
    if (!(learning_rate > 0.0)) problems.push_back(prefix + "learning_rate: must be positive");
    if (l2_weight < 0.0) problems.push_back(prefix + "l2_weight: must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        problems.push_back(prefix + "dropout: must be in [0,1)");
    }
    if (batch_size < 1) problems.push_back(prefix + "batch_size: must be >= 1");
    if (max_epochs < 1) problems.push_back(prefix + "max_epochs: must be >= 1");
    if (patience < 1) problems.push_back(prefix + "patience: must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        problems.push_back(prefix + "lambda: must be in [0,1], got " + format_double(lambda));
    }
    if (kl_weight < 0.0) problems.push_back(prefix + "kl_weight: must be >= 0");
    if (h_dim < 1) problems.push_back(prefix + "h_dim: must be >= 1");
    if (repr_dim < 1) problems.push_back(prefix + "repr_dim: must be >= 1");
    if (layers < 1) problems.push_back(prefix + "layers: must be >= 1");
    if (encoder != "causal" && encoder != "gcn") {
        problems.push_back(prefix + "encoder: must be 'causal' or 'gcn'");
    }
    if (elbo_samples != 1) {
        problems.push_back(prefix + "elbo_samples: only the one-sample estimate is supported");
    }
    if (cf_dist.kind == CounterfactualDistribution::Kind::normal && cf_dist.scale < 0.0) {
        problems.push_back(prefix + "cf_dist.scale: stddev must be >= 0");
    }
    if (cf_dist.kind == CounterfactualDistribution::Kind::uniform &&
        cf_dist.scale < cf_dist.location) {
        problems.push_back(prefix + "cf_dist: upper bound below lower bound");
    }
    const double ratio_sum = ratios.train + ratios.validation + ratios.test;
    if (std::abs(ratio_sum - 1.0) > 1e-9) {
        problems.push_back(prefix + "ratios: must sum to 1, got " + format_double(ratio_sum));
    }
}

EncoderConfig TrainConfig::encoder_config() const {
    EncoderConfig cfg;
    cfg.h_dim = h_dim;
    cfg.repr_dim = repr_dim;
    cfg.z_dim = z_dim;
    cfg.layers = layers;
    cfg.dropout = dropout;
    cfg.causal_messages = !ablate_messages;
    cfg.gcn_variant = encoder == "gcn";
    cfg.sigma_exp_direct = sigma_exp_direct;
    cfg.id_embeddings = id_embeddings;
    return cfg;
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,elbo_clean,elbo_cf,kl,recon,total,val_precision@10\n";
    for (const EpochLog& row : log) {
        out += std::to_string(row.epoch);
        out += ',';
        out += format_double(row.elbo_clean);
        out += ',';
        out += format_double(row.elbo_cf);
        out += ',';
        out += format_double(row.kl);
        out += ',';
        out += format_double(row.recon);
        out += ',';
        out += format_double(row.total);
        out += ',';
        out += format_double(row.val_precision10);
        out += '\n';
    }
    return out;
}

// --------------------------------------------------------------------------
// TrainedModel
// --------------------------------------------------------------------------

Tensor TrainedModel::scores(const InteractionGraph& graph) const {
    if (kind == "mf") return matmul_nt(mf_user_factors, mf_item_factors).detach();
    const LatentState state = encode(graph, encoder_params, encoder_config, Mode::eval);
    return score_matrix(state).detach();
}

std::vector<std::pair<std::string, Tensor>> TrainedModel::named_params() const {
    if (kind == "mf") {
        return {{"user_factors", mf_user_factors}, {"item_factors", mf_item_factors}};
    }
    return encoder_params.named(encoder_config);
}

namespace {

Tensor clone_param(const Tensor& t) {
    return Tensor::param(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
}

TrainedModel clone_model(const TrainedModel& model) {
    TrainedModel out;
    out.kind = model.kind;
    out.encoder_config = model.encoder_config;
    if (model.kind == "mf") {
        out.mf_user_factors = clone_param(model.mf_user_factors);
        out.mf_item_factors = clone_param(model.mf_item_factors);
        return out;
    }
    const EncoderParams& p = model.encoder_params;
    EncoderParams& q = out.encoder_params;
    q.w_in_user = clone_param(p.w_in_user);
    q.w_in_item = clone_param(p.w_in_item);
    if (p.e_user.defined()) q.e_user = clone_param(p.e_user);
    if (p.e_item.defined()) q.e_item = clone_param(p.e_item);
    for (const Tensor& t : p.w_msg) q.w_msg.push_back(clone_param(t));
    for (const Tensor& t : p.w_agg) q.w_agg.push_back(clone_param(t));
    for (const Tensor& t : p.w_gcn) q.w_gcn.push_back(clone_param(t));
    q.w_mu_user = clone_param(p.w_mu_user);
    q.b_mu_user = clone_param(p.b_mu_user);
    q.w_sigma_user = clone_param(p.w_sigma_user);
    q.b_sigma_user = clone_param(p.b_sigma_user);
    q.w_mu_item = clone_param(p.w_mu_item);
    q.b_mu_item = clone_param(p.b_mu_item);
    q.w_sigma_item = clone_param(p.w_sigma_item);
    q.b_sigma_item = clone_param(p.b_sigma_item);
    return out;
}

// ---------------------------------------------------------------------
// parameter bundles (bit-exact binary round trip)
// ---------------------------------------------------------------------

constexpr char kBundleMagic[8] = {'C', 'N', 'G', 'C', 'F', 'P', 'B', '1'};

void write_bundle(const std::filesystem::path& path,
                  const std::vector<std::pair<std::string, Tensor>>& tensors) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write parameter bundle: " + path.string());
    out.write(kBundleMagic, sizeof(kBundleMagic));
    const std::uint64_t count = tensors.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& [name, tensor] : tensors) {
        const std::uint64_t name_len = name.size();
        out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        const std::uint64_t rank = tensor.shape().size();
        out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
        for (std::size_t d : tensor.shape()) {
            const std::uint64_t dim = d;
            out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        }
        const auto data = tensor.data();
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!out) throw IoError("failed writing parameter bundle: " + path.string());
}

std::map<std::string, Tensor> read_bundle(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read parameter bundle: " + path.string());
    char magic[8] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kBundleMagic, sizeof(magic)) != 0) {
        throw IoError(path.string() + ": not a parameter bundle");
    }
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    std::map<std::string, Tensor> out;
    for (std::uint64_t t = 0; t < count && in; ++t) {
        std::uint64_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        std::uint64_t rank = 0;
        in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
        Shape shape(rank);
        for (std::uint64_t d = 0; d < rank; ++d) {
            std::uint64_t dim = 0;
            in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
            shape[d] = dim;
        }
        std::vector<double> data(shape_size(shape));
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        out.emplace(std::move(name), Tensor::param(std::move(shape), std::move(data)));
    }
    if (!in) throw IoError(path.string() + ": truncated parameter bundle");
    return out;
}

TrainedModel model_from_bundle(const TrainConfig& config,
                               const std::map<std::string, Tensor>& bundle) {
    auto take = [&bundle](const std::string& name) {
        const auto it = bundle.find(name);
        if (it == bundle.end()) throw IoError("parameter bundle is missing tensor " + name);
        return it->second;
    };
    TrainedModel model;
    model.kind = config.kind;
    model.encoder_config = config.encoder_config();
    if (config.kind == "mf") {
        model.mf_user_factors = take("user_factors");
        model.mf_item_factors = take("item_factors");
        return model;
    }
    EncoderParams& p = model.encoder_params;
    p.w_in_user = take("w_in_user");
    p.w_in_item = take("w_in_item");
    if (model.encoder_config.id_embeddings) {
        p.e_user = take("e_user");
        p.e_item = take("e_item");
    }
    for (std::size_t l = 0; l < config.layers; ++l) {
        if (model.encoder_config.gcn_variant) {
            p.w_gcn.push_back(take("w_gcn." + std::to_string(l)));
        } else {
            p.w_msg.push_back(take("w_msg." + std::to_string(l)));
            p.w_agg.push_back(take("w_agg." + std::to_string(l)));
        }
    }
    p.w_mu_user = take("w_mu_user");
    p.b_mu_user = take("b_mu_user");
    p.w_sigma_user = take("w_sigma_user");
    p.b_sigma_user = take("b_sigma_user");
    p.w_mu_item = take("w_mu_item");
    p.b_mu_item = take("b_mu_item");
    p.w_sigma_item = take("w_sigma_item");
    p.b_sigma_item = take("b_sigma_item");
    return model;
}

// ---------------------------------------------------------------------
// shared training plumbing
// ---------------------------------------------------------------------

void throw_if_invalid(const TrainConfig& config) {
    std::vector<std::string> problems;
    config.validate(problems, "train.");
    if (!problems.empty()) {
        std::string joined = "invalid configuration:";
        for (const std::string& p : problems) joined += "\n- " + p;
        throw ConfigError(joined);
    }
}

double validation_precision10(const Tensor& scores, const InteractionGraph& graph,
                              const SplitDataset& splits) {
    const auto data = scores.data();
    double total = 0.0;
    std::size_t counted = 0;
    std::vector<char> excluded(graph.n_items, 0);
    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        const auto targets = splits.validation.items_of(u);
        if (targets.empty()) continue;
        std::fill(excluded.begin(), excluded.end(), 0);
        for (std::uint32_t i : splits.train.items_of(u)) excluded[i] = 1;
        const std::span<const double> row(data.data() + static_cast<std::size_t>(u) * graph.n_items,
                                          graph.n_items);
        const auto ranked = rank_by_score(row, &excluded);
        const std::size_t depth = std::min<std::size_t>(10, ranked.size());
        std::size_t hits = 0;
        for (std::size_t pos = 0; pos < depth; ++pos) {
            if (std::binary_search(targets.begin(), targets.end(), ranked[pos])) ++hits;
        }
        total += static_cast<double>(hits) / 10.0;
        ++counted;
    }
    return counted > 0 ? total / static_cast<double>(counted) : 0.0;
}

Tensor l2_penalty(const std::vector<Tensor>& params) {
    Tensor total = Tensor::scalar(0.0);
    for (const Tensor& p : params) total = add(total, sum(mul(p, p)));
    return total;
}

std::vector<std::uint32_t> shuffled_indices(std::size_t n, RngStream& rng) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_int(i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

struct EarlyStopState {
    std::size_t best_epoch{0};
    double best_val{-1.0};
    std::size_t since_improvement{0};
};

struct SessionBookkeeping {
    std::size_t start_epoch{0};
    std::vector<EpochLog> log;
    EarlyStopState stop;
    TrainedModel best_model;
    TrainedModel current_model;
    std::vector<char> optimizer_blob;
    bool resumed{false};
};

std::vector<char> serialize_adam(const AdamState& state) {
    std::ostringstream out(std::ios::binary);
    state.save(out);
    const std::string s = out.str();
    return std::vector<char>(s.begin(), s.end());
}

void restore_adam(AdamState& state, const std::vector<char>& blob) {
    std::istringstream in(std::string(blob.begin(), blob.end()), std::ios::binary);
    state.load(in);
}

}  // namespace

// --------------------------------------------------------------------------
// checkpoints
// --------------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint) {
    std::filesystem::create_directories(dir / "params");
    write_bundle(dir / "params" / "current.bin", checkpoint.current.named_params());
    write_bundle(dir / "params" / "best.bin", checkpoint.best.named_params());
    {
        std::ofstream out(dir / "optimizer.bin", std::ios::binary);
        if (!out) throw IoError("cannot write optimizer state");
        out.write(checkpoint.optimizer_blob.data(),
                  static_cast<std::streamsize>(checkpoint.optimizer_blob.size()));
    }
    json manifest;
    manifest["format"] = "cngcf-checkpoint-v1";
    manifest["kind"] = checkpoint.config.kind;
    manifest["config"] = json::parse(train_config_to_json(checkpoint.config));
    manifest["config_hash"] = checkpoint.config_hash;
    manifest["epoch"] = checkpoint.epoch;
    manifest["best_epoch"] = checkpoint.best_epoch;
    manifest["best_val_precision10"] = checkpoint.best_val_precision10;
    manifest["epochs_since_improvement"] = checkpoint.epochs_since_improvement;
    json log_rows = json::array();
    for (const EpochLog& row : checkpoint.log) {
        log_rows.push_back({row.epoch, row.elbo_clean, row.elbo_cf, row.kl, row.recon, row.total,
                            row.val_precision10});
    }
    manifest["log"] = std::move(log_rows);
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    const json manifest = json::parse(read_text_file(dir / "manifest.json"));
    if (manifest.value("format", "") != "cngcf-checkpoint-v1") {
        throw IoError(dir.string() + ": not a checkpoint directory");
    }
    Checkpoint out;
    out.config = train_config_from_json(manifest.at("config").dump());
    out.config_hash = manifest.value("config_hash", "");
    out.epoch = manifest.value("epoch", std::size_t{0});
    out.best_epoch = manifest.value("best_epoch", std::size_t{0});
    out.best_val_precision10 = manifest.value("best_val_precision10", -1.0);
    out.epochs_since_improvement = manifest.value("epochs_since_improvement", std::size_t{0});
    for (const auto& row : manifest.value("log", json::array())) {
        EpochLog entry;
        entry.epoch = row.at(0).get<std::size_t>();
        entry.elbo_clean = row.at(1).get<double>();
        entry.elbo_cf = row.at(2).get<double>();
        entry.kl = row.at(3).get<double>();
        entry.recon = row.at(4).get<double>();
        entry.total = row.at(5).get<double>();
        entry.val_precision10 = row.at(6).get<double>();
        out.log.push_back(entry);
    }
    out.current = model_from_bundle(out.config, read_bundle(dir / "params" / "current.bin"));
    out.best = model_from_bundle(out.config, read_bundle(dir / "params" / "best.bin"));
    const std::string blob = read_text_file(dir / "optimizer.bin");
    out.optimizer_blob.assign(blob.begin(), blob.end());
    return out;
}

// --------------------------------------------------------------------------
// CNGCF training
// --------------------------------------------------------------------------

namespace {

SessionBookkeeping resume_session(const TrainConfig& config, const std::filesystem::path& dir) {
    Checkpoint ckpt = load_checkpoint(dir);
    if (ckpt.config_hash != train_config_hash(config)) {
        throw ConfigError("resume: checkpoint was written with a different configuration");
    }
    SessionBookkeeping session;
    session.start_epoch = ckpt.epoch;
    session.log = std::move(ckpt.log);
    session.stop = {ckpt.best_epoch, ckpt.best_val_precision10, ckpt.epochs_since_improvement};
    session.best_model = std::move(ckpt.best);
    session.current_model = std::move(ckpt.current);
    session.optimizer_blob = std::move(ckpt.optimizer_blob);
    session.resumed = true;
    return session;
}

}  // namespace

TrainResult train(const InteractionGraph& graph, const SplitDataset& splits,
                  const TrainConfig& config, const TrainOptions& options) {
    throw_if_invalid(config);
    if (config.kind != "cngcf") throw ConfigError("train: config.kind must be 'cngcf'");
    if (graph.n_users == 0 || graph.n_items == 0) throw DataError("train: empty graph");

    const EncoderConfig ecfg = config.encoder_config();
    const RngStream base("train", config.seed);

    TrainedModel model;
    model.kind = "cngcf";
    model.encoder_config = ecfg;
    SessionBookkeeping session;
    if (options.resume_from) {
        session = resume_session(config, *options.resume_from);
        model = std::move(session.current_model);
    } else {
        RngStream init_rng = base.derive("init");
        model.encoder_params =
            EncoderParams::init(ecfg, graph.user_features.cols(), graph.item_features.cols(),
                                graph.n_users, graph.n_items, init_rng);
        session.best_model = clone_model(model);
    }

    std::vector<Tensor> params = model.encoder_params.all(ecfg);
    AdamState adam(params, AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
    if (session.resumed) restore_adam(adam, session.optimizer_blob);

    const bool counterfactual_enabled = !config.ablate_counterfactual && config.lambda < 1.0;
    InterventionSpec cf_spec;
    cf_spec.mode = InterventionMode::counterfactual;
    cf_spec.distribution = config.cf_dist;

    TrainResult result;
    result.log = session.log;
    EarlyStopState stop = session.stop;
    std::size_t session_epochs = 0;

    for (std::size_t epoch = session.start_epoch + 1; epoch <= config.max_epochs; ++epoch) {
        const double ramp =
            config.kl_warmup_epochs > 0 && epoch <= config.kl_warmup_epochs
                ? static_cast<double>(epoch) / static_cast<double>(config.kl_warmup_epochs)
                : 1.0;
        const double kl_weight = config.kl_weight * ramp;
        RngStream noise_rng = base.derive("noise", epoch);
        RngStream dropout_rng = base.derive("dropout", epoch);
        RngStream cf_rng = base.derive("counterfactual", epoch);
        RngStream batch_rng = base.derive("batch", epoch);

        // Exogenous draws are fixed for the whole epoch.
        Tensor exogenous;
        if (!ecfg.gcn_variant) {
            RngStream z_rng = base.derive("exogenous", epoch);
            exogenous = draw_exogenous(graph, ecfg, z_rng);
        }

        const std::vector<std::uint32_t> order = shuffled_indices(graph.n_users, batch_rng);
        double sum_recon = 0, sum_kl = 0, sum_clean = 0, sum_cf = 0, sum_total = 0;

        for (std::size_t begin = 0, batch_index = 0; begin < order.size();
             begin += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(begin + config.batch_size, order.size());
            const std::span<const std::uint32_t> batch_users(order.data() + begin, end - begin);

            EncodeInputs inputs;
            inputs.exogenous = exogenous.defined() ? &exogenous : nullptr;
            inputs.noise = &noise_rng;
            inputs.dropout = &dropout_rng;
            const LatentState state = encode(graph, model.encoder_params, ecfg, Mode::train, inputs);

            const UserBatch batch = make_user_batch(splits.train, batch_users, graph.n_items);
            const ElboTerms clean =
                elbo_clean(batch, state, graph.n_users, config.multinomial_likelihood);

            ElboTerms cf_terms;
            double lambda_eff = 1.0;
            Tensor cf_elbo = Tensor::scalar(0.0);
            if (counterfactual_enabled) {
                const CounterfactualBatch cf_batch = make_counterfactual(batch, cf_spec, cf_rng);
                cf_terms = elbo_counterfactual(cf_batch, state, graph.n_users,
                                               config.multinomial_likelihood);
                cf_elbo = cf_terms.elbo;
                lambda_eff = config.lambda;
            }

            const Tensor clean_objective =
                kl_weight < 1.0 ? sub(clean.recon, scale(clean.kl, kl_weight)) : clean.elbo;
            const Tensor cf_objective = counterfactual_enabled && kl_weight < 1.0
                                            ? sub(cf_terms.recon, scale(cf_terms.kl, kl_weight))
                                            : cf_elbo;
            const Tensor objective =
                loss_augmented(clean_objective, cf_objective, lambda_eff, batch.users.size());
            Tensor loss = scale(objective, -1.0);
            if (config.l2_weight > 0.0) {
                loss = add(loss, scale(l2_penalty(params), config.l2_weight));
            }

            const LossBreakdown breakdown = make_breakdown(
                clean, counterfactual_enabled ? &cf_terms : nullptr, lambda_eff,
                batch.users.size());
            if (!std::isfinite(loss.item())) {
                throw NumericError(
                    "non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                    std::to_string(batch_index) + ": recon=" + format_double(breakdown.recon) +
                    " kl=" + format_double(breakdown.kl) +
                    " elbo_cf=" + format_double(breakdown.elbo_cf));
            }

            const GradientMap grads = backward(loss);
            adam_step(params, grads, adam);

            const double weight = static_cast<double>(batch.users.size());
            sum_recon += breakdown.recon * weight;
            sum_kl += breakdown.kl * weight;
            sum_clean += breakdown.elbo_clean * weight;
            sum_cf += breakdown.elbo_cf * weight;
            sum_total += breakdown.total * weight;
        }

        EpochLog row;
        row.epoch = epoch;
        const double inv_users = 1.0 / static_cast<double>(graph.n_users);
        row.recon = sum_recon * inv_users;
        row.kl = sum_kl * inv_users;
        row.elbo_clean = sum_clean * inv_users;
        row.elbo_cf = sum_cf * inv_users;
        row.total = sum_total * inv_users;
        row.val_precision10 = validation_precision10(model.scores(graph), graph, splits);
        result.log.push_back(row);
        ++session_epochs;

        if (row.val_precision10 > stop.best_val) {
            stop.best_val = row.val_precision10;
            stop.best_epoch = epoch;
            stop.since_improvement = 0;
            session.best_model = clone_model(model);
        } else {
            stop.since_improvement += 1;
        }

        if (!options.checkpoint_dir.empty()) {
            Checkpoint ckpt;
            ckpt.config = config;
            ckpt.config_hash = train_config_hash(config);
            ckpt.epoch = epoch;
            ckpt.best_epoch = stop.best_epoch;
            ckpt.best_val_precision10 = stop.best_val;
            ckpt.epochs_since_improvement = stop.since_improvement;
            ckpt.log = result.log;
            ckpt.current = model;
            ckpt.best = session.best_model;
            ckpt.optimizer_blob = serialize_adam(adam);
            save_checkpoint(options.checkpoint_dir, ckpt);
        }

        if (stop.since_improvement >= config.patience) {
            result.stopped_early = true;
            break;
        }
        if (options.session_epoch_limit > 0 && session_epochs >= options.session_epoch_limit) {
            break;
        }
    }

    result.best = session.best_model;
    result.last = clone_model(model);
    result.epochs_run = result.log.size();
    result.best_epoch = stop.best_epoch;
    result.best_val_precision10 = stop.best_val;
    return result;
}

// --------------------------------------------------------------------------
// matrix-factorization baseline (pairwise ranking loss)
// --------------------------------------------------------------------------

TrainResult train_mf_baseline(const InteractionGraph& graph, const SplitDataset& splits,
                              const TrainConfig& config, const TrainOptions& options) {
    throw_if_invalid(config);
    if (graph.n_users == 0 || graph.n_items == 0) throw DataError("train: empty graph");

    const RngStream base("train-mf", config.seed);

    TrainedModel model;
    model.kind = "mf";
    SessionBookkeeping session;
    if (options.resume_from) {
        session = resume_session(config, *options.resume_from);
        model = std::move(session.current_model);
    } else {
        RngStream init_rng = base.derive("init");
        auto glorot_matrix = [&init_rng](std::size_t rows, std::size_t cols) {
            const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
            std::vector<double> values(rows * cols);
            for (double& v : values) v = init_rng.uniform(-bound, bound);
            return Tensor::param({rows, cols}, std::move(values));
        };
        model.mf_user_factors = glorot_matrix(graph.n_users, config.repr_dim);
        model.mf_item_factors = glorot_matrix(graph.n_items, config.repr_dim);
        session.best_model = clone_model(model);
    }

    std::vector<Tensor> params = {model.mf_user_factors, model.mf_item_factors};
    AdamState adam(params, AdamConfig{config.learning_rate, 0.9, 0.999, 1e-8});
    if (session.resumed) restore_adam(adam, session.optimizer_blob);

    const auto positives = splits.train.pairs();
    if (positives.empty()) throw DataError("train_mf_baseline: empty training split");

    TrainResult result;
    result.log = session.log;
    EarlyStopState stop = session.stop;
    std::size_t session_epochs = 0;

    for (std::size_t epoch = session.start_epoch + 1; epoch <= config.max_epochs; ++epoch) {
        RngStream order_rng = base.derive("order", epoch);
        RngStream negative_rng = base.derive("negatives", epoch);
        const std::vector<std::uint32_t> order = shuffled_indices(positives.size(), order_rng);

        double sum_recon = 0.0;
        for (std::size_t begin = 0, batch_index = 0; begin < order.size();
             begin += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(begin + config.batch_size, order.size());
            const std::size_t batch_n = end - begin;
            std::vector<std::uint32_t> users(batch_n), pos_items(batch_n), neg_items(batch_n);
            for (std::size_t r = 0; r < batch_n; ++r) {
                const auto& [u, i] = positives[order[begin + r]];
                users[r] = u;
                pos_items[r] = i;
                // uniform negative outside the user's training items
                std::uint32_t candidate = 0;
                for (int attempt = 0; attempt < 100; ++attempt) {
                    candidate = static_cast<std::uint32_t>(negative_rng.uniform_int(graph.n_items));
                    if (!splits.train.contains(u, candidate)) break;
                }
                neg_items[r] = candidate;
            }

            const Tensor user_rows = gather_rows(model.mf_user_factors, users);
            const Tensor diff =
                sub(row_sum(mul(user_rows, gather_rows(model.mf_item_factors, pos_items))),
                    row_sum(mul(user_rows, gather_rows(model.mf_item_factors, neg_items))));
            const Tensor recon = logistic_log_likelihood(Tensor::full({batch_n}, 1.0), diff);
            Tensor loss = scale(recon, -1.0 / static_cast<double>(batch_n));
            if (config.l2_weight > 0.0) {
                loss = add(loss, scale(l2_penalty(params), config.l2_weight));
            }
            if (!std::isfinite(loss.item())) {
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(batch_index) +
                                   ": recon=" + format_double(recon.item()));
            }
            const GradientMap grads = backward(loss);
            adam_step(params, grads, adam);
            sum_recon += recon.item();
        }

        EpochLog row;
        row.epoch = epoch;
        row.recon = sum_recon / static_cast<double>(positives.size());
        row.elbo_clean = row.recon;
        row.total = row.recon;
        row.val_precision10 = validation_precision10(model.scores(graph), graph, splits);
        result.log.push_back(row);
        ++session_epochs;

        if (row.val_precision10 > stop.best_val) {
            stop.best_val = row.val_precision10;
            stop.best_epoch = epoch;
            stop.since_improvement = 0;
            session.best_model = clone_model(model);
        } else {
            stop.since_improvement += 1;
        }

        if (!options.checkpoint_dir.empty()) {
            Checkpoint ckpt;
            ckpt.config = config;
            ckpt.config_hash = train_config_hash(config);
            ckpt.epoch = epoch;
            ckpt.best_epoch = stop.best_epoch;
            ckpt.best_val_precision10 = stop.best_val;
            ckpt.epochs_since_improvement = stop.since_improvement;
            ckpt.log = result.log;
            ckpt.current = model;
            ckpt.best = session.best_model;
            ckpt.optimizer_blob = serialize_adam(adam);
            save_checkpoint(options.checkpoint_dir, ckpt);
        }

        if (stop.since_improvement >= config.patience) {
            result.stopped_early = true;
            break;
        }
        if (options.session_epoch_limit > 0 && session_epochs >= options.session_epoch_limit) {
            break;
        }
    }

    result.best = session.best_model;
    result.last = clone_model(model);
    result.epochs_run = result.log.size();
    result.best_epoch = stop.best_epoch;
    result.best_val_precision10 = stop.best_val;
    return result;
}

TrainResult train_model(const InteractionGraph& graph, const SplitDataset& splits,
                        const TrainConfig& config, const TrainOptions& options) {
    return config.kind == "mf" ? train_mf_baseline(graph, splits, config, options)
                               : train(graph, splits, config, options);
}

// --------------------------------------------------------------------------
// grid search
// --------------------------------------------------------------------------

GridResult grid_search(const InteractionGraph& graph, const SplitDataset& splits,
                       const TrainConfig& base, const GridSpace& space, std::size_t jobs) {
    if (space.learning_rates.empty() || space.l2_weights.empty() || space.dropouts.empty()) {
        throw ConfigError("grid_search: empty grid");
    }

    struct Cell {
        TrainConfig config;
        double val{-1.0};
        std::size_t epochs{0};
    };
    std::vector<Cell> cells;
    std::size_t job_index = 0;
    for (double lr : space.learning_rates) {
        for (double l2 : space.l2_weights) {
            for (double p : space.dropouts) {
                TrainConfig config = base;
                config.learning_rate = lr;
                config.l2_weight = l2;
                config.dropout = p;
                config.seed = base.seed + job_index;
                cells.push_back(Cell{std::move(config), -1.0, 0});
                ++job_index;
            }
        }
    }

    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, cells.size()));
    auto run_range = [&graph, &splits, &cells](std::size_t begin, std::size_t stride) {
        for (std::size_t c = begin; c < cells.size(); c += stride) {
            const TrainResult r = train_model(graph, splits, cells[c].config, {});
            cells[c].val = r.best_val_precision10;
            cells[c].epochs = r.epochs_run;
        }
    };
    if (workers == 1) {
        run_range(0, 1);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_range, w, workers);
        for (std::thread& t : pool) t.join();
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < cells.size(); ++c) {
        const Cell& a = cells[c];
        const Cell& b = cells[best];
        const auto key = [](const Cell& cell) {
            return std::make_tuple(-cell.val, cell.config.l2_weight, cell.config.learning_rate,
                                   cell.config.dropout);
        };
        if (key(a) < key(b)) best = c;
    }

    GridResult out;
    out.best_config = cells[best].config;
    out.best_val_precision10 = cells[best].val;
    std::string csv = "learning_rate,l2_weight,dropout,seed,val_precision@10,epochs\n";
    for (const Cell& cell : cells) {
        csv += format_double(cell.config.learning_rate);
        csv += ',';
        csv += format_double(cell.config.l2_weight);
        csv += ',';
        csv += format_double(cell.config.dropout);
        csv += ',';
        csv += std::to_string(cell.config.seed);
        csv += ',';
        csv += format_double(cell.val);
        csv += ',';
        csv += std::to_string(cell.epochs);
        csv += '\n';
    }
    out.results_csv = std::move(csv);
    return out;
}

}  // namespace cngcf
