#include "cngcf/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cngcf/error.hpp"
#include "cngcf/log.hpp"
#include "cngcf/util.hpp"

namespace cngcf {

using nlohmann::json;

std::string EvalReport::to_json() const {
    json out;
    out["users_evaluated"] = users_evaluated;
    out["users_skipped"] = users_skipped;
    out["config_hash"] = config_hash;
    out["seed"] = seed;
    out["dataset_manifest"] = dataset_manifest;
    json rows = json::array();
    for (const MetricRow& row : averages) {
        rows.push_back({{"k", row.k},
                        {"precision", row.precision},
                        {"recall", row.recall},
                        {"ndcg", row.ndcg}});
    }
    out["metrics"] = std::move(rows);
    json user_rows = json::array();
    for (const PerUserMetrics& row : per_user) {
        user_rows.push_back({row.user, row.k, row.precision, row.recall, row.ndcg});
    }
    out["per_user"] = std::move(user_rows);
    return out.dump(2) + "\n";
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out << std::left << std::setw(6) << "K" << std::right << std::setw(14) << "Precision@K"
        << std::setw(14) << "Recall@K" << std::setw(14) << "NDCG@K" << '\n';
    out << std::string(48, '-') << '\n';
    out << std::setprecision(6) << std::fixed;
    for (const MetricRow& row : averages) {
        out << std::left << std::setw(6) << row.k << std::right << std::setw(14) << row.precision
            << std::setw(14) << row.recall << std::setw(14) << row.ndcg << '\n';
    }
    out << "users evaluated: " << users_evaluated << ", skipped (no targets): " << users_skipped
        << '\n';
    return out.str();
}

EvalReport evaluate(const TrainedModel& model, const InteractionGraph& graph,
                    const SplitDataset& splits, EvalSplit which, std::span<const std::size_t> ks) {
    if (ks.empty()) throw InvalidInputError("evaluate: no K values given");
    const InteractionSet& targets =
        which == EvalSplit::validation ? splits.validation : splits.test;
    if (targets.empty()) throw DataError("evaluate: target split is empty");

    const Tensor scores = model.scores(graph);
    const auto data = scores.data();

    EvalReport report;
    std::vector<double> sum_precision(ks.size(), 0.0);
    std::vector<double> sum_recall(ks.size(), 0.0);
    std::vector<double> sum_ndcg(ks.size(), 0.0);
    std::vector<char> excluded(graph.n_items, 0);

    for (std::uint32_t u = 0; u < graph.n_users; ++u) {
        const auto relevant = targets.items_of(u);
        if (relevant.empty()) {
            report.users_skipped += 1;
            continue;
        }
        std::fill(excluded.begin(), excluded.end(), 0);
        for (std::uint32_t i : splits.train.items_of(u)) excluded[i] = 1;
        const std::span<const double> row(
            data.data() + static_cast<std::size_t>(u) * graph.n_items, graph.n_items);
        const std::vector<std::uint32_t> ranked = rank_by_score(row, &excluded);
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
            const auto [precision, recall] = precision_recall_at_k(ranked, relevant, ks[ki]);
            const double ndcg = ndcg_at_k(ranked, relevant, ks[ki]);
            sum_precision[ki] += precision;
            sum_recall[ki] += recall;
            sum_ndcg[ki] += ndcg;
            report.per_user.push_back(PerUserMetrics{u, ks[ki], precision, recall, ndcg});
        }
        report.users_evaluated += 1;
    }

    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        const double n = report.users_evaluated > 0
                             ? static_cast<double>(report.users_evaluated)
                             : 1.0;
        report.averages.push_back(
            MetricRow{ks[ki], sum_precision[ki] / n, sum_recall[ki] / n, sum_ndcg[ki] / n});
    }
    return report;
}

// --------------------------------------------------------------------------
// ablations
// --------------------------------------------------------------------------

namespace {

TrainConfig variant_config(const TrainConfig& base, const std::string& variant) {
    TrainConfig config = base;
    config.kind = "cngcf";
    config.encoder = "causal";
    config.ablate_messages = false;
    config.ablate_counterfactual = false;
    if (variant == "cngcf") {
        // full model
    } else if (variant == "no_messages") {
        config.ablate_messages = true;
    } else if (variant == "no_counterfactual") {
        config.ablate_counterfactual = true;
    } else if (variant == "gcn") {
        config.encoder = "gcn";
    } else if (variant == "mf") {
        config.kind = "mf";
    } else {
        throw ConfigError("run_ablations: unknown variant '" + variant + "'");
    }
    return config;
}

MetricRow metrics_at_10(const TrainedModel& model, const InteractionGraph& graph,
                        const SplitDataset& splits) {
    const std::size_t ks[] = {10};
    const EvalReport report = evaluate(model, graph, splits, EvalSplit::test, ks);
    return report.averages.at(0);
}

}  // namespace

std::string AblationTable::csv() const {
    std::string out =
        "variant,precision@10,recall@10,ndcg@10,delta_precision@10,delta_recall@10,delta_ndcg@10\n";
    for (const AblationRow& row : rows) {
        out += row.variant;
        out += ',';
        out += format_double(row.precision10);
        out += ',';
        out += format_double(row.recall10);
        out += ',';
        out += format_double(row.ndcg10);
        out += ',';
        out += format_double(row.delta_precision10);
        out += ',';
        out += format_double(row.delta_recall10);
        out += ',';
        out += format_double(row.delta_ndcg10);
        out += '\n';
    }
    return out;
}

AblationTable run_ablations(const InteractionGraph& graph, const SplitDataset& splits,
                            const TrainConfig& base, std::span<const std::string> variants) {
    std::vector<std::string> ordered{"cngcf"};
    for (const std::string& v : variants) {
        if (v != "cngcf") ordered.push_back(v);
    }

    AblationTable table;
    MetricRow full{};
    for (const std::string& variant : ordered) {
        const TrainConfig config = variant_config(base, variant);
        log::info("ablation variant '", variant, "' training (seed ", config.seed, ")");
        const TrainResult result = train_model(graph, splits, config, {});
        const MetricRow m = metrics_at_10(result.best, graph, splits);
        if (variant == "cngcf") full = m;
        AblationRow row;
        row.variant = variant;
        row.precision10 = m.precision;
        row.recall10 = m.recall;
        row.ndcg10 = m.ndcg;
        row.delta_precision10 = m.precision - full.precision;
        row.delta_recall10 = m.recall - full.recall;
        row.delta_ndcg10 = m.ndcg - full.ndcg;
        table.rows.push_back(std::move(row));
    }
    return table;
}

// --------------------------------------------------------------------------
// sweeps
// --------------------------------------------------------------------------

std::string sweep(const InteractionGraph& graph, const SplitDataset& splits,
                  const TrainConfig& base, const std::string& axis,
                  std::span<const double> values, std::size_t jobs) {
    if (values.empty()) throw ConfigError("sweep: no values given");
    if (axis != "dropout" && axis != "embedding_size") {
        throw ConfigError("sweep: axis must be 'dropout' or 'embedding_size', got '" + axis + "'");
    }

    std::vector<MetricRow> rows(values.size());
    auto run_range = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t v = begin; v < values.size(); v += stride) {
            TrainConfig config = base;
            if (axis == "dropout") {
                config.dropout = values[v];
            } else {
                config.h_dim = static_cast<std::size_t>(values[v]);
            }
            const TrainResult result = train_model(graph, splits, config, {});
            rows[v] = metrics_at_10(result.best, graph, splits);
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, values.size()));
    if (workers == 1) {
        run_range(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run_range, w, workers);
        for (std::thread& t : pool) t.join();
    }

    std::string csv = "value,precision@10,recall@10,ndcg@10\n";
    for (std::size_t v = 0; v < values.size(); ++v) {
        csv += format_double(values[v]);
        csv += ',';
        csv += format_double(rows[v].precision);
        csv += ',';
        csv += format_double(rows[v].recall);
        csv += ',';
        csv += format_double(rows[v].ndcg);
        csv += '\n';
    }
    return csv;
}

}  // namespace cngcf
