#pragma once

#include <string>
#include <vector>

#include "priornet/clip.hpp"
#include "priornet/metrics.hpp"
#include "priornet/train.hpp"

namespace priornet {

struct AblationRow {
    std::string name;
    ComponentToggles toggles;
    double accuracy = 0.0;
    double weighted_f1 = 0.0;
};

// The eight toggle combinations in the standard reporting order: baseline,
// each component alone, each pair, then the full model.
inline std::vector<std::pair<std::string, ComponentToggles>> ablation_grid() {
    return {
        {"baseline_ce", {false, false, false}},
        {"placeholders", {true, false, false}},
        {"prior_lora", {false, true, false}},
        {"advanced_objective", {false, false, true}},
        {"placeholders+prior_lora", {true, true, false}},
        {"placeholders+advanced_objective", {true, false, true}},
        {"prior_lora+advanced_objective", {false, true, true}},
        {"full", {true, true, true}},
    };
}

// Trains and evaluates every toggle combination with the shared seed and an
// otherwise fixed recipe. Rows report eval-split metrics. With jobs > 1 the
// arms run as concurrent single-threaded jobs (they are independent, so the
// rows are identical either way).
inline std::vector<AblationRow> run_ablation(const ClipDataset& dataset, const TrainConfig& base,
                                             unsigned jobs = 1) {
    const auto grid = ablation_grid();
    std::vector<AblationRow> rows(grid.size());
    const auto run_arm = [&dataset, &base, &grid, &rows, jobs](std::size_t arm) {
        TrainConfig cfg = base;
        cfg.toggles = grid[arm].second;
        if (jobs > 1) cfg.num_threads = 1;
        TrainResult result = train_on_dataset(dataset, cfg);
        ClipDataset transformed;
        if (!cfg.toggles.placeholders)
            transformed = detail::apply_placeholder_toggle(dataset, false);
        const ClipDataset& eval_view = cfg.toggles.placeholders ? dataset : transformed;
        const MetricsReport metrics =
            evaluate(result.model, eval_view, result.eval_indices, cfg.num_threads);
        rows[arm].name = grid[arm].first;
        rows[arm].toggles = cfg.toggles;
        rows[arm].accuracy = metrics.accuracy;
        rows[arm].weighted_f1 = metrics.weighted_f1;
    };
    if (jobs <= 1) {
        for (std::size_t arm = 0; arm < grid.size(); ++arm) run_arm(arm);
    } else {
        // adapter-bearing arms dominate the runtime; schedule them first so
        // the strided workers stay balanced
        std::vector<std::size_t> order;
        for (std::size_t arm = 0; arm < grid.size(); ++arm)
            if (grid[arm].second.prior_lora) order.push_back(arm);
        for (std::size_t arm = 0; arm < grid.size(); ++arm)
            if (!grid[arm].second.prior_lora) order.push_back(arm);
        parallel_for(order.size(), [&](std::size_t n) { run_arm(order[n]); }, jobs);
    }
    return rows;
}

inline std::vector<AblationRow> run_ablation(const TrainConfig& base, unsigned jobs = 1) {
    return run_ablation(load_or_generate_dataset(base), base, jobs);
}

struct MissingnessGroupStats {
    std::size_t count = 0;
    double accuracy_with = 0.0;     // variant evaluated with placeholder encoding
    double accuracy_without = 0.0;  // variant evaluated with repeated-frame fill
    double delta = 0.0;
};

struct MissingnessGroupReport {
    MissingnessGroupStats low, medium, high;

    MissingnessGroupStats& group(MissingnessGroup g) {
        if (g == MissingnessGroup::Low) return low;
        if (g == MissingnessGroup::Medium) return medium;
        return high;
    }
};

// Per-group accuracies of the placeholder model vs the no-placeholder model.
// Groups come from each clip's original missing-face rate; each model sees
// the preprocessing it was trained with.
inline MissingnessGroupReport missingness_diagnostic(const PriorNetModel& model_with,
                                                     const PriorNetModel& model_without,
                                                     const ClipDataset& dataset,
                                                     std::vector<std::size_t> indices = {},
                                                     unsigned num_threads = 0) {
    if (indices.empty()) {
        indices.resize(dataset.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    }
    std::vector<int> correct_with(indices.size()), correct_without(indices.size());
    parallel_for(indices.size(), [&](std::size_t n) {
        const std::size_t i = indices[n];
        const int label = dataset.metas[i].label;
        const auto pred_with = argmax_class(forward_logits(dataset.clips[i], model_with));
        const ClipTensor filled = repeat_nearest_fill(dataset.clips[i]);
        const auto pred_without = argmax_class(forward_logits(filled, model_without));
        correct_with[n] = static_cast<int>(pred_with) == label ? 1 : 0;
        correct_without[n] = static_cast<int>(pred_without) == label ? 1 : 0;
    }, num_threads);

    MissingnessGroupReport report;
    std::size_t hits_with[3] = {0, 0, 0}, hits_without[3] = {0, 0, 0}, counts[3] = {0, 0, 0};
    for (std::size_t n = 0; n < indices.size(); ++n) {
        const auto g = missingness_group(dataset.metas[indices[n]].missing_rate);
        const auto gi = static_cast<std::size_t>(g);
        ++counts[gi];
        hits_with[gi] += static_cast<std::size_t>(correct_with[n]);
        hits_without[gi] += static_cast<std::size_t>(correct_without[n]);
    }
    const MissingnessGroup order[3] = {MissingnessGroup::Low, MissingnessGroup::Medium,
                                       MissingnessGroup::High};
    for (const auto g : order) {
        const auto gi = static_cast<std::size_t>(g);
        auto& stats = report.group(g);
        stats.count = counts[gi];
        if (counts[gi] > 0) {
            stats.accuracy_with = static_cast<double>(hits_with[gi]) / static_cast<double>(counts[gi]);
            stats.accuracy_without =
                static_cast<double>(hits_without[gi]) / static_cast<double>(counts[gi]);
            stats.delta = stats.accuracy_with - stats.accuracy_without;
        }
    }
    return report;
}

} // namespace priornet
