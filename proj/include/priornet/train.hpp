#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "priornet/backward.hpp"
#include "priornet/backbone.hpp"
#include "priornet/clip_store.hpp"
#include "priornet/metrics.hpp"
#include "priornet/objective.hpp"
#include "priornet/optimizer.hpp"
#include "priornet/parallel.hpp"
#include "priornet/rng.hpp"
#include "priornet/synth.hpp"

namespace priornet {

struct ComponentToggles {
    bool placeholders = true;
    bool prior_lora = true;
    bool advanced_objective = true;
};

struct TrainConfig {
    std::optional<SynthSpec> synth;  // inline generator spec, or ...
    std::string dataset_path;        // ... a clip-store directory
    EncoderConfig encoder;
    PlacementPolicy placement;
    std::size_t lora_rank = 4;
    double lora_alpha = 4.0;  // alpha = r keeps the residual scale at 1
    LossHyperParams loss;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    AdamConfig optimizer;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    ComponentToggles toggles;
    unsigned num_threads = 0;  // 0 = hardware concurrency

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("TrainConfig: train_fraction must lie in (0, 1)");
        if (!synth.has_value() && dataset_path.empty())
            throw std::invalid_argument("TrainConfig: either synth spec or dataset path required");
    }
};

// Deterministic subject-level split; no subject crosses the boundary.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> subject_disjoint_split(
    const std::vector<ClipMeta>& metas, double train_fraction, std::uint64_t seed) {
    std::vector<std::string> subjects;
    for (const auto& m : metas)
        if (std::find(subjects.begin(), subjects.end(), m.subject_id) == subjects.end())
            subjects.push_back(m.subject_id);
    if (subjects.size() < 2)
        throw std::invalid_argument("subject_disjoint_split: need at least 2 subjects");

    Rng rng(seed, 0x73706c69u);
    for (std::size_t i = subjects.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(subjects[i - 1], subjects[j]);
    }
    std::size_t train_subjects = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(subjects.size())));
    train_subjects = std::clamp<std::size_t>(train_subjects, 1, subjects.size() - 1);

    std::vector<std::string> train_set(subjects.begin(), subjects.begin() + train_subjects);
    std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < metas.size(); ++i) {
        const bool in_train = std::find(train_set.begin(), train_set.end(),
                                        metas[i].subject_id) != train_set.end();
        (in_train ? out.first : out.second).push_back(i);
    }
    return out;
}

struct TrainResult {
    PriorNetModel model;
    std::vector<LossBreakdown> history;  // one entry per epoch
    std::uint64_t checksum_before = 0;
    std::uint64_t checksum_after = 0;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> eval_indices;
};

inline std::size_t argmax_class(const std::vector<double>& logits) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k)
        if (logits[k] > logits[best]) best = k;
    return best;
}

// Argmax-of-logits predictions over `indices` (all clips when empty).
inline MetricsReport evaluate(const PriorNetModel& model, const ClipDataset& dataset,
                              std::vector<std::size_t> indices = {}, unsigned num_threads = 0) {
    if (indices.empty()) {
        indices.resize(dataset.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    }
    const std::size_t C = model.cfg.num_classes;
    for (std::size_t i : indices)
        if (dataset.metas[i].label < 0 || static_cast<std::size_t>(dataset.metas[i].label) >= C)
            throw std::invalid_argument("evaluate: dataset label outside model classes");
    std::vector<int> labels(indices.size()), preds(indices.size());
    parallel_for(indices.size(), [&](std::size_t n) {
        const std::size_t i = indices[n];
        labels[n] = dataset.metas[i].label;
        preds[n] = static_cast<int>(argmax_class(forward_logits(dataset.clips[i], model)));
    }, num_threads);
    return compute_metrics(labels, preds, C);
}

namespace detail {

inline ClipDataset apply_placeholder_toggle(const ClipDataset& dataset, bool placeholders) {
    if (placeholders) return dataset;
    ClipDataset out;
    out.clips.resize(dataset.size());
    out.metas = dataset.metas;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out.clips[i] = repeat_nearest_fill(dataset.clips[i]);
        out.metas[i].missing_count = 0;
        out.metas[i].missing_rate = 0.0;
    }
    return out;
}

inline void add_scaled_epoch_terms(LossBreakdown& epoch, const LossBreakdown& batch,
                                   std::size_t batch_count) {
    const double w = static_cast<double>(batch_count);
    epoch.data_term += batch.data_term * w;
    epoch.kl_term += batch.kl_term * w;
    epoch.henn += batch.henn * w;
    epoch.ufce += batch.ufce * w;
    epoch.ce += batch.ce * w;
    epoch.total += batch.total * w;
}

} // namespace detail

// Trains adapters + head on the given dataset with a fixed subject-disjoint
// split. The frozen backbone is checksummed before and after; a mismatch is
// a hard error.
inline TrainResult train_on_dataset(const ClipDataset& raw_dataset, const TrainConfig& cfg) {
    cfg.validate();
    ClipDataset transformed;
    if (!cfg.toggles.placeholders)
        transformed = detail::apply_placeholder_toggle(raw_dataset, false);
    const ClipDataset& dataset = cfg.toggles.placeholders ? raw_dataset : transformed;
    auto [train_idx, eval_idx] = subject_disjoint_split(dataset.metas, cfg.train_fraction, cfg.seed);
    if (train_idx.empty()) throw std::runtime_error("train: empty training partition");

    TrainResult result;
    result.train_indices = train_idx;
    result.eval_indices = eval_idx;
    result.model = build_model(cfg.encoder);
    PriorNetModel& model = result.model;
    if (cfg.toggles.prior_lora)
        place_adapters(model, cfg.placement, cfg.lora_rank, cfg.lora_alpha,
                       hash_combine(cfg.seed, 0x61646170u));
    result.checksum_before = frozen_checksum(model);

    TrainableParams params = collect_trainable(model);
    AdamOptimizer optimizer(params.tensors, cfg.optimizer);

    LossHyperParams hyper = cfg.loss;
    if (!cfg.toggles.advanced_objective) {
        // plain cross-entropy through the same code path
        hyper.lambda_kl = 0.0;
        hyper.w_henn = 0.0;
        hyper.w_ufce = 0.0;
        hyper.w_ce = 1.0;
        hyper.kl_anneal_epochs = 0;
    }

    // With no adapters the encoder output never changes, so features are
    // computed once and the epochs reduce to head-only updates.
    const bool head_only = !cfg.toggles.prior_lora;
    std::vector<std::vector<double>> cached_features;
    if (head_only) {
        cached_features.resize(dataset.size());
        parallel_for(train_idx.size(), [&](std::size_t n) {
            const std::size_t i = train_idx[n];
            cached_features[i] = encode(dataset.clips[i], model);
        }, cfg.num_threads);
    }

    const std::size_t n_train = train_idx.size();
    std::vector<std::size_t> order = train_idx;
    std::vector<ForwardCache> caches(cfg.batch_size);
    std::vector<BackwardScratch> scratches(cfg.batch_size);
    std::vector<std::vector<Tensor>> clip_grads(cfg.batch_size);
    std::vector<Tensor> grads = zero_grads_like(params);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(cfg.seed, hash_combine(0x65706f63u, epoch));
        for (std::size_t i = n_train; i > 1; --i) {
            const std::size_t j =
                static_cast<std::size_t>(shuffle_rng.uniform() * static_cast<double>(i));
            std::swap(order[i - 1], order[j]);
        }
        LossHyperParams epoch_hyper = hyper;
        epoch_hyper.lambda_kl = hyper.lambda_at_epoch(epoch);

        LossBreakdown epoch_terms;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t B = std::min(cfg.batch_size, n_train - start);
            Tensor batch_logits({B, cfg.encoder.num_classes});
            std::vector<int> batch_labels(B);

            parallel_for(B, [&](std::size_t b) {
                const std::size_t i = order[start + b];
                std::vector<double> logits;
                if (head_only) {
                    logits = classify(cached_features[i], model);
                } else {
                    logits = forward_logits(dataset.clips[i], model, &caches[b]);
                }
                for (std::size_t c = 0; c < logits.size(); ++c) batch_logits.at(b, c) = logits[c];
                batch_labels[b] = dataset.metas[i].label;
            }, cfg.num_threads);

            const LossBreakdown batch_terms = combined_loss(batch_logits, batch_labels, epoch_hyper);
            if (!std::isfinite(batch_terms.total))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch offset " + std::to_string(start));
            detail::add_scaled_epoch_terms(epoch_terms, batch_terms, B);

            const Tensor dlogits = loss_gradient(batch_logits, batch_labels, epoch_hyper);
            for (auto& g : grads) g.fill(0.0);
            if (head_only) {
                // d(head) only: dW = f^T dlogits, db = dlogits, summed over the batch
                Tensor& g_head_W = grads[grads.size() - 2];
                Tensor& g_head_b = grads[grads.size() - 1];
                const std::size_t C = cfg.encoder.num_classes;
                for (std::size_t b = 0; b < B; ++b) {
                    const auto& f = cached_features[order[start + b]];
                    for (std::size_t j = 0; j < f.size(); ++j)
                        for (std::size_t c = 0; c < C; ++c)
                            g_head_W.at(j, c) += f[j] * dlogits.at(b, c);
                    for (std::size_t c = 0; c < C; ++c) g_head_b[c] += dlogits.at(b, c);
                }
            } else {
                parallel_for(B, [&](std::size_t b) {
                    if (clip_grads[b].empty()) clip_grads[b] = zero_grads_like(params);
                    else for (auto& g : clip_grads[b]) g.fill(0.0);
                    std::vector<double> row(cfg.encoder.num_classes);
                    for (std::size_t c = 0; c < row.size(); ++c) row[c] = dlogits.at(b, c);
                    model_backward(model, params, caches[b], row, clip_grads[b], scratches[b]);
                }, cfg.num_threads);
                for (std::size_t b = 0; b < B; ++b) accumulate_grads(grads, clip_grads[b]);
            }
            optimizer.step(grads);
        }
        const double inv_n = 1.0 / static_cast<double>(n_train);
        epoch_terms.data_term *= inv_n;
        epoch_terms.kl_term *= inv_n;
        epoch_terms.henn *= inv_n;
        epoch_terms.ufce *= inv_n;
        epoch_terms.ce *= inv_n;
        epoch_terms.total *= inv_n;
        result.history.push_back(epoch_terms);
    }

    result.checksum_after = frozen_checksum(model);
    if (result.checksum_after != result.checksum_before)
        throw std::runtime_error("train: frozen backbone weights changed during training");
    return result;
}

inline ClipDataset load_or_generate_dataset(const TrainConfig& cfg) {
    if (cfg.synth.has_value()) return generate_dataset(*cfg.synth);
    return read_dataset(cfg.dataset_path);
}

inline TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    return train_on_dataset(load_or_generate_dataset(cfg), cfg);
}

} // namespace priornet
