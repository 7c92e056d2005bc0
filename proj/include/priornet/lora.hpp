#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "priornet/rng.hpp"
#include "priornet/tensor.hpp"

namespace priornet {

// Low-rank residual update for one frozen projection:
//   W_eff = W + (alpha / r) * A * B,  A in R^{d x r}, B in R^{r x d}.
// B starts at zero so the residual branch contributes nothing until trained.
struct LoraAdapter {
    Tensor A;
    Tensor B;
    std::size_t rank = 0;
    double alpha = 0.0;

    double scale() const { return alpha / static_cast<double>(rank); }
};

inline LoraAdapter init_adapter(std::size_t d, std::size_t r, double alpha, std::uint64_t seed) {
    if (r < 1 || r > d) throw std::invalid_argument("init_adapter: rank must satisfy 1 <= r <= d");
    LoraAdapter adapter;
    adapter.rank = r;
    adapter.alpha = alpha;
    adapter.A = Tensor({d, r});
    adapter.B = Tensor({r, d});
    Rng rng(seed, 0x4c6f5241u);  // independent stream per adapter seed
    for (auto& v : adapter.A.values()) v = 0.02 * rng.gaussian();
    return adapter;
}

inline Tensor delta_weight(const LoraAdapter& adapter) {
    Tensor dw = matmul(adapter.A, adapter.B);
    dw *= adapter.scale();
    return dw;
}

// X * W + scale * (X * A) * B, never materializing the d x d delta.
inline Tensor apply_adapted_projection(const Tensor& X, const Tensor& W_frozen,
                                       const LoraAdapter* adapter = nullptr) {
    Tensor out = matmul(X, W_frozen);
    if (adapter == nullptr) return out;
    Tensor xa = matmul(X, adapter->A);
    Tensor residual = matmul(xa, adapter->B);
    const double s = adapter->scale();
    double* op = out.data();
    const double* rp = residual.data();
    for (std::size_t i = 0; i < out.size(); ++i) op[i] += s * rp[i];
    return out;
}

inline Tensor merge_adapter(const Tensor& W_frozen, const LoraAdapter& adapter) {
    if (W_frozen.rows() != adapter.A.rows() || W_frozen.cols() != adapter.B.cols())
        throw std::invalid_argument("merge_adapter: shape mismatch");
    Tensor merged = W_frozen;
    merged += delta_weight(adapter);
    return merged;
}

enum class PlacementMode { EveryOther, All, Explicit };

struct PlacementPolicy {
    PlacementMode mode = PlacementMode::EveryOther;
    std::vector<std::size_t> explicit_indices;

    std::vector<std::size_t> selected_blocks(std::size_t num_blocks) const {
        std::vector<std::size_t> out;
        switch (mode) {
            case PlacementMode::EveryOther:
                for (std::size_t i = 0; i < num_blocks; i += 2) out.push_back(i);
                break;
            case PlacementMode::All:
                for (std::size_t i = 0; i < num_blocks; ++i) out.push_back(i);
                break;
            case PlacementMode::Explicit:
                for (std::size_t i : explicit_indices) {
                    if (i >= num_blocks)
                        throw std::out_of_range("PlacementPolicy: block index " + std::to_string(i) +
                                                " out of range");
                    out.push_back(i);
                }
                break;
        }
        return out;
    }
};

// Exact integer parameter counts. The backbone denominator counts the
// encoder block weight matrices (4 d^2 attention + mlp_ratio * 2 d^2 MLP per
// block); the classifier head is reported separately.
struct ParameterBudget {
    std::size_t adapter_params = 0;
    std::size_t head_params = 0;
    std::size_t backbone_params = 0;

    double adapter_fraction() const {
        return static_cast<double>(adapter_params) / static_cast<double>(backbone_params);
    }
    double trainable_fraction() const {
        return static_cast<double>(adapter_params + head_params) /
               static_cast<double>(backbone_params);
    }
};

inline ParameterBudget count_parameters(std::size_t d, std::size_t num_blocks,
                                        std::size_t mlp_ratio, std::size_t num_classes,
                                        const PlacementPolicy& policy, std::size_t rank) {
    ParameterBudget budget;
    budget.backbone_params = num_blocks * (4 * d * d + 2 * mlp_ratio * d * d);
    budget.head_params = d * num_classes + num_classes;
    const std::size_t adapted = policy.selected_blocks(num_blocks).size();
    budget.adapter_params = adapted * 3 * 2 * d * rank;  // Q, K, V each carry A and B
    return budget;
}

} // namespace priornet
