#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "priornet/tensor.hpp"

namespace priornet {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adaptive moment estimation with bias correction. Only the tensors handed
// to step() ever move; frozen weights are simply never registered.
class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor*> params, AdamConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (const Tensor* p : params_) {
            m_.emplace_back(p->shape());
            v_.emplace_back(p->shape());
        }
    }

    void step(const std::vector<Tensor>& grads) {
        if (grads.size() != params_.size())
            throw std::invalid_argument("AdamOptimizer: gradient count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor& p = *params_[i];
            const Tensor& g = grads[i];
            if (!p.same_shape(g)) throw std::invalid_argument("AdamOptimizer: gradient shape mismatch");
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
                v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
                const double m_hat = m[j] / bc1;
                const double v_hat = v[j] / bc2;
                p[j] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
            }
        }
    }

    std::size_t steps_taken() const { return t_; }

private:
    std::vector<Tensor*> params_;
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::size_t t_ = 0;
};

} // namespace priornet
