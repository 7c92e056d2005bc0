#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "priornet/gradcheck.hpp"
#include "priornet/rng.hpp"
#include "priornet/special.hpp"
#include "priornet/tensor.hpp"

namespace priornet {

// Evidence e = clip(softplus(z), 0, cap), concentration alpha = e + 1.
struct DirichletParams {
    std::vector<double> evidence;
    std::vector<double> alpha;
    double alpha0 = 0.0;

    std::size_t num_classes() const { return alpha.size(); }
};

struct LossHyperParams {
    double lambda_kl = 0.01;
    double w_henn = 1.0;  // weight of the whole evidential term; 0 gives plain CE
    double w_ufce = 1.0;
    double w_ce = 1.0;
    double epsilon = 1e-8;
    double evidence_cap = 5.0;
    std::size_t kl_anneal_epochs = 0;  // 0 = constant lambda_kl

    // Linear ramp from 0 up to lambda_kl over the first kl_anneal_epochs.
    double lambda_at_epoch(std::size_t epoch) const {
        if (kl_anneal_epochs == 0) return lambda_kl;
        const double frac = static_cast<double>(epoch) / static_cast<double>(kl_anneal_epochs);
        return lambda_kl * std::min(1.0, frac);
    }
};

struct LossBreakdown {
    double data_term = 0.0;
    double kl_term = 0.0;
    double henn = 0.0;
    double ufce = 0.0;
    double ce = 0.0;
    double total = 0.0;
    std::vector<double> per_sample_henn;
    std::vector<double> per_sample_ufce;
    std::vector<double> per_sample_ce;
    std::vector<double> per_sample_total;
};

inline DirichletParams evidence_and_alpha(const std::vector<double>& logits, double cap = 5.0) {
    DirichletParams params;
    params.evidence = softplus_clipped(logits, cap);
    params.alpha.resize(params.evidence.size());
    params.alpha0 = 0.0;
    for (std::size_t k = 0; k < params.evidence.size(); ++k) {
        params.alpha[k] = params.evidence[k] + 1.0;
        params.alpha0 += params.alpha[k];
    }
    return params;
}

// psi(alpha0) - psi(alpha_y); strictly positive for C >= 2.
inline double evidential_data_term(const DirichletParams& params, std::size_t label) {
    if (label >= params.num_classes())
        throw std::out_of_range("evidential_data_term: label out of range");
    return digamma(params.alpha0) - digamma(params.alpha[label]);
}

// KL[ Dir(alpha) || Dir(1) ] in closed form; zero iff alpha == 1.
inline double dirichlet_kl_to_uniform(const DirichletParams& params) {
    const std::size_t C = params.num_classes();
    if (C < 2) throw std::invalid_argument("dirichlet_kl_to_uniform: need at least 2 classes");
    for (double a : params.alpha)
        if (!(a >= 1.0)) throw std::domain_error("dirichlet_kl_to_uniform: alpha must be >= 1");
    double value = log_gamma(params.alpha0) - log_gamma(static_cast<double>(C));
    const double psi_alpha0 = digamma(params.alpha0);
    for (double a : params.alpha) {
        value -= log_gamma(a);
        value += (a - 1.0) * (digamma(a) - psi_alpha0);
    }
    return value;
}

inline double henn_loss(const DirichletParams& params, std::size_t label, double lambda_kl) {
    return evidential_data_term(params, label) + lambda_kl * dirichlet_kl_to_uniform(params);
}

// u = 1 / (1 + sum of evidence), in (0, 1].
inline double uncertainty_weight(const DirichletParams& params) {
    double total = 0.0;
    for (double e : params.evidence) total += e;
    return 1.0 / (1.0 + total);
}

inline double ce_term(const std::vector<double>& logits, std::size_t label, double epsilon = 1e-8) {
    if (label >= logits.size()) throw std::out_of_range("ce_term: label out of range");
    const std::vector<double> p = stable_softmax(logits);
    return -std::log(p[label] + epsilon);
}

// -w * u * (1 - p_y)^u * log(p_y + eps); the exponent is the uncertainty
// itself rather than a fixed focal constant.
inline double ufce_term(const std::vector<double>& logits, std::size_t label,
                        const LossHyperParams& hyper) {
    if (label >= logits.size()) throw std::out_of_range("ufce_term: label out of range");
    if (hyper.w_ufce == 0.0) return 0.0;
    const DirichletParams params = evidence_and_alpha(logits, hyper.evidence_cap);
    const double u = uncertainty_weight(params);
    const std::vector<double> p = stable_softmax(logits);
    const double gap = 1.0 - p[label];
    const double focal = gap > 0.0 ? std::pow(gap, u) : 0.0;
    return -hyper.w_ufce * u * focal * std::log(p[label] + hyper.epsilon);
}

// Mean over the batch of HENN + UFCE + w_ce * CE, with the per-term split.
inline LossBreakdown combined_loss(const Tensor& batch_logits, const std::vector<int>& labels,
                                   const LossHyperParams& hyper) {
    if (batch_logits.ndim() != 2) throw std::invalid_argument("combined_loss: logits must be B x C");
    const std::size_t B = batch_logits.rows(), C = batch_logits.cols();
    if (B < 1) throw std::invalid_argument("combined_loss: empty batch");
    if (labels.size() != B) throw std::invalid_argument("combined_loss: label count mismatch");
    LossBreakdown out;
    out.per_sample_henn.resize(B);
    out.per_sample_ufce.resize(B);
    out.per_sample_ce.resize(B);
    out.per_sample_total.resize(B);
    std::vector<double> logits(C);
    for (std::size_t i = 0; i < B; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= C)
            throw std::out_of_range("combined_loss: label out of range");
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        for (std::size_t k = 0; k < C; ++k) logits[k] = batch_logits.at(i, k);
        const DirichletParams params = evidence_and_alpha(logits, hyper.evidence_cap);
        const double data = evidential_data_term(params, y);
        const double kl = dirichlet_kl_to_uniform(params);
        const double henn = hyper.w_henn * (data + hyper.lambda_kl * kl);
        const double ufce = ufce_term(logits, y, hyper);
        const double ce = ce_term(logits, y, hyper.epsilon);
        const double total = henn + ufce + hyper.w_ce * ce;
        out.data_term += data;
        out.kl_term += kl;
        out.henn += henn;
        out.ufce += ufce;
        out.ce += ce;
        out.total += total;
        out.per_sample_henn[i] = henn;
        out.per_sample_ufce[i] = ufce;
        out.per_sample_ce[i] = ce;
        out.per_sample_total[i] = total;
    }
    const double inv_b = 1.0 / static_cast<double>(B);
    out.data_term *= inv_b;
    out.kl_term *= inv_b;
    out.henn *= inv_b;
    out.ufce *= inv_b;
    out.ce *= inv_b;
    out.total *= inv_b;
    return out;
}

// Analytic gradient of combined_loss with respect to the logits, including
// the 1/B of the batch mean. Full dependence flows through e, u and p; the
// evidence clip has zero subgradient above the cap.
inline Tensor loss_gradient(const Tensor& batch_logits, const std::vector<int>& labels,
                            const LossHyperParams& hyper) {
    if (batch_logits.ndim() != 2) throw std::invalid_argument("loss_gradient: logits must be B x C");
    const std::size_t B = batch_logits.rows(), C = batch_logits.cols();
    if (labels.size() != B) throw std::invalid_argument("loss_gradient: label count mismatch");
    Tensor grad({B, C});
    const double inv_b = 1.0 / static_cast<double>(B);
    std::vector<double> logits(C), evid_slope(C);
    for (std::size_t i = 0; i < B; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= C)
            throw std::out_of_range("loss_gradient: label out of range");
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        for (std::size_t k = 0; k < C; ++k) logits[k] = batch_logits.at(i, k);

        const DirichletParams params = evidence_and_alpha(logits, hyper.evidence_cap);
        for (std::size_t k = 0; k < C; ++k) {
            const bool below_cap = softplus(logits[k]) < hyper.evidence_cap;
            evid_slope[k] = below_cap ? sigmoid(logits[k]) : 0.0;
        }
        const double tri_alpha0 = trigamma(params.alpha0);
        const double tri_alpha_y = trigamma(params.alpha[y]);

        const std::vector<double> p = stable_softmax(logits);
        const double u = uncertainty_weight(params);
        const double gap = 1.0 - p[y];
        const double log_py = std::log(p[y] + hyper.epsilon);
        const double focal = gap > 0.0 ? std::pow(gap, u) : 0.0;
        const double log_gap = gap > 0.0 ? std::log(gap) : 0.0;
        const double ce_scale = p[y] / (p[y] + hyper.epsilon);

        for (std::size_t k = 0; k < C; ++k) {
            const double indicator = (k == y) ? 1.0 : 0.0;
            const double dpy_dzk = p[y] * (indicator - p[k]);

            // HENN: data term + lambda * KL, both through the evidence path.
            double dalpha = tri_alpha0 - indicator * tri_alpha_y;
            dalpha += hyper.lambda_kl * ((params.alpha[k] - 1.0) * trigamma(params.alpha[k]) -
                                         (params.alpha0 - static_cast<double>(C)) * tri_alpha0);
            double g = hyper.w_henn * dalpha * evid_slope[k];

            // UFCE = -w * u * gap^u * log(p_y + eps)
            if (hyper.w_ufce != 0.0 && focal > 0.0) {
                const double du_dzk = -u * u * evid_slope[k];
                const double dfocal_dzk = focal * (du_dzk * log_gap - u * dpy_dzk / gap);
                g += -hyper.w_ufce *
                     (du_dzk * focal * log_py + u * dfocal_dzk * log_py +
                      u * focal * dpy_dzk / (p[y] + hyper.epsilon));
            }

            // auxiliary CE
            g += -hyper.w_ce * ce_scale * (indicator - p[k]);

            grad.at(i, k) = inv_b * g;
        }
    }
    return grad;
}

// Finite-difference audit of loss_gradient over random (logits, label, hyper)
// draws. Coordinates inside the cap's non-smooth band are skipped.
inline GradientCheckReport run_loss_gradient_check(std::size_t trials = 100,
                                                   std::uint64_t seed = 7,
                                                   double h = 1e-5) {
    GradientCheckReport report;
    Rng rng(seed, 0x67636872u);
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t C = 2 + trial % 5;
        LossHyperParams hyper;
        hyper.lambda_kl = 0.2 * rng.uniform();
        hyper.w_henn = 0.2 + 1.3 * rng.uniform();
        hyper.w_ufce = 0.2 + 1.8 * rng.uniform();
        hyper.w_ce = 0.2 + 1.8 * rng.uniform();
        hyper.evidence_cap = 3.0 + 3.0 * rng.uniform();
        const std::size_t y = static_cast<std::size_t>(rng.uniform() * static_cast<double>(C));
        std::vector<double> logits(C);
        for (auto& z : logits) z = 2.5 * rng.gaussian();

        const std::vector<int> labels = {static_cast<int>(y)};
        Tensor batch({1, C}, logits);
        const Tensor analytic = loss_gradient(batch, labels, hyper);
        const auto loss_of = [&](const std::vector<double>& z) {
            return combined_loss(Tensor({1, z.size()}, z), labels, hyper).total;
        };
        const std::vector<double> fd = finite_difference_gradient(loss_of, logits, h);

        for (std::size_t k = 0; k < C; ++k) {
            if (std::abs(softplus(logits[k]) - hyper.evidence_cap) < 10.0 * h) {
                ++report.points_skipped_near_nonsmoothness;
                continue;
            }
            const double abs_err = std::abs(analytic[k] - fd[k]);
            report.max_abs_error = std::max(report.max_abs_error, abs_err);
            report.max_rel_error = std::max(report.max_rel_error, relative_error(analytic[k], fd[k]));
            ++report.num_points_checked;
        }
    }
    return report;
}

} // namespace priornet
