#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace priornet {

// digamma / trigamma / log-gamma via upward recurrence to the asymptotic
// regime, then the Bernoulli-number series. Absolute error stays below
// 1e-11 over the ranges the losses touch.

inline double digamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("digamma: requires x > 0");
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = std::log(x) - 0.5 * inv;
    series -= inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    return acc + series;
}

inline double trigamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("trigamma: requires x > 0");
    double acc = 0.0;
    while (x < 6.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = inv * (1.0 + 0.5 * inv);
    series += inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * 691.0 / 2730.0)))));
    return acc + series;
}

inline double log_gamma(double x) {
    if (!(x > 0.0)) throw std::domain_error("log_gamma: requires x > 0");
    double acc = 0.0;
    while (x < 8.0) {
        acc -= std::log(x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // 0.5 * ln(2*pi)
    double series = (x - 0.5) * std::log(x) - x + 0.91893853320467274178;
    series += inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 * (1.0 / 1188.0 - inv2 * 691.0 / 360360.0)))));
    return acc + series;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Straight-line exp for the encoder hot loops (attention softmax, SiLU).
// Power-of-two range reduction via the 2^52 + 2^51 shifter plus a degree-11
// Taylor Horner; relative error stays below ~1e-13 and the loop form
// auto-vectorizes. The exponent saturates in integer space, so extreme
// arguments give tiny/huge finite values instead of denormal garbage.
// Intended domain |x| <= ~1e15.
inline double fast_exp(double x) {
    const double shifted = x * 1.4426950408889634 + 6755399441055744.0;
    const double k_d = shifted - 6755399441055744.0;
    const double r = x - k_d * 0.693147180369123816490 - k_d * 1.90821492927058770002e-10;
    double p = 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    // k sits in the low bits of the shifter result
    std::uint64_t shifted_bits;
    std::memcpy(&shifted_bits, &shifted, sizeof(shifted_bits));
    auto k = static_cast<std::int64_t>(static_cast<std::int32_t>(shifted_bits));
    k = k < -1022 ? -1022 : k;
    k = k > 1023 ? 1023 : k;
    const std::uint64_t bits = static_cast<std::uint64_t>(k + 1023) << 52;
    double scale;
    std::memcpy(&scale, &bits, sizeof(scale));
    return p * scale;
}

// exp clamping makes the one-sided form valid for every z
inline double fast_sigmoid(double z) { return 1.0 / (1.0 + fast_exp(-z)); }

inline double softplus(double z) {
    if (z > 30.0) return z;
    if (z < -30.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

// Shift-invariant softmax; outputs sum to 1 for any finite input.
inline std::vector<double> stable_softmax(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("stable_softmax: empty input");
    double mx = v[0];
    for (double x : v)
        if (x > mx) mx = x;
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (auto& x : out) x /= sum;
    return out;
}

inline std::vector<double> softplus_clipped(const std::vector<double>& v, double cap = 5.0) {
    if (!(cap > 0.0)) throw std::invalid_argument("softplus_clipped: cap must be > 0");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double s = softplus(v[i]);
        if (s < 0.0) s = 0.0;
        if (s > cap) s = cap;
        out[i] = s;
    }
    return out;
}

} // namespace priornet
