#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "priornet/clip.hpp"
#include "priornet/clip_store.hpp"
#include "priornet/rng.hpp"

namespace priornet {

struct PatternParams {
    double spatial_frequency = 4.0;
    double base_intensity = 0.5;
};

// Synthetic engagement clips: every class carries a texture signature AND a
// characteristic missing-face rate, so a model that ignores placeholders can
// still learn from texture while a placeholder-aware one gets both signals.
// Noise is shared across a clip's frames to the degree set by
// noise_temporal_correlation, mirroring how consecutive face crops resemble
// each other; per-frame averaging therefore cannot wash the noise out.
struct SynthSpec {
    std::size_t num_classes = 4;
    std::size_t clips_per_class = 200;
    std::size_t clip_length = 16;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t subjects = 20;
    std::vector<double> missing_rate_means = {0.02, 0.10, 0.25, 0.45};
    // classes 1..3 share spatial parameters on purpose: with per-clip phase
    // jitter their single-frame statistics are identical, so they separate
    // through temporal drift (and the missing-face rate), both of which
    // stale repeated frames corrupt
    std::vector<PatternParams> patterns = {
        {2.0, 0.55}, {5.0, 0.50}, {5.0, 0.50}, {5.0, 0.50}};
    double noise_std = 0.22;
    double noise_temporal_correlation = 0.95;  // shared fraction of noise variance
    double phase_jitter = 6.283185307179586;   // per-clip grating phase jitter range
    std::uint64_t seed = 0;

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("SynthSpec: num_classes must be >= 2");
        if (clips_per_class < 1) throw std::invalid_argument("SynthSpec: clips_per_class must be >= 1");
        if (subjects < 2) throw std::invalid_argument("SynthSpec: subjects must be >= 2");
        if (missing_rate_means.size() != num_classes)
            throw std::invalid_argument("SynthSpec: one missing-rate mean per class required");
        if (patterns.size() != num_classes)
            throw std::invalid_argument("SynthSpec: one pattern per class required");
        for (double mu : missing_rate_means)
            if (mu < 0.0 || mu > 1.0)
                throw std::invalid_argument("SynthSpec: missing-rate means must lie in [0, 1]");
        if (noise_temporal_correlation < 0.0 || noise_temporal_correlation > 1.0)
            throw std::invalid_argument("SynthSpec: noise_temporal_correlation must lie in [0, 1]");
    }
};

namespace detail {

// Per-class temporal drift of the grating phase, log-spaced so neighboring
// classes differ by a factor of two. This is where class identity lives:
// classes that share spatial parameters are separable only through how fast
// their texture moves, which stale repeated frames cannot reproduce.
inline double class_drift(std::size_t class_index) {
    const double drift = 0.1 * std::pow(2.0, static_cast<double>(class_index));
    return std::min(drift, 2.8);
}

// Grating with an explicit extra phase offset applied on top of the
// deterministic (class, frame) schedule.
inline Tensor grating(std::size_t class_index, std::size_t frame_index, std::size_t H,
                      std::size_t W, const PatternParams& params, double phase_offset) {
    Tensor img({H, W, 3});
    const double cos_t = 0.8253356149096783;  // orientation fixed at 0.6 rad
    const double sin_t = 0.5646424733950354;
    const double phase = 1.7 * static_cast<double>(class_index) +
                         class_drift(class_index) * static_cast<double>(frame_index) + phase_offset;
    const double scale = 6.283185307179586 * params.spatial_frequency /
                         static_cast<double>(std::max(H, W));
    const double base = params.base_intensity;
    const double amp = std::min({0.4, base, 1.0 - base});
    for (std::size_t r = 0; r < H; ++r) {
        for (std::size_t c = 0; c < W; ++c) {
            const double arg = scale * (static_cast<double>(r) * cos_t + static_cast<double>(c) * sin_t) + phase;
            const double v = base + amp * std::sin(arg);
            double* px = img.data() + (r * W + c) * 3;
            px[0] = v;
            px[1] = v;
            px[2] = v;
        }
    }
    return img;
}

} // namespace detail

// Deterministic sinusoidal grating for (class, frame). All values in [0, 1].
inline Tensor class_pattern(std::size_t class_index, std::size_t frame_index, std::size_t H,
                            std::size_t W, const PatternParams& params) {
    return detail::grating(class_index, frame_index, H, W, params, 0.0);
}

// Deterministic generation: every random draw is keyed on
// (seed, clip index, frame index), so parallel generation or re-runs give
// byte-identical datasets.
inline ClipDataset generate_dataset(const SynthSpec& spec) {
    spec.validate();
    ClipDataset dataset;
    const std::size_t total = spec.num_classes * spec.clips_per_class;
    dataset.clips.resize(total);
    dataset.metas.resize(total);
    const std::size_t frame_values = spec.height * spec.width * 3;
    const double shared_scale = std::sqrt(spec.noise_temporal_correlation);
    const double frame_scale = std::sqrt(1.0 - spec.noise_temporal_correlation);
    std::vector<double> clip_noise(frame_values);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t j = 0; j < spec.clips_per_class; ++j) {
            const std::size_t g = c * spec.clips_per_class + j;
            ClipTensor clip;
            clip.clip_length = spec.clip_length;
            clip.height = spec.height;
            clip.width = spec.width;
            clip.frames = Tensor({spec.clip_length, spec.height, spec.width, 3});
            clip.placeholder_mask.assign(spec.clip_length, 0);
            ClipMeta meta;
            meta.label = static_cast<int>(c);
            meta.subject_id = "subject_" + std::to_string(j % spec.subjects);
            Rng clip_rng(spec.seed, hash_combine(0x636e6f69u, g));
            const double phase_offset = spec.phase_jitter * clip_rng.uniform();
            for (auto& v : clip_noise) v = clip_rng.gaussian();
            for (std::size_t f = 0; f < spec.clip_length; ++f) {
                Rng rng(spec.seed, hash_combine(g, f));
                if (rng.uniform() < spec.missing_rate_means[c]) {
                    clip.placeholder_mask[f] = 1;
                    ++meta.missing_count;
                    continue;
                }
                const Tensor pattern = detail::grating(c, f, spec.height, spec.width,
                                                       spec.patterns[c], phase_offset);
                double* dst = clip.frame(f);
                for (std::size_t v = 0; v < frame_values; ++v) {
                    const double noise = shared_scale * clip_noise[v] + frame_scale * rng.gaussian();
                    const double noisy = pattern[v] + spec.noise_std * noise;
                    dst[v] = std::clamp(noisy, 0.0, 1.0);
                }
            }
            meta.missing_rate =
                static_cast<double>(meta.missing_count) / static_cast<double>(spec.clip_length);
            dataset.clips[g] = std::move(clip);
            dataset.metas[g] = std::move(meta);
        }
    }
    return dataset;
}

} // namespace priornet
