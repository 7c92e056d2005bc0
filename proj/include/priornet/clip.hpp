#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "priornet/tensor.hpp"

namespace priornet {

// Uniform temporal sampling plan: t_i = floor((i-1)(T-1)/(N-1)) + 1, 1-based.
struct FrameIndexPlan {
    std::size_t total_frames = 0;  // T
    std::size_t clip_length = 0;   // N
    std::vector<std::size_t> indices;
};

inline FrameIndexPlan plan_frame_indices(std::size_t total_frames, std::size_t clip_length = 16) {
    if (total_frames < 1) throw std::invalid_argument("plan_frame_indices: T must be >= 1");
    if (clip_length < 2) throw std::invalid_argument("plan_frame_indices: N must be >= 2");
    FrameIndexPlan plan;
    plan.total_frames = total_frames;
    plan.clip_length = clip_length;
    plan.indices.resize(clip_length);
    for (std::size_t i = 1; i <= clip_length; ++i)
        plan.indices[i - 1] = (i - 1) * (total_frames - 1) / (clip_length - 1) + 1;
    return plan;
}

struct BoundingBox {
    std::size_t x = 0;  // column of left edge
    std::size_t y = 0;  // row of top edge
    std::size_t w = 0;
    std::size_t h = 0;
};

// One face-detector result; an absent box is a detection failure.
struct DetectionRecord {
    std::size_t frame_index = 0;  // 1-based
    std::optional<BoundingBox> box;
};

// Images are H x W x 3 tensors, channel-last, values in the network input
// space [0, 1].
inline Tensor crop(const Tensor& image, const BoundingBox& box) {
    if (image.ndim() != 3 || image.shape()[2] != 3)
        throw std::invalid_argument("crop: expects an H x W x 3 image");
    const std::size_t H = image.shape()[0], W = image.shape()[1];
    if (box.w == 0 || box.h == 0 || box.x + box.w > W || box.y + box.h > H)
        throw std::out_of_range("crop: box exceeds image bounds");
    Tensor out({box.h, box.w, 3});
    for (std::size_t r = 0; r < box.h; ++r) {
        const double* src = image.data() + ((box.y + r) * W + box.x) * 3;
        double* dst = out.data() + r * box.w * 3;
        std::copy(src, src + box.w * 3, dst);
    }
    return out;
}

// Bilinear resize, align-corners-false: src = (dst + 0.5) * scale - 0.5,
// clamped to the valid range. out == in reproduces the input exactly.
inline Tensor bilinear_resize(const Tensor& image, std::size_t out_h, std::size_t out_w) {
    if (image.ndim() != 3 || image.shape()[2] != 3)
        throw std::invalid_argument("bilinear_resize: expects an H x W x 3 image");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("bilinear_resize: output extent < 1");
    const std::size_t h = image.shape()[0], w = image.shape()[1];
    if (out_h == h && out_w == w) return image;
    Tensor out({out_h, out_w, 3});
    const double scale_y = static_cast<double>(h) / static_cast<double>(out_h);
    const double scale_x = static_cast<double>(w) / static_cast<double>(out_w);
    for (std::size_t r = 0; r < out_h; ++r) {
        double sy = (static_cast<double>(r) + 0.5) * scale_y - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t c = 0; c < out_w; ++c) {
            double sx = (static_cast<double>(c) + 0.5) * scale_x - 0.5;
            sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            for (std::size_t ch = 0; ch < 3; ++ch) {
                const double v00 = image[(y0 * w + x0) * 3 + ch];
                const double v01 = image[(y0 * w + x1) * 3 + ch];
                const double v10 = image[(y1 * w + x0) * 3 + ch];
                const double v11 = image[(y1 * w + x1) * 3 + ch];
                const double top = v00 + (v01 - v00) * fx;
                const double bot = v10 + (v11 - v10) * fx;
                out[(r * out_w + c) * 3 + ch] = top + (bot - top) * fy;
            }
        }
    }
    return out;
}

// Fixed-length clip in network input space. Frames whose detection failed
// are exact zero blocks and flagged in placeholder_mask.
struct ClipTensor {
    std::size_t clip_length = 0;  // N
    std::size_t height = 0;
    std::size_t width = 0;
    Tensor frames;                      // N x H x W x 3
    std::vector<std::uint8_t> placeholder_mask;  // N entries, 1 = placeholder

    double* frame(std::size_t i) { return frames.data() + i * height * width * 3; }
    const double* frame(std::size_t i) const { return frames.data() + i * height * width * 3; }
    std::size_t frame_size() const { return height * width * 3; }
};

struct ClipMeta {
    std::size_t missing_count = 0;
    double missing_rate = 0.0;
    int label = 0;
    std::string subject_id;
};

// Crops, resizes and normalizes detected frames; failed detections become
// exact zero placeholders. Raw pixel inputs are [0, 255]; network space is
// [0, 1] with no mean shift so a placeholder stays exactly zero.
inline std::pair<ClipTensor, ClipMeta> assemble_clip(const std::vector<Tensor>& frames,
                                                     const std::vector<DetectionRecord>& detections,
                                                     const FrameIndexPlan& plan,
                                                     std::size_t target_resolution = 224) {
    const std::size_t N = plan.clip_length;
    ClipTensor clip;
    clip.clip_length = N;
    clip.height = target_resolution;
    clip.width = target_resolution;
    clip.frames = Tensor({N, target_resolution, target_resolution, 3});
    clip.placeholder_mask.assign(N, 0);

    ClipMeta meta;
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t frame_index = plan.indices[i];
        const DetectionRecord* rec = nullptr;
        for (const auto& d : detections) {
            if (d.frame_index == frame_index) {
                rec = &d;
                break;
            }
        }
        if (rec == nullptr)
            throw std::invalid_argument("assemble_clip: no detection record for frame " +
                                        std::to_string(frame_index));
        if (!rec->box.has_value()) {
            clip.placeholder_mask[i] = 1;
            ++meta.missing_count;
            continue;  // frame storage is already zero
        }
        if (frame_index - 1 >= frames.size())
            throw std::out_of_range("assemble_clip: planned frame index beyond frame list");
        Tensor face = crop(frames[frame_index - 1], *rec->box);
        Tensor resized = bilinear_resize(face, target_resolution, target_resolution);
        double* dst = clip.frame(i);
        const double* src = resized.data();
        for (std::size_t v = 0; v < clip.frame_size(); ++v) dst[v] = src[v] / 255.0;
    }
    meta.missing_rate = static_cast<double>(meta.missing_count) / static_cast<double>(N);
    return {std::move(clip), meta};
}

enum class MissingnessGroup { Low, Medium, High };

// Group boundaries fixed at <= 2/16 and <= 6/16 of the clip length.
inline MissingnessGroup missingness_group(double rate) {
    if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("missingness_group: rate outside [0, 1]");
    if (rate <= 2.0 / 16.0) return MissingnessGroup::Low;
    if (rate <= 6.0 / 16.0) return MissingnessGroup::Medium;
    return MissingnessGroup::High;
}

inline const char* missingness_group_name(MissingnessGroup g) {
    switch (g) {
        case MissingnessGroup::Low: return "Low";
        case MissingnessGroup::Medium: return "Medium";
        default: return "High";
    }
}

// Placeholders-off preprocessing arm: every masked frame is replaced by a
// copy of the nearest detected frame (earlier frame wins ties), keeping the
// clip length fixed. A clip with no detected frames at all stays zero.
inline ClipTensor repeat_nearest_fill(const ClipTensor& clip) {
    ClipTensor out = clip;
    const std::size_t N = clip.clip_length;
    std::vector<std::size_t> detected;
    for (std::size_t i = 0; i < N; ++i)
        if (!clip.placeholder_mask[i]) detected.push_back(i);
    out.placeholder_mask.assign(N, 0);
    if (detected.empty()) return out;
    for (std::size_t i = 0; i < N; ++i) {
        if (!clip.placeholder_mask[i]) continue;
        std::size_t best = detected[0];
        std::size_t best_dist = N + 1;
        for (std::size_t j : detected) {
            const std::size_t dist = j > i ? j - i : i - j;
            if (dist < best_dist) {
                best_dist = dist;
                best = j;
            }
        }
        std::copy(clip.frame(best), clip.frame(best) + clip.frame_size(), out.frame(i));
    }
    return out;
}

} // namespace priornet
