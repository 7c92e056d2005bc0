#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "priornet/clip.hpp"

namespace priornet {

// ---------------------------------------------------------------------------
// Detection sidecar: JSON-Lines, one object per frame,
//   {"frame": int, "box": [x, y, w, h] | null}
// ---------------------------------------------------------------------------

inline std::vector<DetectionRecord> read_detection_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_detection_sidecar: cannot open " + path);
    std::vector<DetectionRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("read_detection_sidecar: parse error at line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
        if (!j.contains("frame") || !j.contains("box"))
            throw std::runtime_error("read_detection_sidecar: line " + std::to_string(line_no) +
                                     " missing \"frame\" or \"box\"");
        DetectionRecord rec;
        rec.frame_index = j.at("frame").get<std::size_t>();
        if (!j.at("box").is_null()) {
            const auto& b = j.at("box");
            if (!b.is_array() || b.size() != 4)
                throw std::runtime_error("read_detection_sidecar: line " + std::to_string(line_no) +
                                         " box must be [x, y, w, h] or null");
            rec.box = BoundingBox{b[0].get<std::size_t>(), b[1].get<std::size_t>(),
                                  b[2].get<std::size_t>(), b[3].get<std::size_t>()};
        }
        records.push_back(rec);
    }
    return records;
}

// ---------------------------------------------------------------------------
// Clip store: one binary file per clip.
//   "PNCL" | version u16 | N u16 | H u16 | W u16 | f32 x N*H*W*3 (frame-major)
//   | N mask bytes | trailing JSON metadata blob
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kClipFormatVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("clip store: truncated file");
    return v;
}

} // namespace detail

inline void write_clip(const std::string& path, const ClipTensor& clip, const ClipMeta& meta) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_clip: cannot open " + path);
    out.write("PNCL", 4);
    detail::write_pod<std::uint16_t>(out, kClipFormatVersion);
    detail::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(clip.clip_length));
    detail::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(clip.height));
    detail::write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(clip.width));
    std::vector<float> scratch(clip.frames.size());
    for (std::size_t i = 0; i < scratch.size(); ++i) scratch[i] = static_cast<float>(clip.frames[i]);
    out.write(reinterpret_cast<const char*>(scratch.data()),
              static_cast<std::streamsize>(scratch.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(clip.placeholder_mask.data()),
              static_cast<std::streamsize>(clip.placeholder_mask.size()));
    nlohmann::json j{{"missing_count", meta.missing_count},
                     {"missing_rate", meta.missing_rate},
                     {"label", meta.label},
                     {"subject_id", meta.subject_id}};
    const std::string blob = j.dump();
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error("write_clip: write failed for " + path);
}

inline std::pair<ClipTensor, ClipMeta> read_clip(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_clip: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PNCL", 4) != 0)
        throw std::runtime_error("read_clip: bad magic in " + path);
    const auto version = detail::read_pod<std::uint16_t>(in);
    if (version != kClipFormatVersion)
        throw std::runtime_error("read_clip: unsupported version in " + path);
    ClipTensor clip;
    clip.clip_length = detail::read_pod<std::uint16_t>(in);
    clip.height = detail::read_pod<std::uint16_t>(in);
    clip.width = detail::read_pod<std::uint16_t>(in);
    const std::size_t count = clip.clip_length * clip.height * clip.width * 3;
    std::vector<float> scratch(count);
    in.read(reinterpret_cast<char*>(scratch.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw std::runtime_error("read_clip: truncated frame data in " + path);
    clip.frames = Tensor({clip.clip_length, clip.height, clip.width, 3});
    for (std::size_t i = 0; i < count; ++i) clip.frames[i] = static_cast<double>(scratch[i]);
    clip.placeholder_mask.resize(clip.clip_length);
    in.read(reinterpret_cast<char*>(clip.placeholder_mask.data()),
            static_cast<std::streamsize>(clip.clip_length));
    if (!in) throw std::runtime_error("read_clip: truncated mask in " + path);
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ClipMeta meta;
    if (!blob.empty()) {
        nlohmann::json j = nlohmann::json::parse(blob);
        meta.missing_count = j.value("missing_count", std::size_t{0});
        meta.missing_rate = j.value("missing_rate", 0.0);
        meta.label = j.value("label", 0);
        meta.subject_id = j.value("subject_id", std::string{});
    }
    return {std::move(clip), meta};
}

// A dataset directory is a flat set of clip_*.pncl files, loaded in
// lexicographic order.
struct ClipDataset {
    std::vector<ClipTensor> clips;
    std::vector<ClipMeta> metas;

    std::size_t size() const { return clips.size(); }
};

inline void write_dataset(const std::string& dir, const ClipDataset& dataset) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        std::snprintf(name, sizeof(name), "clip_%05zu.pncl", i);
        write_clip((std::filesystem::path(dir) / name).string(), dataset.clips[i], dataset.metas[i]);
    }
}

inline ClipDataset read_dataset(const std::string& dir) {
    std::vector<std::string> paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pncl")
            paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());
    if (paths.empty()) throw std::runtime_error("read_dataset: no .pncl files in " + dir);
    ClipDataset dataset;
    dataset.clips.reserve(paths.size());
    dataset.metas.reserve(paths.size());
    for (const auto& p : paths) {
        auto [clip, meta] = read_clip(p);
        dataset.clips.push_back(std::move(clip));
        dataset.metas.push_back(std::move(meta));
    }
    return dataset;
}

} // namespace priornet
