#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "priornet/synth.hpp"

using namespace priornet;

namespace {

SynthSpec small_spec() {
    SynthSpec spec;
    spec.num_classes = 4;
    spec.clips_per_class = 12;
    spec.clip_length = 16;
    spec.height = 16;
    spec.width = 16;
    spec.subjects = 4;
    spec.seed = 5;
    return spec;
}

} // namespace

TEST_CASE("generation is a pure function of the spec") {
    const SynthSpec spec = small_spec();
    const ClipDataset a = generate_dataset(spec);
    const ClipDataset b = generate_dataset(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.clips[i].placeholder_mask == b.clips[i].placeholder_mask);
        CHECK(a.metas[i].label == b.metas[i].label);
        CHECK(a.metas[i].subject_id == b.metas[i].subject_id);
        bool identical = a.clips[i].frames.size() == b.clips[i].frames.size();
        for (std::size_t v = 0; identical && v < a.clips[i].frames.size(); ++v)
            identical = a.clips[i].frames[v] == b.clips[i].frames[v];
        CHECK(identical);
    }

    SynthSpec other = spec;
    other.seed = 6;
    const ClipDataset c = generate_dataset(other);
    bool any_difference = false;
    for (std::size_t i = 0; i < a.size() && !any_difference; ++i)
        any_difference = a.clips[i].placeholder_mask != c.clips[i].placeholder_mask ||
                         a.clips[i].frames[0] != c.clips[i].frames[0];
    CHECK(any_difference);
}

TEST_CASE("zero missing-rate means produce no placeholders") {
    SynthSpec spec = small_spec();
    spec.missing_rate_means = {0.0, 0.0, 0.0, 0.0};
    const ClipDataset dataset = generate_dataset(spec);
    for (const auto& clip : dataset.clips)
        for (auto m : clip.placeholder_mask) CHECK(m == 0);
    for (const auto& meta : dataset.metas) CHECK(meta.missing_rate == 0.0);
}

TEST_CASE("empirical missing rate concentrates around the class mean") {
    SynthSpec spec = small_spec();
    spec.clips_per_class = 200;
    spec.missing_rate_means = {0.02, 0.10, 0.25, 0.50};
    const ClipDataset dataset = generate_dataset(spec);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.metas[i].label != 3) continue;
        sum += dataset.metas[i].missing_rate;
        ++count;
    }
    REQUIRE(count == 200);
    CHECK(std::abs(sum / static_cast<double>(count) - 0.5) <= 0.05);
}

TEST_CASE("label balance and subject round-robin") {
    const SynthSpec spec = small_spec();
    const ClipDataset dataset = generate_dataset(spec);
    REQUIRE(dataset.size() == spec.num_classes * spec.clips_per_class);
    std::vector<std::size_t> per_class(spec.num_classes, 0);
    std::set<std::string> subjects;
    for (const auto& meta : dataset.metas) {
        ++per_class[meta.label];
        subjects.insert(meta.subject_id);
    }
    for (std::size_t c = 0; c < spec.num_classes; ++c) CHECK(per_class[c] == spec.clips_per_class);
    CHECK(subjects.size() == spec.subjects);
}

TEST_CASE("class_pattern is deterministic, bounded, and class-separable") {
    const PatternParams params{4.0, 0.5};
    const Tensor a = class_pattern(1, 3, 24, 24, params);
    const Tensor b = class_pattern(1, 3, 24, 24, params);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] >= 0.0);
        CHECK(a[i] <= 1.0);
    }

    // every pair of classes differs by > 0.1 on at least 10% of pixels
    const SynthSpec spec;  // default desk preset
    for (std::size_t c1 = 0; c1 < spec.num_classes; ++c1) {
        for (std::size_t c2 = c1 + 1; c2 < spec.num_classes; ++c2) {
            const Tensor p1 = class_pattern(c1, 0, 32, 32, spec.patterns[c1]);
            const Tensor p2 = class_pattern(c2, 0, 32, 32, spec.patterns[c2]);
            std::size_t differing = 0;
            for (std::size_t i = 0; i < p1.size(); ++i)
                if (std::abs(p1[i] - p2[i]) > 0.1) ++differing;
            CHECK(differing >= p1.size() / 10);
        }
    }
}

TEST_CASE("mask carries label information when class rates differ") {
    SynthSpec spec = small_spec();
    spec.clips_per_class = 150;
    const ClipDataset dataset = generate_dataset(spec);

    // plug-in mutual information between missingness group and label
    const std::size_t G = 3, C = spec.num_classes;
    std::vector<std::vector<double>> joint(G, std::vector<double>(C, 0.0));
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto g = static_cast<std::size_t>(missingness_group(dataset.metas[i].missing_rate));
        joint[g][dataset.metas[i].label] += 1.0;
    }
    const double n = static_cast<double>(dataset.size());
    std::vector<double> pg(G, 0.0), pc(C, 0.0);
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t c = 0; c < C; ++c) {
            joint[g][c] /= n;
            pg[g] += joint[g][c];
            pc[c] += joint[g][c];
        }
    double mi = 0.0;
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t c = 0; c < C; ++c)
            if (joint[g][c] > 0.0) mi += joint[g][c] * std::log(joint[g][c] / (pg[g] * pc[c]));
    CHECK(mi > 0.05);
}

TEST_CASE("invalid specs are rejected") {
    SynthSpec spec = small_spec();
    spec.missing_rate_means = {0.5};
    CHECK_THROWS_AS(generate_dataset(spec), std::invalid_argument);

    SynthSpec bad_mu = small_spec();
    bad_mu.missing_rate_means = {0.0, 0.0, 0.0, 1.5};
    CHECK_THROWS_AS(generate_dataset(bad_mu), std::invalid_argument);

    SynthSpec no_clips = small_spec();
    no_clips.clips_per_class = 0;
    CHECK_THROWS_AS(generate_dataset(no_clips), std::invalid_argument);
}
