#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "priornet/ablation.hpp"
#include "priornet/gradcheck.hpp"
#include "priornet/metrics.hpp"
#include "priornet/synth.hpp"
#include "priornet/train.hpp"

// JSON bindings for everything that crosses the CLI boundary: configs in,
// reports out. Field names are the stable external contract.

namespace priornet {

inline void to_json(nlohmann::json& j, const PatternParams& p) {
    j = {{"spatial_frequency", p.spatial_frequency}, {"base_intensity", p.base_intensity}};
}

inline void from_json(const nlohmann::json& j, PatternParams& p) {
    p.spatial_frequency = j.value("spatial_frequency", p.spatial_frequency);
    p.base_intensity = j.value("base_intensity", p.base_intensity);
}

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
    j = {{"num_classes", s.num_classes},
         {"clips_per_class", s.clips_per_class},
         {"clip_length", s.clip_length},
         {"height", s.height},
         {"width", s.width},
         {"subjects", s.subjects},
         {"missing_rate_means", s.missing_rate_means},
         {"patterns", s.patterns},
         {"noise_std", s.noise_std},
         {"noise_temporal_correlation", s.noise_temporal_correlation},
         {"phase_jitter", s.phase_jitter},
         {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
    s.num_classes = j.value("num_classes", s.num_classes);
    s.clips_per_class = j.value("clips_per_class", s.clips_per_class);
    s.clip_length = j.value("clip_length", s.clip_length);
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.subjects = j.value("subjects", s.subjects);
    if (j.contains("missing_rate_means"))
        s.missing_rate_means = j.at("missing_rate_means").get<std::vector<double>>();
    if (j.contains("patterns")) s.patterns = j.at("patterns").get<std::vector<PatternParams>>();
    s.noise_std = j.value("noise_std", s.noise_std);
    s.noise_temporal_correlation =
        j.value("noise_temporal_correlation", s.noise_temporal_correlation);
    s.phase_jitter = j.value("phase_jitter", s.phase_jitter);
    s.seed = j.value("seed", s.seed);
}

inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
    j = {{"hidden_dim", c.hidden_dim},
         {"num_blocks", c.num_blocks},
         {"num_heads", c.num_heads},
         {"tubelet", {c.tubelet_t, c.tubelet_h, c.tubelet_w}},
         {"mlp_ratio", c.mlp_ratio},
         {"num_classes", c.num_classes},
         {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.num_blocks = j.value("num_blocks", c.num_blocks);
    c.num_heads = j.value("num_heads", c.num_heads);
    if (j.contains("tubelet")) {
        const auto& t = j.at("tubelet");
        c.tubelet_t = t.at(0).get<std::size_t>();
        c.tubelet_h = t.at(1).get<std::size_t>();
        c.tubelet_w = t.at(2).get<std::size_t>();
    }
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.seed = j.value("seed", c.seed);
}

inline void to_json(nlohmann::json& j, const PlacementPolicy& p) {
    const char* mode = p.mode == PlacementMode::EveryOther ? "every_other"
                       : p.mode == PlacementMode::All      ? "all"
                                                           : "explicit";
    j = {{"mode", mode}, {"blocks", p.explicit_indices}};
}

inline void from_json(const nlohmann::json& j, PlacementPolicy& p) {
    const std::string mode = j.value("mode", std::string("every_other"));
    if (mode == "every_other") p.mode = PlacementMode::EveryOther;
    else if (mode == "all") p.mode = PlacementMode::All;
    else if (mode == "explicit") p.mode = PlacementMode::Explicit;
    else throw std::invalid_argument("PlacementPolicy: unknown mode " + mode);
    if (j.contains("blocks"))
        p.explicit_indices = j.at("blocks").get<std::vector<std::size_t>>();
}

inline void to_json(nlohmann::json& j, const LossHyperParams& h) {
    j = {{"lambda_kl", h.lambda_kl},
         {"w_henn", h.w_henn},
         {"w_ufce", h.w_ufce},
         {"w_ce", h.w_ce},
         {"epsilon", h.epsilon},
         {"evidence_cap", h.evidence_cap},
         {"kl_anneal_epochs", h.kl_anneal_epochs}};
}

inline void from_json(const nlohmann::json& j, LossHyperParams& h) {
    h.lambda_kl = j.value("lambda_kl", h.lambda_kl);
    h.w_henn = j.value("w_henn", h.w_henn);
    h.w_ufce = j.value("w_ufce", h.w_ufce);
    h.w_ce = j.value("w_ce", h.w_ce);
    h.epsilon = j.value("epsilon", h.epsilon);
    h.evidence_cap = j.value("evidence_cap", h.evidence_cap);
    h.kl_anneal_epochs = j.value("kl_anneal_epochs", h.kl_anneal_epochs);
}

inline void to_json(nlohmann::json& j, const AdamConfig& a) {
    j = {{"learning_rate", a.learning_rate},
         {"beta1", a.beta1},
         {"beta2", a.beta2},
         {"epsilon", a.epsilon}};
}

inline void from_json(const nlohmann::json& j, AdamConfig& a) {
    a.learning_rate = j.value("learning_rate", a.learning_rate);
    a.beta1 = j.value("beta1", a.beta1);
    a.beta2 = j.value("beta2", a.beta2);
    a.epsilon = j.value("epsilon", a.epsilon);
}

inline void to_json(nlohmann::json& j, const ComponentToggles& t) {
    j = {{"placeholders", t.placeholders},
         {"prior_lora", t.prior_lora},
         {"advanced_objective", t.advanced_objective}};
}

inline void from_json(const nlohmann::json& j, ComponentToggles& t) {
    t.placeholders = j.value("placeholders", t.placeholders);
    t.prior_lora = j.value("prior_lora", t.prior_lora);
    t.advanced_objective = j.value("advanced_objective", t.advanced_objective);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"encoder", c.encoder},
                       {"placement", c.placement},
                       {"lora_rank", c.lora_rank},
                       {"lora_alpha", c.lora_alpha},
                       {"loss", c.loss},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"optimizer", c.optimizer},
                       {"train_fraction", c.train_fraction},
                       {"seed", c.seed},
                       {"toggles", c.toggles},
                       {"num_threads", c.num_threads}};
    if (c.synth.has_value()) j["synth"] = *c.synth;
    if (!c.dataset_path.empty()) j["dataset_path"] = c.dataset_path;
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
    if (j.contains("synth")) c.synth = j.at("synth").get<SynthSpec>();
    c.dataset_path = j.value("dataset_path", c.dataset_path);
    if (j.contains("encoder")) j.at("encoder").get_to(c.encoder);
    if (j.contains("placement")) j.at("placement").get_to(c.placement);
    c.lora_rank = j.value("lora_rank", c.lora_rank);
    // alpha = r unless explicitly overridden
    c.lora_alpha = j.contains("lora_alpha") ? j.at("lora_alpha").get<double>()
                                            : static_cast<double>(c.lora_rank);
    if (j.contains("loss")) j.at("loss").get_to(c.loss);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("optimizer")) j.at("optimizer").get_to(c.optimizer);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.seed = j.value("seed", c.seed);
    if (j.contains("toggles")) j.at("toggles").get_to(c.toggles);
    c.num_threads = j.value("num_threads", c.num_threads);
}

inline void to_json(nlohmann::json& j, const ClassMetrics& m) {
    j = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = {{"accuracy", r.accuracy},
         {"weighted_f1", r.weighted_f1},
         {"per_class", r.per_class},
         {"confusion", r.confusion}};
}

inline void to_json(nlohmann::json& j, const LossBreakdown& b) {
    j = {{"data_term", b.data_term}, {"kl_term", b.kl_term}, {"henn", b.henn},
         {"ufce", b.ufce},           {"ce", b.ce},           {"total", b.total}};
}

inline void to_json(nlohmann::json& j, const AblationRow& r) {
    j = {{"name", r.name},
         {"toggles", r.toggles},
         {"accuracy", r.accuracy},
         {"weighted_f1", r.weighted_f1}};
}

inline void to_json(nlohmann::json& j, const MissingnessGroupStats& s) {
    j = {{"count", s.count},
         {"accuracy_with_placeholders", s.accuracy_with},
         {"accuracy_without_placeholders", s.accuracy_without},
         {"delta", s.delta}};
}

inline void to_json(nlohmann::json& j, const MissingnessGroupReport& r) {
    j = {{"low", r.low}, {"medium", r.medium}, {"high", r.high}};
}

inline void to_json(nlohmann::json& j, const GradientCheckReport& r) {
    j = {{"max_abs_error", r.max_abs_error},
         {"max_rel_error", r.max_rel_error},
         {"num_points_checked", r.num_points_checked},
         {"points_skipped_near_nonsmoothness", r.points_skipped_near_nonsmoothness}};
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in);
}

inline void save_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

} // namespace priornet
