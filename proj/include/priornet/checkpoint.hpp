#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "priornet/backbone.hpp"

namespace priornet {

// Model checkpoint:
//   "PNMD" | version u16 | u32 json_len | config JSON | u32 blob_count |
//   blobs: { u16 name_len | name | u8 ndim | u32 dims[] | f64 data[] }
// Adapter factors are stored as block{i}.{q|k|v}.A / .B with rank and alpha
// echoed in the JSON header.

inline constexpr std::uint16_t kModelFormatVersion = 1;

namespace detail {

inline void write_named_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
    const auto name_len = static_cast<std::uint16_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(name.data(), name_len);
    const auto ndim = static_cast<std::uint8_t>(t.ndim());
    out.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
    for (std::size_t e : t.shape()) {
        const auto v = static_cast<std::uint32_t>(e);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

inline std::pair<std::string, Tensor> read_named_tensor(std::istream& in) {
    std::uint16_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint8_t ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    std::vector<std::size_t> shape(ndim);
    for (auto& e : shape) {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        e = v;
    }
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor blob");
    return {std::move(name), std::move(t)};
}

template <typename Fn>
void for_each_model_tensor(PriorNetModel& model, Fn&& fn) {
    fn("embed.W", model.weights.embed_W);
    fn("embed.b", model.weights.embed_b);
    for (std::size_t i = 0; i < model.weights.blocks.size(); ++i) {
        auto& b = model.weights.blocks[i];
        const std::string p = "block" + std::to_string(i) + ".";
        fn(p + "Wq", b.Wq);
        fn(p + "Wk", b.Wk);
        fn(p + "Wv", b.Wv);
        fn(p + "Wo", b.Wo);
        fn(p + "ln1.gamma", b.ln1_gamma);
        fn(p + "ln1.beta", b.ln1_beta);
        fn(p + "ln2.gamma", b.ln2_gamma);
        fn(p + "ln2.beta", b.ln2_beta);
        fn(p + "W1", b.W1);
        fn(p + "b1", b.b1);
        fn(p + "W2", b.W2);
        fn(p + "b2", b.b2);
        if (model.adapters[i].has_value()) {
            auto& a = model.adapters[i].value();
            fn(p + "q.A", a.q.A);
            fn(p + "q.B", a.q.B);
            fn(p + "k.A", a.k.A);
            fn(p + "k.B", a.k.B);
            fn(p + "v.A", a.v.A);
            fn(p + "v.B", a.v.B);
        }
    }
    fn("head.W", model.weights.head_W);
    fn("head.b", model.weights.head_b);
}

} // namespace detail

inline void save_model(const std::string& path, const PriorNetModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out.write("PNMD", 4);
    const std::uint16_t version = kModelFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));

    nlohmann::json cfg{{"hidden_dim", model.cfg.hidden_dim},
                       {"num_blocks", model.cfg.num_blocks},
                       {"num_heads", model.cfg.num_heads},
                       {"tubelet", {model.cfg.tubelet_t, model.cfg.tubelet_h, model.cfg.tubelet_w}},
                       {"mlp_ratio", model.cfg.mlp_ratio},
                       {"num_classes", model.cfg.num_classes},
                       {"seed", model.cfg.seed}};
    nlohmann::json adapters = nlohmann::json::array();
    for (std::size_t i = 0; i < model.adapters.size(); ++i) {
        if (!model.adapters[i].has_value()) continue;
        adapters.push_back({{"block", i},
                            {"rank", model.adapters[i]->q.rank},
                            {"alpha", model.adapters[i]->q.alpha}});
    }
    cfg["adapters"] = adapters;
    const std::string blob = cfg.dump();
    const auto json_len = static_cast<std::uint32_t>(blob.size());
    out.write(reinterpret_cast<const char*>(&json_len), sizeof(json_len));
    out.write(blob.data(), json_len);

    std::uint32_t count = 0;
    detail::for_each_model_tensor(const_cast<PriorNetModel&>(model),
                                  [&count](const std::string&, Tensor&) { ++count; });
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    detail::for_each_model_tensor(const_cast<PriorNetModel&>(model),
                                  [&out](const std::string& name, Tensor& t) {
                                      detail::write_named_tensor(out, name, t);
                                  });
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

inline PriorNetModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PNMD", 4) != 0)
        throw std::runtime_error("load_model: bad magic in " + path);
    std::uint16_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kModelFormatVersion)
        throw std::runtime_error("load_model: unsupported version in " + path);
    std::uint32_t json_len = 0;
    in.read(reinterpret_cast<char*>(&json_len), sizeof(json_len));
    std::string blob(json_len, '\0');
    in.read(blob.data(), json_len);
    if (!in) throw std::runtime_error("load_model: truncated header in " + path);
    const nlohmann::json cfg_json = nlohmann::json::parse(blob);

    EncoderConfig cfg;
    cfg.hidden_dim = cfg_json.at("hidden_dim").get<std::size_t>();
    cfg.num_blocks = cfg_json.at("num_blocks").get<std::size_t>();
    cfg.num_heads = cfg_json.at("num_heads").get<std::size_t>();
    cfg.tubelet_t = cfg_json.at("tubelet")[0].get<std::size_t>();
    cfg.tubelet_h = cfg_json.at("tubelet")[1].get<std::size_t>();
    cfg.tubelet_w = cfg_json.at("tubelet")[2].get<std::size_t>();
    cfg.mlp_ratio = cfg_json.at("mlp_ratio").get<std::size_t>();
    cfg.num_classes = cfg_json.at("num_classes").get<std::size_t>();
    cfg.seed = cfg_json.at("seed").get<std::uint64_t>();

    PriorNetModel model = build_model(cfg);
    for (const auto& a : cfg_json.at("adapters")) {
        const auto block = a.at("block").get<std::size_t>();
        const auto rank = a.at("rank").get<std::size_t>();
        const auto alpha = a.at("alpha").get<double>();
        QkvAdapters triple;
        triple.q = init_adapter(cfg.hidden_dim, rank, alpha, 0);
        triple.k = init_adapter(cfg.hidden_dim, rank, alpha, 0);
        triple.v = init_adapter(cfg.hidden_dim, rank, alpha, 0);
        model.adapters.at(block) = std::move(triple);
    }

    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    std::map<std::string, Tensor> blobs;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, tensor] = detail::read_named_tensor(in);
        blobs.emplace(std::move(name), std::move(tensor));
    }
    detail::for_each_model_tensor(model, [&blobs, &path](const std::string& name, Tensor& t) {
        auto it = blobs.find(name);
        if (it == blobs.end())
            throw std::runtime_error("load_model: missing tensor " + name + " in " + path);
        if (it->second.shape() != t.shape())
            throw std::runtime_error("load_model: shape mismatch for " + name + " in " + path);
        t = std::move(it->second);
    });
    for (auto& b : model.weights.blocks) b.refresh_derived();
    return model;
}

} // namespace priornet
