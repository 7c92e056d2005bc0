#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "priornet/clip.hpp"
#include "priornet/lora.hpp"
#include "priornet/rng.hpp"
#include "priornet/special.hpp"
#include "priornet/tensor.hpp"

namespace priornet {

using TokenMatrix = Tensor;  // L_tok x d, one row per token

struct EncoderConfig {
    std::size_t hidden_dim = 64;  // d
    std::size_t num_blocks = 8;   // L
    std::size_t num_heads = 4;
    std::size_t tubelet_t = 2;
    std::size_t tubelet_h = 8;
    std::size_t tubelet_w = 8;
    std::size_t mlp_ratio = 4;
    std::size_t num_classes = 4;
    std::uint64_t seed = 0;

    std::size_t head_dim() const { return hidden_dim / num_heads; }
    std::size_t patch_dim() const { return tubelet_t * tubelet_h * tubelet_w * 3; }

    void validate() const {
        if (num_blocks < 2) throw std::invalid_argument("EncoderConfig: need at least 2 blocks");
        if (num_heads < 1 || hidden_dim % num_heads != 0)
            throw std::invalid_argument("EncoderConfig: hidden_dim must divide evenly into heads");
        if (tubelet_t == 0 || tubelet_h == 0 || tubelet_w == 0)
            throw std::invalid_argument("EncoderConfig: tubelet extents must be positive");
    }

    std::size_t token_count(std::size_t N, std::size_t H, std::size_t W) const {
        if (N % tubelet_t != 0 || H % tubelet_h != 0 || W % tubelet_w != 0)
            throw std::invalid_argument("EncoderConfig: tubelet does not divide clip dimensions");
        return (N / tubelet_t) * (H / tubelet_h) * (W / tubelet_w);
    }
};

struct BlockWeights {
    Tensor Wq, Wk, Wv, Wo;              // d x d, no bias
    Tensor ln1_gamma, ln1_beta;         // d
    Tensor ln2_gamma, ln2_beta;         // d
    Tensor W1, b1;                      // d x (mlp_ratio*d), (mlp_ratio*d)
    Tensor W2, b2;                      // (mlp_ratio*d) x d, d
    // derived transposes; gradient propagation then runs wide row-major
    // matmuls instead of dot products. Rebuilt by refresh_derived().
    Tensor WqT, WkT, WvT, WoT, W1T, W2T;

    void refresh_derived() {
        transpose_into(Wq, WqT);
        transpose_into(Wk, WkT);
        transpose_into(Wv, WvT);
        transpose_into(Wo, WoT);
        transpose_into(W1, W1T);
        transpose_into(W2, W2T);
    }
};

struct FrozenWeights {
    Tensor embed_W, embed_b;  // patch_dim x d, d
    std::vector<BlockWeights> blocks;
    Tensor head_W, head_b;    // d x C, C  (the only weights here the optimizer touches)
};

struct QkvAdapters {
    LoraAdapter q, k, v;
};

struct PriorNetModel {
    EncoderConfig cfg;
    FrozenWeights weights;
    std::vector<std::optional<QkvAdapters>> adapters;  // one slot per block
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline void init_gaussian(Tensor& t, std::uint64_t seed, const std::string& name) {
    Rng rng(seed, hash_combine(0x626b626eu, fnv1a(name)));
    for (auto& v : t.values()) v = 0.02 * rng.gaussian();
}

} // namespace detail

// Stand-in for a pretrained encoder: seeded Gaussian weights that are never
// trained, so frozen-vs-adapted comparisons stay meaningful.
inline PriorNetModel build_model(const EncoderConfig& cfg) {
    cfg.validate();
    PriorNetModel model;
    model.cfg = cfg;
    const std::size_t d = cfg.hidden_dim;
    const std::size_t hidden = cfg.mlp_ratio * d;
    auto& w = model.weights;
    w.embed_W = Tensor({cfg.patch_dim(), d});
    w.embed_b = Tensor({d});
    detail::init_gaussian(w.embed_W, cfg.seed, "embed.W");
    detail::init_gaussian(w.embed_b, cfg.seed, "embed.b");
    w.blocks.resize(cfg.num_blocks);
    for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
        auto& b = w.blocks[i];
        const std::string prefix = "block" + std::to_string(i) + ".";
        b.Wq = Tensor({d, d});
        b.Wk = Tensor({d, d});
        b.Wv = Tensor({d, d});
        b.Wo = Tensor({d, d});
        detail::init_gaussian(b.Wq, cfg.seed, prefix + "Wq");
        detail::init_gaussian(b.Wk, cfg.seed, prefix + "Wk");
        detail::init_gaussian(b.Wv, cfg.seed, prefix + "Wv");
        detail::init_gaussian(b.Wo, cfg.seed, prefix + "Wo");
        b.ln1_gamma = Tensor::full({d}, 1.0);
        b.ln1_beta = Tensor({d});
        b.ln2_gamma = Tensor::full({d}, 1.0);
        b.ln2_beta = Tensor({d});
        b.W1 = Tensor({d, hidden});
        b.b1 = Tensor({hidden});
        b.W2 = Tensor({hidden, d});
        b.b2 = Tensor({d});
        detail::init_gaussian(b.W1, cfg.seed, prefix + "W1");
        detail::init_gaussian(b.b1, cfg.seed, prefix + "b1");
        detail::init_gaussian(b.W2, cfg.seed, prefix + "W2");
        detail::init_gaussian(b.b2, cfg.seed, prefix + "b2");
        b.refresh_derived();
    }
    w.head_W = Tensor({d, cfg.num_classes});
    w.head_b = Tensor({cfg.num_classes});
    detail::init_gaussian(w.head_W, cfg.seed, "head.W");
    detail::init_gaussian(w.head_b, cfg.seed, "head.b");
    model.adapters.assign(cfg.num_blocks, std::nullopt);
    return model;
}

// Exactly three adapters (Q, K, V) per selected block.
inline void place_adapters(PriorNetModel& model, const PlacementPolicy& policy, std::size_t rank,
                           double alpha, std::uint64_t seed) {
    model.adapters.assign(model.cfg.num_blocks, std::nullopt);
    for (std::size_t i : policy.selected_blocks(model.cfg.num_blocks)) {
        QkvAdapters triple;
        triple.q = init_adapter(model.cfg.hidden_dim, rank, alpha, hash_combine(seed, 3 * i + 0));
        triple.k = init_adapter(model.cfg.hidden_dim, rank, alpha, hash_combine(seed, 3 * i + 1));
        triple.v = init_adapter(model.cfg.hidden_dim, rank, alpha, hash_combine(seed, 3 * i + 2));
        model.adapters[i] = std::move(triple);
    }
}

// Fixed sinusoidal position table over token index.
inline Tensor positional_table(std::size_t tokens, std::size_t d) {
    Tensor pos({tokens, d});
    for (std::size_t t = 0; t < tokens; ++t) {
        for (std::size_t i = 0; i < d; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
            pos.at(t, i) = std::sin(static_cast<double>(t) * freq);
            if (i + 1 < d) pos.at(t, i + 1) = std::cos(static_cast<double>(t) * freq);
        }
    }
    return pos;
}

// Non-overlapping t x h x w x 3 blocks, flattened in clip storage order and
// linearly projected to d. Token order is temporal-major.
inline TokenMatrix tubelet_embed(const ClipTensor& clip, const EncoderConfig& cfg,
                                 const FrozenWeights& weights) {
    const std::size_t L_tok = cfg.token_count(clip.clip_length, clip.height, clip.width);
    const std::size_t d = cfg.hidden_dim;
    const std::size_t pd = cfg.patch_dim();
    const std::size_t nt = clip.clip_length / cfg.tubelet_t;
    const std::size_t nh = clip.height / cfg.tubelet_h;
    const std::size_t nw = clip.width / cfg.tubelet_w;
    Tensor patches({L_tok, pd});
    std::size_t token = 0;
    for (std::size_t ti = 0; ti < nt; ++ti) {
        for (std::size_t hi = 0; hi < nh; ++hi) {
            for (std::size_t wi = 0; wi < nw; ++wi, ++token) {
                double* dst = patches.data() + token * pd;
                std::size_t o = 0;
                for (std::size_t dt = 0; dt < cfg.tubelet_t; ++dt) {
                    const double* frame = clip.frame(ti * cfg.tubelet_t + dt);
                    for (std::size_t dy = 0; dy < cfg.tubelet_h; ++dy) {
                        const double* row = frame + ((hi * cfg.tubelet_h + dy) * clip.width +
                                                     wi * cfg.tubelet_w) * 3;
                        for (std::size_t dx = 0; dx < cfg.tubelet_w * 3; ++dx) dst[o++] = row[dx];
                    }
                }
            }
        }
    }
    TokenMatrix tokens = matmul(patches, weights.embed_W);
    for (std::size_t t = 0; t < L_tok; ++t) {
        double* row = tokens.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += weights.embed_b[j];
    }
    return tokens;
}

// --------------------------------------------------------------------------
// Forward pass with optional activation caching for the backward pass.
// Cache tensors are grown once and reused across clips; nothing in the hot
// path allocates after the first batch.
// --------------------------------------------------------------------------

struct BlockCache {
    Tensor h1_norm;  // pre-affine normalized LN1 output
    Tensor h1;       // post-affine
    std::vector<double> ln1_rstd;
    Tensor q, k, v;
    Tensor qa, ka, va;  // X*A per projection when adapted
    std::vector<Tensor> attn;  // per head: L x L row-softmax
    Tensor x_mid;
    Tensor h2_norm, h2;
    std::vector<double> ln2_rstd;
    Tensor mlp_act;   // silu(pre)
    Tensor mlp_dact;  // silu'(pre), cached so the backward pass is transcendental-free
};

struct AttnScratch {
    Tensor qh, kh, vh, ctxh;  // per-head slices
    Tensor khT;               // transposed keys so the score matmul stays wide
    Tensor ctx;               // concatenated heads
    Tensor proj_tmp;          // (X A) B residual
    Tensor mlp_pre;
};

struct ForwardCache {
    std::vector<BlockCache> blocks;
    AttnScratch scratch;
    Tensor final_tokens;
    std::vector<double> feature;
    std::vector<double> logits;
};

namespace detail {

inline void layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& norm,
                       Tensor& out, std::vector<double>& rstd) {
    const std::size_t L = x.rows(), d = x.cols();
    if (!norm.same_shape(x)) norm = Tensor({L, d});
    if (!out.same_shape(x)) out = Tensor({L, d});
    rstd.resize(L);
    for (std::size_t t = 0; t < L; ++t) {
        const double* row = x.data() + t * d;
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = row[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double r = 1.0 / std::sqrt(var + 1e-5);
        rstd[t] = r;
        double* nrow = norm.data() + t * d;
        double* orow = out.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) {
            nrow[j] = (row[j] - mean) * r;
            orow[j] = nrow[j] * gamma[j] + beta[j];
        }
    }
}

// head-sliced copies keep the per-head matmuls contiguous
inline void slice_head(const Tensor& full, std::size_t head, std::size_t dk, Tensor& out) {
    const std::size_t L = full.rows(), d = full.cols();
    if (out.ndim() != 2 || out.rows() != L || out.cols() != dk) out = Tensor({L, dk});
    for (std::size_t t = 0; t < L; ++t) {
        const double* src = full.data() + t * d + head * dk;
        double* dst = out.data() + t * dk;
        for (std::size_t j = 0; j < dk; ++j) dst[j] = src[j];
    }
}

inline void unslice_head(const Tensor& part, std::size_t head, std::size_t dk, Tensor& full) {
    const std::size_t L = part.rows(), d = full.cols();
    for (std::size_t t = 0; t < L; ++t) {
        const double* src = part.data() + t * dk;
        double* dst = full.data() + t * d + head * dk;
        for (std::size_t j = 0; j < dk; ++j) dst[j] = src[j];
    }
}

inline void project_into(const Tensor& h, const Tensor& W, const LoraAdapter* adapter, Tensor& out,
                         Tensor& xa, Tensor& tmp) {
    matmul_into(h, W, out);
    if (adapter == nullptr) return;
    matmul_into(h, adapter->A, xa);
    matmul_into(xa, adapter->B, tmp);
    const double s = adapter->scale();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * tmp[i];
}

} // namespace detail

// Pre-norm attention sublayer with residual, written into cache.x_mid:
//   x_mid = X + MHSA(LN1(X)) * Wo, with LoRA deltas folded into Q/K/V.
inline void attention_forward_cached(const TokenMatrix& X, const BlockWeights& bw,
                                     const QkvAdapters* adapters, const EncoderConfig& cfg,
                                     BlockCache& cc, AttnScratch& ws) {
    const std::size_t L = X.rows(), d = X.cols();
    const std::size_t heads = cfg.num_heads, dk = cfg.head_dim();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    detail::layer_norm(X, bw.ln1_gamma, bw.ln1_beta, cc.h1_norm, cc.h1, cc.ln1_rstd);

    detail::project_into(cc.h1, bw.Wq, adapters ? &adapters->q : nullptr, cc.q, cc.qa, ws.proj_tmp);
    detail::project_into(cc.h1, bw.Wk, adapters ? &adapters->k : nullptr, cc.k, cc.ka, ws.proj_tmp);
    detail::project_into(cc.h1, bw.Wv, adapters ? &adapters->v : nullptr, cc.v, cc.va, ws.proj_tmp);

    if (ws.ctx.ndim() != 2 || ws.ctx.rows() != L || ws.ctx.cols() != d) ws.ctx = Tensor({L, d});
    cc.attn.resize(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        detail::slice_head(cc.q, h, dk, ws.qh);
        detail::slice_head(cc.k, h, dk, ws.kh);
        detail::slice_head(cc.v, h, dk, ws.vh);
        transpose_into(ws.kh, ws.khT);
        Tensor& scores = cc.attn[h];
        matmul_into(ws.qh, ws.khT, scores);
        for (std::size_t t = 0; t < L; ++t) {
            double* row = scores.data() + t * L;
            double mx = row[0] * inv_sqrt_dk;
            for (std::size_t j = 0; j < L; ++j) {
                row[j] *= inv_sqrt_dk;
                if (row[j] > mx) mx = row[j];
            }
            for (std::size_t j = 0; j < L; ++j) row[j] = fast_exp(row[j] - mx);
            double sum = 0.0;
            for (std::size_t j = 0; j < L; ++j) sum += row[j];
            const double inv = 1.0 / sum;
            for (std::size_t j = 0; j < L; ++j) row[j] *= inv;
        }
        matmul_into(scores, ws.vh, ws.ctxh);
        detail::unslice_head(ws.ctxh, h, dk, ws.ctx);
    }

    matmul_into(ws.ctx, bw.Wo, cc.x_mid);
    cc.x_mid += X;
}

// Pre-norm MLP sublayer with residual, overwriting `out`:
//   out = x_mid + SiLU(LN2(x_mid) W1 + b1) W2 + b2.
// The activation derivative is cached alongside the activation.
inline void mlp_forward_cached(const BlockWeights& bw, BlockCache& cc, AttnScratch& ws,
                               TokenMatrix& out) {
    const Tensor& x_mid = cc.x_mid;
    detail::layer_norm(x_mid, bw.ln2_gamma, bw.ln2_beta, cc.h2_norm, cc.h2, cc.ln2_rstd);
    matmul_into(cc.h2, bw.W1, ws.mlp_pre);
    const std::size_t L = x_mid.rows(), d = x_mid.cols(), hidden = bw.W1.cols();
    if (!cc.mlp_act.same_shape(ws.mlp_pre)) cc.mlp_act = Tensor({L, hidden});
    if (!cc.mlp_dact.same_shape(ws.mlp_pre)) cc.mlp_dact = Tensor({L, hidden});
    for (std::size_t t = 0; t < L; ++t) {
        const double* pre = ws.mlp_pre.data() + t * hidden;
        double* act = cc.mlp_act.data() + t * hidden;
        double* dact = cc.mlp_dact.data() + t * hidden;
        for (std::size_t j = 0; j < hidden; ++j) {
            const double z = pre[j] + bw.b1[j];
            const double sig = fast_sigmoid(z);
            act[j] = z * sig;
            dact[j] = sig * (1.0 + z * (1.0 - sig));
        }
    }
    matmul_into(cc.mlp_act, bw.W2, out);
    for (std::size_t t = 0; t < L; ++t) {
        double* row = out.data() + t * d;
        const double* xrow = x_mid.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += bw.b2[j] + xrow[j];
    }
}

// Convenience single-call forms of the two sublayers (tests, small tools).
inline TokenMatrix attention_forward(const TokenMatrix& X, const BlockWeights& bw,
                                     const QkvAdapters* adapters, const EncoderConfig& cfg,
                                     BlockCache* cache = nullptr) {
    BlockCache local;
    AttnScratch ws;
    BlockCache& cc = cache ? *cache : local;
    attention_forward_cached(X, bw, adapters, cfg, cc, ws);
    return cc.x_mid;
}

inline TokenMatrix mlp_forward(const TokenMatrix& X, const BlockWeights& bw,
                               BlockCache* cache = nullptr) {
    BlockCache local;
    AttnScratch ws;
    BlockCache& cc = cache ? *cache : local;
    cc.x_mid = X;
    TokenMatrix out;
    mlp_forward_cached(bw, cc, ws, out);
    return out;
}

inline TokenMatrix block_forward(const TokenMatrix& X, const BlockWeights& bw,
                                 const QkvAdapters* adapters, const EncoderConfig& cfg,
                                 BlockCache* cache = nullptr) {
    BlockCache local;
    AttnScratch ws;
    BlockCache& cc = cache ? *cache : local;
    attention_forward_cached(X, bw, adapters, cfg, cc, ws);
    TokenMatrix out;
    mlp_forward_cached(bw, cc, ws, out);
    return out;
}

// Mean-pooled feature over tokens after the final block.
inline std::vector<double> encode(const ClipTensor& clip, const PriorNetModel& model,
                                  ForwardCache* cache = nullptr) {
    const auto& cfg = model.cfg;
    ForwardCache local;
    ForwardCache& fc = cache ? *cache : local;

    TokenMatrix tokens = tubelet_embed(clip, cfg, model.weights);
    const std::size_t L = tokens.rows(), d = tokens.cols();
    const Tensor pos = positional_table(L, d);
    tokens += pos;
    fc.blocks.resize(cfg.num_blocks);
    for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
        const QkvAdapters* adapters =
            model.adapters[i].has_value() ? &model.adapters[i].value() : nullptr;
        attention_forward_cached(tokens, model.weights.blocks[i], adapters, cfg, fc.blocks[i],
                                 fc.scratch);
        mlp_forward_cached(model.weights.blocks[i], fc.blocks[i], fc.scratch, tokens);
    }
    std::vector<double> feature(d, 0.0);
    for (std::size_t t = 0; t < L; ++t) {
        const double* row = tokens.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) feature[j] += row[j];
    }
    for (auto& f : feature) f /= static_cast<double>(L);
    fc.final_tokens = std::move(tokens);
    fc.feature = feature;
    return feature;
}

// Affine map to C logits.
inline std::vector<double> classify(const std::vector<double>& feature, const PriorNetModel& model) {
    const std::size_t d = model.cfg.hidden_dim, C = model.cfg.num_classes;
    if (feature.size() != d) throw std::invalid_argument("classify: feature length mismatch");
    std::vector<double> logits(C);
    for (std::size_t c = 0; c < C; ++c) logits[c] = model.weights.head_b[c];
    for (std::size_t j = 0; j < d; ++j) {
        const double f = feature[j];
        const double* wrow = model.weights.head_W.data() + j * C;
        for (std::size_t c = 0; c < C; ++c) logits[c] += f * wrow[c];
    }
    return logits;
}

inline std::vector<double> forward_logits(const ClipTensor& clip, const PriorNetModel& model,
                                          ForwardCache* cache = nullptr) {
    std::vector<double> logits = classify(encode(clip, model, cache), model);
    if (cache) cache->logits = logits;
    return logits;
}

// Exact integer parameter accounting for a built model: adapter factors
// counted from their actual tensors, backbone from the block weight-matrix
// formula (4 d^2 attention + 2 * mlp_ratio d^2 MLP per block).
inline ParameterBudget parameter_budget(const PriorNetModel& model) {
    ParameterBudget budget;
    const std::size_t d = model.cfg.hidden_dim;
    budget.backbone_params =
        model.cfg.num_blocks * (4 * d * d + 2 * model.cfg.mlp_ratio * d * d);
    budget.head_params = model.weights.head_W.size() + model.weights.head_b.size();
    for (const auto& slot : model.adapters) {
        if (!slot.has_value()) continue;
        budget.adapter_params += slot->q.A.size() + slot->q.B.size() + slot->k.A.size() +
                                 slot->k.B.size() + slot->v.A.size() + slot->v.B.size();
    }
    return budget;
}

inline double trainable_fraction(const PriorNetModel& model) {
    return parameter_budget(model).trainable_fraction();
}

// FNV-1a over the bit patterns of every weight the optimizer must never
// touch: embedding, all block weights, layer norms. Head and adapters are
// excluded on purpose.
inline std::uint64_t frozen_checksum(const PriorNetModel& model) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](const Tensor& t) {
        for (double v : t.values()) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(v));
            std::memcpy(&bits, &v, sizeof(bits));
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffu;
                h *= 0x100000001b3ull;
            }
        }
    };
    feed(model.weights.embed_W);
    feed(model.weights.embed_b);
    for (const auto& b : model.weights.blocks) {
        feed(b.Wq);
        feed(b.Wk);
        feed(b.Wv);
        feed(b.Wo);
        feed(b.ln1_gamma);
        feed(b.ln1_beta);
        feed(b.ln2_gamma);
        feed(b.ln2_beta);
        feed(b.W1);
        feed(b.b1);
        feed(b.W2);
        feed(b.b2);
    }
    return h;
}

} // namespace priornet
