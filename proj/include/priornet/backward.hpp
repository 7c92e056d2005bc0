#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "priornet/backbone.hpp"
#include "priornet/tensor.hpp"

namespace priornet {

// Registry of every tensor the optimizer may move: adapter factors in block
// order (q.A, q.B, k.A, k.B, v.A, v.B per adapted block), then the head.
struct TrainableParams {
    std::vector<Tensor*> tensors;
    std::vector<std::string> names;
    std::vector<std::size_t> block_base;  // per block: index of q.A, or npos

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

inline TrainableParams collect_trainable(PriorNetModel& model) {
    TrainableParams out;
    out.block_base.assign(model.cfg.num_blocks, TrainableParams::npos);
    for (std::size_t i = 0; i < model.cfg.num_blocks; ++i) {
        if (!model.adapters[i].has_value()) continue;
        auto& a = model.adapters[i].value();
        out.block_base[i] = out.tensors.size();
        const std::string prefix = "block" + std::to_string(i) + ".";
        out.tensors.push_back(&a.q.A);
        out.names.push_back(prefix + "q.A");
        out.tensors.push_back(&a.q.B);
        out.names.push_back(prefix + "q.B");
        out.tensors.push_back(&a.k.A);
        out.names.push_back(prefix + "k.A");
        out.tensors.push_back(&a.k.B);
        out.names.push_back(prefix + "k.B");
        out.tensors.push_back(&a.v.A);
        out.names.push_back(prefix + "v.A");
        out.tensors.push_back(&a.v.B);
        out.names.push_back(prefix + "v.B");
    }
    out.tensors.push_back(&model.weights.head_W);
    out.names.push_back("head.W");
    out.tensors.push_back(&model.weights.head_b);
    out.names.push_back("head.b");
    return out;
}

inline std::vector<Tensor> zero_grads_like(const TrainableParams& params) {
    std::vector<Tensor> grads;
    grads.reserve(params.tensors.size());
    for (const Tensor* p : params.tensors) grads.emplace_back(p->shape());
    return grads;
}

inline void accumulate_grads(std::vector<Tensor>& into, const std::vector<Tensor>& from) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

// Reused buffers for one backward pass; grown on first use.
struct BackwardScratch {
    Tensor dX, dx_mid, dctx, dh1, dact, dh2;
    Tensor dq, dk, dv;
    Tensor dA, dVh, dQh, dKh;
    Tensor qh, kh, vh, dctx_h, vhT;
    Tensor AT, BT;   // adapter factor transposes
    Tensor tmp_ld;   // L x d
    Tensor tmp_lr;   // L x r
    Tensor tmp_rd;   // r x d
};

namespace detail {

// dX of a layer norm given the gradient at its affine output; only the
// activation gradient is needed since gamma/beta stay frozen.
inline void layer_norm_backward(const Tensor& dout, const Tensor& norm,
                                const std::vector<double>& rstd, const Tensor& gamma,
                                Tensor& dx_accum) {
    const std::size_t L = dout.rows(), d = dout.cols();
    std::vector<double> dy(d);
    for (std::size_t t = 0; t < L; ++t) {
        const double* drow = dout.data() + t * d;
        const double* nrow = norm.data() + t * d;
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            dy[j] = drow[j] * gamma[j];
            m1 += dy[j];
            m2 += dy[j] * nrow[j];
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        double* xrow = dx_accum.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) xrow[j] += rstd[t] * (dy[j] - m1 - nrow[j] * m2);
    }
}

// Backward of q = h W + s (h A) B. Propagates into dh via the
// pre-transposed frozen weight and, when the projection is adapted,
// accumulates the factor gradients. Adapter transposes are rebuilt per call
// since the factors move every optimizer step; they are r x d and d x r.
inline void projection_backward(const Tensor& dq, const Tensor& WT, const LoraAdapter* adapter,
                                const Tensor& h1, const Tensor& xa, Tensor& dh_accum,
                                Tensor* gA, Tensor* gB, BackwardScratch& ws) {
    matmul_into(dq, WT, ws.tmp_ld);  // dq W^T
    dh_accum += ws.tmp_ld;
    if (adapter == nullptr) return;
    const double s = adapter->scale();
    transpose_into(adapter->B, ws.BT);
    matmul_into(dq, ws.BT, ws.tmp_lr);  // dq B^T, L x r
    ws.tmp_lr *= s;
    transpose_into(adapter->A, ws.AT);
    matmul_into(ws.tmp_lr, ws.AT, ws.tmp_ld);  // s (dq B^T) A^T
    dh_accum += ws.tmp_ld;
    matmul_tn_accum(h1, ws.tmp_lr, *gA);  // s h^T (dq B^T)
    if (ws.tmp_rd.ndim() != 2 || ws.tmp_rd.rows() != adapter->B.rows() ||
        ws.tmp_rd.cols() != adapter->B.cols())
        ws.tmp_rd = Tensor({adapter->B.rows(), adapter->B.cols()});
    else
        ws.tmp_rd.fill(0.0);
    matmul_tn_accum(xa, dq, ws.tmp_rd);  // (h A)^T dq
    ws.tmp_rd *= s;
    *gB += ws.tmp_rd;
}

inline void ensure_shape(Tensor& t, std::size_t rows, std::size_t cols) {
    if (t.ndim() != 2 || t.rows() != rows || t.cols() != cols) t = Tensor({rows, cols});
}

} // namespace detail

// Accumulates d(loss)/d(adapters, head) for one clip into `grads`, which must
// be aligned with collect_trainable(). dlogits is that clip's row of the
// batch loss gradient.
inline void model_backward(const PriorNetModel& model, const TrainableParams& params,
                           const ForwardCache& cache, const std::vector<double>& dlogits,
                           std::vector<Tensor>& grads, BackwardScratch& ws) {
    const std::size_t d = model.cfg.hidden_dim;
    const std::size_t C = model.cfg.num_classes;
    const std::size_t L = cache.final_tokens.rows();
    const std::size_t heads = model.cfg.num_heads;
    const std::size_t dk = model.cfg.head_dim();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    // head
    Tensor& g_head_W = grads[grads.size() - 2];
    Tensor& g_head_b = grads[grads.size() - 1];
    std::vector<double> dfeature(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const double f = cache.feature[j];
        const double* wrow = model.weights.head_W.data() + j * C;
        double* grow = g_head_W.data() + j * C;
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            grow[c] += f * dlogits[c];
            acc += wrow[c] * dlogits[c];
        }
        dfeature[j] = acc;
    }
    for (std::size_t c = 0; c < C; ++c) g_head_b[c] += dlogits[c];

    // mean pool
    detail::ensure_shape(ws.dX, L, d);
    const double inv_L = 1.0 / static_cast<double>(L);
    for (std::size_t t = 0; t < L; ++t) {
        double* row = ws.dX.data() + t * d;
        for (std::size_t j = 0; j < d; ++j) row[j] = dfeature[j] * inv_L;
    }

    for (std::size_t bi = model.cfg.num_blocks; bi-- > 0;) {
        const BlockCache& cc = cache.blocks[bi];
        const BlockWeights& bw = model.weights.blocks[bi];
        const QkvAdapters* adapters =
            model.adapters[bi].has_value() ? &model.adapters[bi].value() : nullptr;

        // MLP sublayer: out = x_mid + silu(LN2(x_mid) W1 + b1) W2 + b2
        matmul_into(ws.dX, bw.W2T, ws.dact);
        for (std::size_t i = 0; i < ws.dact.size(); ++i) ws.dact[i] *= cc.mlp_dact[i];
        matmul_into(ws.dact, bw.W1T, ws.dh2);
        ws.dx_mid = ws.dX;  // residual path
        detail::layer_norm_backward(ws.dh2, cc.h2_norm, cc.ln2_rstd, bw.ln2_gamma, ws.dx_mid);

        // attention sublayer: x_mid = x_in + ctx Wo
        matmul_into(ws.dx_mid, bw.WoT, ws.dctx);
        detail::ensure_shape(ws.dq, L, d);
        detail::ensure_shape(ws.dk, L, d);
        detail::ensure_shape(ws.dv, L, d);
        for (std::size_t h = 0; h < heads; ++h) {
            detail::slice_head(cc.q, h, dk, ws.qh);
            detail::slice_head(cc.k, h, dk, ws.kh);
            detail::slice_head(cc.v, h, dk, ws.vh);
            detail::slice_head(ws.dctx, h, dk, ws.dctx_h);
            const Tensor& A = cc.attn[h];
            transpose_into(ws.vh, ws.vhT);
            matmul_into(ws.dctx_h, ws.vhT, ws.dA);
            detail::ensure_shape(ws.dVh, L, dk);
            ws.dVh.fill(0.0);
            matmul_tn_accum(A, ws.dctx_h, ws.dVh);
            // softmax backward in place: dS = A o (dA - rowsum(dA o A))
            for (std::size_t t = 0; t < L; ++t) {
                const double* arow = A.data() + t * L;
                double* srow = ws.dA.data() + t * L;
                double dot = 0.0;
                for (std::size_t j = 0; j < L; ++j) dot += srow[j] * arow[j];
                for (std::size_t j = 0; j < L; ++j) srow[j] = arow[j] * (srow[j] - dot);
            }
            matmul_into(ws.dA, ws.kh, ws.dQh);
            ws.dQh *= inv_sqrt_dk;
            detail::ensure_shape(ws.dKh, L, dk);
            ws.dKh.fill(0.0);
            matmul_tn_accum(ws.dA, ws.qh, ws.dKh);
            ws.dKh *= inv_sqrt_dk;
            detail::unslice_head(ws.dQh, h, dk, ws.dq);
            detail::unslice_head(ws.dKh, h, dk, ws.dk);
            detail::unslice_head(ws.dVh, h, dk, ws.dv);
        }

        detail::ensure_shape(ws.dh1, L, d);
        ws.dh1.fill(0.0);
        const std::size_t base = params.block_base[bi];
        Tensor* gqa = nullptr;
        Tensor* gqb = nullptr;
        Tensor* gka = nullptr;
        Tensor* gkb = nullptr;
        Tensor* gva = nullptr;
        Tensor* gvb = nullptr;
        if (adapters != nullptr) {
            if (base == TrainableParams::npos)
                throw std::logic_error("model_backward: adapter missing from registry");
            gqa = &grads[base + 0];
            gqb = &grads[base + 1];
            gka = &grads[base + 2];
            gkb = &grads[base + 3];
            gva = &grads[base + 4];
            gvb = &grads[base + 5];
        }
        detail::projection_backward(ws.dq, bw.WqT, adapters ? &adapters->q : nullptr, cc.h1, cc.qa,
                                    ws.dh1, gqa, gqb, ws);
        detail::projection_backward(ws.dk, bw.WkT, adapters ? &adapters->k : nullptr, cc.h1, cc.ka,
                                    ws.dh1, gka, gkb, ws);
        detail::projection_backward(ws.dv, bw.WvT, adapters ? &adapters->v : nullptr, cc.h1, cc.va,
                                    ws.dh1, gva, gvb, ws);

        // dX for the block below: residual + LN1 path
        ws.dX = ws.dx_mid;
        detail::layer_norm_backward(ws.dh1, cc.h1_norm, cc.ln1_rstd, bw.ln1_gamma, ws.dX);
    }
}

inline void model_backward(const PriorNetModel& model, const TrainableParams& params,
                           const ForwardCache& cache, const std::vector<double>& dlogits,
                           std::vector<Tensor>& grads) {
    BackwardScratch ws;
    model_backward(model, params, cache, dlogits, grads, ws);
}

} // namespace priornet
