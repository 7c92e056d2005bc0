#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace priornet {

// Dense row-major container of 64-bit reals. All heavier machinery (clips,
// token matrices, projection weights) is stored in one of these.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<std::size_t> shape, double value) {
        Tensor t(std::move(shape));
        for (auto& v : t.data_) v = value;
        return t;
    }

    static Tensor identity(std::size_t n) {
        Tensor t({n, n});
        for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    void fill(double v) {
        for (auto& x : data_) x = v;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor& operator+=(const Tensor& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Tensor& operator-=(const Tensor& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Tensor& operator*=(double s) {
        for (auto& x : data_) x *= s;
        return *this;
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (auto e : shape) n *= e;
        return n;
    }

private:
    void require_same_shape(const Tensor& o) const {
        if (shape_ != o.shape_) throw std::invalid_argument("Tensor: shape mismatch");
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// C = A(m x k) * B(k x n). Row pairs share each B row and the p loop is
// blocked so the active B slice stays in L1; the inner j loop vectorizes.
inline void matmul_into(const Tensor& a, const Tensor& b, Tensor& c) {
    if (a.ndim() != 2 || b.ndim() != 2) throw std::invalid_argument("matmul: expects 2-D tensors");
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (c.ndim() != 2 || c.rows() != m || c.cols() != n) c = Tensor({m, n});
    else c.fill(0.0);
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    // keep the PB x n slice of B inside L1 across the row-pair sweep
    const std::size_t PB = std::clamp<std::size_t>(2048 / std::max<std::size_t>(n, 1), 8, 128);
    for (std::size_t p0 = 0; p0 < k; p0 += PB) {
        const std::size_t p1 = std::min(p0 + PB, k);
        std::size_t i = 0;
        for (; i + 1 < m; i += 2) {
            const double* a0 = ap + i * k;
            const double* a1 = a0 + k;
            double* c0 = cp + i * n;
            double* c1 = c0 + n;
            for (std::size_t p = p0; p < p1; ++p) {
                const double av0 = a0[p];
                const double av1 = a1[p];
                const double* brow = bp + p * n;
                for (std::size_t j = 0; j < n; ++j) {
                    c0[j] += av0 * brow[j];
                    c1[j] += av1 * brow[j];
                }
            }
        }
        if (i < m) {
            const double* a0 = ap + i * k;
            double* c0 = cp + i * n;
            for (std::size_t p = p0; p < p1; ++p) {
                const double av0 = a0[p];
                const double* brow = bp + p * n;
                for (std::size_t j = 0; j < n; ++j) c0[j] += av0 * brow[j];
            }
        }
    }
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    Tensor c;
    matmul_into(a, b, c);
    return c;
}

// C = A(m x k) * B(n x k)^T, used for gradient propagation dX = dY * W^T.
// 2x2 dot-product micro-tiles keep four reduction chains in flight.
inline void matmul_nt_into(const Tensor& a, const Tensor& b, Tensor& c) {
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimensions differ");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (c.ndim() != 2 || c.rows() != m || c.cols() != n) c = Tensor({m, n});
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    std::size_t i = 0;
    for (; i + 1 < m; i += 2) {
        const double* a0 = ap + i * k;
        const double* a1 = a0 + k;
        std::size_t j = 0;
        for (; j + 1 < n; j += 2) {
            const double* b0 = bp + j * k;
            const double* b1 = b0 + k;
            double acc00 = 0.0, acc01 = 0.0, acc10 = 0.0, acc11 = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc00 += a0[p] * b0[p];
                acc01 += a0[p] * b1[p];
                acc10 += a1[p] * b0[p];
                acc11 += a1[p] * b1[p];
            }
            cp[i * n + j] = acc00;
            cp[i * n + j + 1] = acc01;
            cp[(i + 1) * n + j] = acc10;
            cp[(i + 1) * n + j + 1] = acc11;
        }
        if (j < n) {
            const double* b0 = bp + j * k;
            double acc0 = 0.0, acc1 = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc0 += a0[p] * b0[p];
                acc1 += a1[p] * b0[p];
            }
            cp[i * n + j] = acc0;
            cp[(i + 1) * n + j] = acc1;
        }
    }
    if (i < m) {
        const double* a0 = ap + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = bp + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += a0[p] * brow[p];
            cp[i * n + j] = acc;
        }
    }
}

inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    Tensor c;
    matmul_nt_into(a, b, c);
    return c;
}

// C += A(m x k)^T * B(m x n), used for weight gradients dW = X^T * dY.
inline void matmul_tn_accum(const Tensor& a, const Tensor& b, Tensor& c) {
    if (a.rows() != b.rows()) throw std::invalid_argument("matmul_tn: leading dimensions differ");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (c.ndim() != 2 || c.rows() != k || c.cols() != n)
        throw std::invalid_argument("matmul_tn: output shape mismatch");
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ap + i * k;
        const double* brow = bp + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = cp + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void transpose_into(const Tensor& a, Tensor& t) {
    if (t.ndim() != 2 || t.rows() != a.cols() || t.cols() != a.rows())
        t = Tensor({a.cols(), a.rows()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
}

inline Tensor transpose(const Tensor& a) {
    Tensor t;
    transpose_into(a, t);
    return t;
}

} // namespace priornet
