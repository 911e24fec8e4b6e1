#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "seastereo/nn/autograd.hpp"

namespace seastereo::nn {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename T, typename FwdFn, typename GradFn>
Var<T> unary_op(const Var<T>& x, FwdFn fwd, GradFn dfdx) {
    Tensor<T> out(x->value.shape);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = fwd(x->value.data[i]);
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr, dfdx]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += r->grad.data[i] * dfdx(x->value.data[i], r->value.data[i]);
        };
    }
    return result;
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return v > T(0) ? v : T(0); },
        [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.1)) {
    return unary_op<T>(
        x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> tanh_op(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

// elu(x)+1: the positive feature map used by linear attention.
template <typename T>
Var<T> elu1(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return v > T(0) ? v + T(1) : std::exp(v); },
        [](T v, T) { return v > T(0) ? T(1) : std::exp(v); });
}

template <typename T>
Var<T> abs_op(const Var<T>& x) {
    return unary_op<T>(
        x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

// Elementwise smooth-L1 of the input (usually a difference map):
// 0.5 v^2/beta for |v| < beta, |v| - 0.5 beta otherwise.
template <typename T>
Var<T> smooth_l1(const Var<T>& x, T beta) {
    return unary_op<T>(
        x,
        [beta](T v) {
            T a = std::abs(v);
            return a < beta ? T(0.5) * v * v / beta : a - T(0.5) * beta;
        },
        [beta](T v, T) {
            T a = std::abs(v);
            if (a < beta) return v / beta;
            return v > T(0) ? T(1) : T(-1);
        });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
    return unary_op<T>(
        x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
    return unary_op<T>(
        x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T, typename FwdFn, typename DaFn, typename DbFn>
Var<T> binary_op(const Var<T>& a, const Var<T>& b, FwdFn fwd, DaFn dfda, DbFn dfdb,
                 const char* opname) {
    check_shape<T>(a->value.same_shape(b->value), std::string(opname) + " " +
                                                      a->value.shape_str() + " vs " +
                                                      b->value.shape_str());
    Tensor<T> out(a->value.shape);
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = fwd(a->value.data[i], b->value.data[i]);
    auto result = make_op<T>(std::move(out), {a, b}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [a, b, wr, dfda, dfdb]() {
            auto r = wr.lock();
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < a->grad.data.size(); ++i)
                    a->grad.data[i] +=
                        r->grad.data[i] * dfda(a->value.data[i], b->value.data[i]);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < b->grad.data.size(); ++i)
                    b->grad.data[i] +=
                        r->grad.data[i] * dfdb(a->value.data[i], b->value.data[i]);
            }
        };
    }
    return result;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    return binary_op<T>(
        a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
        [](T, T) { return T(1); }, "add");
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    return binary_op<T>(
        a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
        [](T, T) { return T(-1); }, "sub");
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    return binary_op<T>(
        a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
        [](T x, T) { return x; }, "mul");
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

template <typename T>
Var<T> reshape(const Var<T>& x, std::vector<int> new_shape) {
    check_shape<T>(Tensor<T>::numel_of(new_shape) == x->value.numel(),
                   "reshape to " + Tensor<T>(new_shape).shape_str());
    Tensor<T> out;
    out.shape = std::move(new_shape);
    out.data = x->value.data;
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += r->grad.data[i];
        };
    }
    return result;
}

// Concatenate along dim 1 (channels of [N,C,H,W] or columns of [L,C]).
template <typename T>
Var<T> concat_dim1(const Var<T>& a, const Var<T>& b) {
    const auto& sa = a->value.shape;
    const auto& sb = b->value.shape;
    check_shape<T>(sa.size() == sb.size() && sa.size() >= 2, "concat rank");
    for (size_t i = 0; i < sa.size(); ++i)
        if (i != 1) check_shape<T>(sa[i] == sb[i], "concat non-dim1 extent");
    std::vector<int> os = sa;
    os[1] = sa[1] + sb[1];
    Tensor<T> out(os);
    int64_t outer = sa[0];
    int64_t inner = 1;
    for (size_t i = 2; i < sa.size(); ++i) inner *= sa[i];
    const int64_t ca = sa[1], cb = sb[1];
    for (int64_t n = 0; n < outer; ++n) {
        std::copy_n(&a->value.data[size_t(n * ca * inner)], size_t(ca * inner),
                    &out.data[size_t(n * (ca + cb) * inner)]);
        std::copy_n(&b->value.data[size_t(n * cb * inner)], size_t(cb * inner),
                    &out.data[size_t((n * (ca + cb) + ca) * inner)]);
    }
    auto result = make_op<T>(std::move(out), {a, b}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [a, b, wr, outer, inner, ca, cb]() {
            auto r = wr.lock();
            if (a->requires_grad) {
                a->ensure_grad();
                for (int64_t n = 0; n < outer; ++n)
                    for (int64_t i = 0; i < ca * inner; ++i)
                        a->grad.data[size_t(n * ca * inner + i)] +=
                            r->grad.data[size_t(n * (ca + cb) * inner + i)];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (int64_t n = 0; n < outer; ++n)
                    for (int64_t i = 0; i < cb * inner; ++i)
                        b->grad.data[size_t(n * cb * inner + i)] +=
                            r->grad.data[size_t((n * (ca + cb) + ca) * inner + i)];
            }
        };
    }
    return result;
}

// Slice [start, start+len) along dim 1.
template <typename T>
Var<T> slice_dim1(const Var<T>& x, int start, int len) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() >= 2 && start >= 0 && start + len <= s[1], "slice_dim1");
    std::vector<int> os = s;
    os[1] = len;
    Tensor<T> out(os);
    int64_t outer = s[0];
    int64_t inner = 1;
    for (size_t i = 2; i < s.size(); ++i) inner *= s[i];
    const int64_t c = s[1];
    for (int64_t n = 0; n < outer; ++n)
        std::copy_n(&x->value.data[size_t((n * c + start) * inner)], size_t(len * inner),
                    &out.data[size_t(n * len * inner)]);
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr, outer, inner, c, start, len]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (int64_t n = 0; n < outer; ++n)
                for (int64_t i = 0; i < len * inner; ++i)
                    x->grad.data[size_t((n * c + start) * inner + i)] +=
                        r->grad.data[size_t(n * len * inner + i)];
        };
    }
    return result;
}

// [1,C,H,W] -> [H*W, C] token matrix.
template <typename T>
Var<T> nchw_to_tokens(const Var<T>& x) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 4 && s[0] == 1, "nchw_to_tokens expects [1,C,H,W]");
    const int C = s[1], H = s[2], W = s[3];
    Tensor<T> out({H * W, C});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H * W; ++i)
            out.data[size_t(i) * C + c] = x->value.data[size_t(c) * H * W + i];
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr, C, H, W]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < H * W; ++i)
                    x->grad.data[size_t(c) * H * W + i] +=
                        r->grad.data[size_t(i) * C + c];
        };
    }
    return result;
}

// [H*W, C] -> [1,C,H,W].
template <typename T>
Var<T> tokens_to_nchw(const Var<T>& x, int H, int W) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 2 && s[0] == H * W, "tokens_to_nchw");
    const int C = s[1];
    Tensor<T> out({1, C, H, W});
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < H * W; ++i)
            out.data[size_t(c) * H * W + i] = x->value.data[size_t(i) * C + c];
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr, C, H, W]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (int c = 0; c < C; ++c)
                for (int i = 0; i < H * W; ++i)
                    x->grad.data[size_t(i) * C + c] +=
                        r->grad.data[size_t(c) * H * W + i];
        };
    }
    return result;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul_raw(const Tensor<T>& a, bool ta, const Tensor<T>& b, bool tb) {
    const int am = a.shape[0], an = a.shape[1];
    const int bm = b.shape[0], bn = b.shape[1];
    const int M = ta ? an : am, K = ta ? am : an;
    const int Kb = tb ? bn : bm, N = tb ? bm : bn;
    check_shape<T>(K == Kb, "matmul inner dims");
    Tensor<T> out({M, N});
    Eigen::Map<const MatRM<T>> A(a.data.data(), am, an);
    Eigen::Map<const MatRM<T>> B(b.data.data(), bm, bn);
    Eigen::Map<MatRM<T>> C(out.data.data(), M, N);
    if (!ta && !tb) C.noalias() = A * B;
    if (ta && !tb) C.noalias() = A.transpose() * B;
    if (!ta && tb) C.noalias() = A * B.transpose();
    if (ta && tb) C.noalias() = A.transpose() * B.transpose();
    return out;
}

template <typename T>
void matmul_acc_raw(Tensor<T>& acc, const Tensor<T>& a, bool ta, const Tensor<T>& b,
                    bool tb) {
    Tensor<T> p = matmul_raw(a, ta, b, tb);
    check_shape<T>(acc.same_shape(p), "matmul accumulate");
    for (size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += p.data[i];
}

// C = op_a(A) * op_b(B) for 2-D inputs.
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b, bool ta = false, bool tb = false) {
    check_shape<T>(a->value.ndim() == 2 && b->value.ndim() == 2, "matmul rank");
    auto result = make_op<T>(matmul_raw(a->value, ta, b->value, tb), {a, b}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [a, b, ta, tb, wr]() {
            auto r = wr.lock();
            // C = P*Q with P = op_a(A), Q = op_b(B): dP = dC*Q^T, dQ = P^T*dC.
            if (a->requires_grad) {
                a->ensure_grad();
                if (!ta)
                    matmul_acc_raw(a->grad, r->grad, false, b->value, !tb);
                else
                    matmul_acc_raw(a->grad, b->value, tb, r->grad, true);
            }
            if (b->requires_grad) {
                b->ensure_grad();
                if (!tb)
                    matmul_acc_raw(b->grad, a->value, !ta, r->grad, false);
                else
                    matmul_acc_raw(b->grad, r->grad, true, a->value, ta);
            }
        };
    }
    return result;
}

// x[L,C] + v[1,C] broadcast over rows.
template <typename T>
Var<T> add_rowvec(const Var<T>& x, const Var<T>& v) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 2 && v->value.ndim() == 2 && v->value.shape[0] == 1 &&
                       v->value.shape[1] == s[1],
                   "add_rowvec");
    Tensor<T> out(s);
    const int L = s[0], C = s[1];
    for (int i = 0; i < L; ++i)
        for (int c = 0; c < C; ++c)
            out.data[size_t(i) * C + c] =
                x->value.data[size_t(i) * C + c] + v->value.data[size_t(c)];
    auto result = make_op<T>(std::move(out), {x, v}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, v, wr, L, C]() {
            auto r = wr.lock();
            if (x->requires_grad) {
                x->ensure_grad();
                for (size_t i = 0; i < x->grad.data.size(); ++i)
                    x->grad.data[i] += r->grad.data[i];
            }
            if (v->requires_grad) {
                v->ensure_grad();
                for (int i = 0; i < L; ++i)
                    for (int c = 0; c < C; ++c)
                        v->grad.data[size_t(c)] += r->grad.data[size_t(i) * C + c];
            }
        };
    }
    return result;
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b = nullptr) {
    Var<T> y = matmul(x, w);
    if (b) y = add_rowvec(y, b);
    return y;
}

// Per-row sum: [L,C] -> [1,C].
template <typename T>
Var<T> sum_rows(const Var<T>& x) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 2, "sum_rows rank");
    const int L = s[0], C = s[1];
    Tensor<T> out({1, C});
    for (int c = 0; c < C; ++c) {
        double acc = 0;
        for (int i = 0; i < L; ++i) acc += double(x->value.data[size_t(i) * C + c]);
        out.data[size_t(c)] = T(acc);
    }
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr, L, C]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (int i = 0; i < L; ++i)
                for (int c = 0; c < C; ++c)
                    x->grad.data[size_t(i) * C + c] += r->grad.data[size_t(c)];
        };
    }
    return result;
}

// y[l,j] = x[l,j] / (d[l,0] + eps).
template <typename T>
Var<T> div_colvec(const Var<T>& x, const Var<T>& d, T eps) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 2 && d->value.ndim() == 2 && d->value.shape[0] == s[0] &&
                       d->value.shape[1] == 1,
                   "div_colvec");
    const int L = s[0], C = s[1];
    Tensor<T> out(s);
    for (int i = 0; i < L; ++i) {
        T den = d->value.data[size_t(i)] + eps;
        for (int c = 0; c < C; ++c)
            out.data[size_t(i) * C + c] = x->value.data[size_t(i) * C + c] / den;
    }
    auto result = make_op<T>(std::move(out), {x, d}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, d, wr, L, C, eps]() {
            auto r = wr.lock();
            for (int i = 0; i < L; ++i) {
                T den = d->value.data[size_t(i)] + eps;
                if (x->requires_grad) {
                    x->ensure_grad();
                    for (int c = 0; c < C; ++c)
                        x->grad.data[size_t(i) * C + c] +=
                            r->grad.data[size_t(i) * C + c] / den;
                }
                if (d->requires_grad) {
                    d->ensure_grad();
                    double acc = 0;
                    for (int c = 0; c < C; ++c)
                        acc += double(r->grad.data[size_t(i) * C + c]) *
                               double(x->value.data[size_t(i) * C + c]);
                    d->grad.data[size_t(i)] += T(-acc / (double(den) * double(den)));
                }
            }
        };
    }
    return result;
}

// LayerNorm over the last dim of [L,C] with affine gamma/beta [1,C].
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                  T eps = T(1e-5)) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 2, "layer_norm rank");
    const int L = s[0], C = s[1];
    check_shape<T>(gamma->value.numel() == C && beta->value.numel() == C,
                   "layer_norm affine dims");
    Tensor<T> out(s);
    Tensor<T> xhat(s);
    std::vector<T> inv_sigma(static_cast<size_t>(L));
    for (int i = 0; i < L; ++i) {
        double mean = 0;
        for (int c = 0; c < C; ++c) mean += double(x->value.data[size_t(i) * C + c]);
        mean /= C;
        double var = 0;
        for (int c = 0; c < C; ++c) {
            double d = double(x->value.data[size_t(i) * C + c]) - mean;
            var += d * d;
        }
        var /= C;
        T is = T(1.0 / std::sqrt(var + double(eps)));
        inv_sigma[size_t(i)] = is;
        for (int c = 0; c < C; ++c) {
            T xh = (x->value.data[size_t(i) * C + c] - T(mean)) * is;
            xhat.data[size_t(i) * C + c] = xh;
            out.data[size_t(i) * C + c] =
                gamma->value.data[size_t(c)] * xh + beta->value.data[size_t(c)];
        }
    }
    auto result = make_op<T>(std::move(out), {x, gamma, beta}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        auto xhat_p = std::make_shared<Tensor<T>>(std::move(xhat));
        auto is_p = std::make_shared<std::vector<T>>(std::move(inv_sigma));
        result->backprop = [x, gamma, beta, wr, xhat_p, is_p, L, C]() {
            auto r = wr.lock();
            if (gamma->requires_grad) {
                gamma->ensure_grad();
                for (int i = 0; i < L; ++i)
                    for (int c = 0; c < C; ++c)
                        gamma->grad.data[size_t(c)] += r->grad.data[size_t(i) * C + c] *
                                                       xhat_p->data[size_t(i) * C + c];
            }
            if (beta->requires_grad) {
                beta->ensure_grad();
                for (int i = 0; i < L; ++i)
                    for (int c = 0; c < C; ++c)
                        beta->grad.data[size_t(c)] += r->grad.data[size_t(i) * C + c];
            }
            if (x->requires_grad) {
                x->ensure_grad();
                for (int i = 0; i < L; ++i) {
                    double mean_g = 0, mean_gx = 0;
                    for (int c = 0; c < C; ++c) {
                        double g = double(r->grad.data[size_t(i) * C + c]) *
                                   double(gamma->value.data[size_t(c)]);
                        mean_g += g;
                        mean_gx += g * double(xhat_p->data[size_t(i) * C + c]);
                    }
                    mean_g /= C;
                    mean_gx /= C;
                    for (int c = 0; c < C; ++c) {
                        double g = double(r->grad.data[size_t(i) * C + c]) *
                                   double(gamma->value.data[size_t(c)]);
                        x->grad.data[size_t(i) * C + c] +=
                            T(double(is_p->at(size_t(i))) *
                              (g - mean_g -
                               double(xhat_p->data[size_t(i) * C + c]) * mean_gx));
                    }
                }
            }
        };
    }
    return result;
}

// Softmax over dim 0 of [D,P] (each column normalizes independently).
template <typename T>
Var<T> softmax_dim0(const Var<T>& x) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 2, "softmax_dim0 rank");
    const int D = s[0], P = s[1];
    Tensor<T> out(s);
    for (int p = 0; p < P; ++p) {
        T mx = x->value.data[size_t(p)];
        for (int d = 1; d < D; ++d)
            mx = std::max(mx, x->value.data[size_t(d) * P + p]);
        double denom = 0;
        for (int d = 0; d < D; ++d) {
            T e = std::exp(x->value.data[size_t(d) * P + p] - mx);
            out.data[size_t(d) * P + p] = e;
            denom += double(e);
        }
        for (int d = 0; d < D; ++d)
            out.data[size_t(d) * P + p] = T(double(out.data[size_t(d) * P + p]) / denom);
    }
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr, D, P]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (int p = 0; p < P; ++p) {
                double dot = 0;
                for (int d = 0; d < D; ++d)
                    dot += double(r->grad.data[size_t(d) * P + p]) *
                           double(r->value.data[size_t(d) * P + p]);
                for (int d = 0; d < D; ++d)
                    x->grad.data[size_t(d) * P + p] +=
                        T(double(r->value.data[size_t(d) * P + p]) *
                          (double(r->grad.data[size_t(d) * P + p]) - dot));
            }
        };
    }
    return result;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename T>
Var<T> sum_all(const Var<T>& x) {
    double acc = 0;
    for (T v : x->value.data) acc += double(v);
    auto result = make_op<T>(Tensor<T>::scalar(T(acc)), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr]() {
            auto r = wr.lock();
            x->ensure_grad();
            T g = r->grad.data[0];
            for (size_t i = 0; i < x->grad.data.size(); ++i) x->grad.data[i] += g;
        };
    }
    return result;
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
    return scale(sum_all(x), T(1) / T(x->value.numel()));
}

// Scalar sum of x .* w for a fixed weight tensor (masks, 1/N factors).
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const Tensor<T>& w) {
    check_shape<T>(x->value.same_shape(w), "weighted_sum");
    double acc = 0;
    for (size_t i = 0; i < w.data.size(); ++i)
        acc += double(x->value.data[i]) * double(w.data[i]);
    auto result = make_op<T>(Tensor<T>::scalar(T(acc)), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        auto wp = std::make_shared<Tensor<T>>(w);
        result->backprop = [x, wr, wp]() {
            auto r = wr.lock();
            x->ensure_grad();
            T g = r->grad.data[0];
            for (size_t i = 0; i < x->grad.data.size(); ++i)
                x->grad.data[i] += g * wp->data[i];
        };
    }
    return result;
}

// ---------------------------------------------------------------------------
// Convolutions (im2col + GEMM)
// ---------------------------------------------------------------------------

template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad,
            int Ho, int Wo, T* col) {
    // col is [C*kh*kw, Ho*Wo] column-major: one output pixel per column.
    const int R = C * kh * kw;
    for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
            T* dst = col + (size_t(oy) * Wo + ox) * R;
            for (int c = 0; c < C; ++c)
                for (int u = 0; u < kh; ++u) {
                    int iy = oy * stride - pad + u;
                    for (int v = 0; v < kw; ++v) {
                        int ix = ox * stride - pad + v;
                        *dst++ = (iy >= 0 && iy < H && ix >= 0 && ix < W)
                                     ? x[(size_t(c) * H + iy) * W + ix]
                                     : T(0);
                    }
                }
        }
}

template <typename T>
void col2im_acc(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                int Ho, int Wo, T* x) {
    const int R = C * kh * kw;
    for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
            const T* src = col + (size_t(oy) * Wo + ox) * R;
            for (int c = 0; c < C; ++c)
                for (int u = 0; u < kh; ++u) {
                    int iy = oy * stride - pad + u;
                    for (int v = 0; v < kw; ++v) {
                        int ix = ox * stride - pad + v;
                        if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                            x[(size_t(c) * H + iy) * W + ix] += *src;
                        ++src;
                    }
                }
        }
}

// x [N,C,H,W], w [O,C,kh,kw], b [O] or null.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
    const auto& xs = x->value.shape;
    const auto& ws = w->value.shape;
    check_shape<T>(xs.size() == 4 && ws.size() == 4, "conv2d rank");
    check_shape<T>(xs[1] == ws[1], "conv2d channels " + x->value.shape_str() + " vs " +
                                       w->value.shape_str());
    const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const int O = ws[0], kh = ws[2], kw = ws[3];
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    check_shape<T>(Ho > 0 && Wo > 0, "conv2d output dims");
    const int R = C * kh * kw, P = Ho * Wo;

    Tensor<T> out({N, O, Ho, Wo});
    std::vector<T> col(size_t(R) * P);
    Eigen::Map<const MatRM<T>> Wf(w->value.data.data(), O, R);
    for (int n = 0; n < N; ++n) {
        im2col(&x->value.data[size_t(n) * C * H * W], C, H, W, kh, kw, stride, pad, Ho,
               Wo, col.data());
        Eigen::Map<const MatCM<T>> Col(col.data(), R, P);
        Eigen::Map<MatRM<T>> Y(&out.data[size_t(n) * O * P], O, P);
        Y.noalias() = Wf * Col;
    }
    if (b) {
        check_shape<T>(b->value.numel() == O, "conv2d bias");
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) {
                T bias = b->value.data[size_t(o)];
                T* dst = &out.data[(size_t(n) * O + o) * P];
                for (int i = 0; i < P; ++i) dst[i] += bias;
            }
    }

    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b}
                                    : std::vector<Var<T>>{x, w};
    auto result = make_op<T>(std::move(out), parents, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, w, b, wr, N, C, H, W, O, kh, kw, stride, pad, Ho, Wo,
                            R, P]() {
            auto r = wr.lock();
            std::vector<T> col(size_t(R) * P);
            std::vector<T> dcol(size_t(R) * P);
            Eigen::Map<const MatRM<T>> Wf(w->value.data.data(), O, R);
            if (w->requires_grad) w->ensure_grad();
            if (x->requires_grad) x->ensure_grad();
            for (int n = 0; n < N; ++n) {
                Eigen::Map<const MatRM<T>> dY(&r->grad.data[size_t(n) * O * P], O, P);
                if (w->requires_grad) {
                    im2col(&x->value.data[size_t(n) * C * H * W], C, H, W, kh, kw,
                           stride, pad, Ho, Wo, col.data());
                    Eigen::Map<const MatCM<T>> Col(col.data(), R, P);
                    Eigen::Map<MatRM<T>> dW(w->grad.data.data(), O, R);
                    dW.noalias() += dY * Col.transpose();
                }
                if (x->requires_grad) {
                    Eigen::Map<MatCM<T>> dCol(dcol.data(), R, P);
                    dCol.noalias() = Wf.transpose() * dY;
                    col2im_acc(dcol.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                               &x->grad.data[size_t(n) * C * H * W]);
                }
            }
            if (b && b->requires_grad) {
                b->ensure_grad();
                for (int n = 0; n < N; ++n)
                    for (int o = 0; o < O; ++o) {
                        double acc = 0;
                        const T* g = &r->grad.data[(size_t(n) * O + o) * P];
                        for (int i = 0; i < P; ++i) acc += double(g[i]);
                        b->grad.data[size_t(o)] += T(acc);
                    }
            }
        };
    }
    return result;
}

// Transposed convolution. x [N,C,H,W], w [C,O,kh,kw], b [O] or null.
// Output is [(H-1)*stride - 2*pad + kh] x [(W-1)*stride - 2*pad + kw].
template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride,
                        int pad) {
    const auto& xs = x->value.shape;
    const auto& ws = w->value.shape;
    check_shape<T>(xs.size() == 4 && ws.size() == 4, "deconv rank");
    check_shape<T>(xs[1] == ws[0], "deconv channels");
    const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const int O = ws[1], kh = ws[2], kw = ws[3];
    const int Ho = (H - 1) * stride - 2 * pad + kh;
    const int Wo = (W - 1) * stride - 2 * pad + kw;
    check_shape<T>(Ho > 0 && Wo > 0, "deconv output dims");
    const int R = O * kh * kw, P = H * W;

    // G [R,P] = Wf^T [R,C] * Xf [C,P]; out = col2im_scatter(G) on the output
    // grid (the exact adjoint of conv2d's im2col with the same stride/pad).
    Tensor<T> out({N, O, Ho, Wo});
    std::vector<T> g(size_t(R) * P);
    Eigen::Map<const MatRM<T>> Wf(w->value.data.data(), C, R);
    for (int n = 0; n < N; ++n) {
        Eigen::Map<const MatRM<T>> Xf(&x->value.data[size_t(n) * C * P], C, P);
        Eigen::Map<MatCM<T>> G(g.data(), R, P);
        G.noalias() = Wf.transpose() * Xf;
        col2im_acc(g.data(), O, Ho, Wo, kh, kw, stride, pad, H, W,
                   &out.data[size_t(n) * O * Ho * Wo]);
    }
    if (b) {
        check_shape<T>(b->value.numel() == O, "deconv bias");
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) {
                T bias = b->value.data[size_t(o)];
                T* dst = &out.data[(size_t(n) * O + o) * Ho * Wo];
                for (int i = 0; i < Ho * Wo; ++i) dst[i] += bias;
            }
    }

    std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b}
                                    : std::vector<Var<T>>{x, w};
    auto result = make_op<T>(std::move(out), parents, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, w, b, wr, N, C, H, W, O, kh, kw, stride, pad, Ho, Wo, R,
                            P]() {
            auto r = wr.lock();
            std::vector<T> dg(size_t(R) * P);
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            for (int n = 0; n < N; ++n) {
                // dG = im2col(dOut); dX = Wf * dG; dWf += Xf * dG^T.
                im2col(&r->grad.data[size_t(n) * O * Ho * Wo], O, Ho, Wo, kh, kw,
                       stride, pad, H, W, dg.data());
                Eigen::Map<const MatCM<T>> dG(dg.data(), R, P);
                Eigen::Map<const MatRM<T>> Wf(w->value.data.data(), C, R);
                if (x->requires_grad) {
                    Eigen::Map<MatRM<T>> dX(&x->grad.data[size_t(n) * C * P], C, P);
                    dX.noalias() += Wf * dG;
                }
                if (w->requires_grad) {
                    Eigen::Map<const MatRM<T>> Xf(&x->value.data[size_t(n) * C * P], C,
                                                  P);
                    Eigen::Map<MatRM<T>> dW(w->grad.data.data(), C, R);
                    dW.noalias() += Xf * dG.transpose();
                }
            }
            if (b && b->requires_grad) {
                b->ensure_grad();
                for (int n = 0; n < N; ++n)
                    for (int o = 0; o < O; ++o) {
                        double acc = 0;
                        const T* gg = &r->grad.data[(size_t(n) * O + o) * Ho * Wo];
                        for (int i = 0; i < Ho * Wo; ++i) acc += double(gg[i]);
                        b->grad.data[size_t(o)] += T(acc);
                    }
            }
        };
    }
    return result;
}

// ---------------------------------------------------------------------------
// Spatial ops
// ---------------------------------------------------------------------------

// Bilinear upsampling by an integer factor (half-pixel centers).
template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int factor) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 4 && factor >= 1, "upsample rank/factor");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    const int Ho = H * factor, Wo = W * factor;
    Tensor<T> out({N, C, Ho, Wo});

    // Precompute the 1-D interpolation taps.
    auto taps = [factor](int odim, int idim) {
        std::vector<std::tuple<int, int, T>> t(static_cast<size_t>(odim));  // (i0, i1, frac)
        for (int o = 0; o < odim; ++o) {
            double src = (o + 0.5) / factor - 0.5;
            src = std::clamp(src, 0.0, double(idim - 1));
            int i0 = int(std::floor(src));
            int i1 = std::min(i0 + 1, idim - 1);
            t[size_t(o)] = {i0, i1, T(src - i0)};
        }
        return t;
    };
    auto ty = taps(Ho, H), tx = taps(Wo, W);

    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* src = &x->value.data[(size_t(n) * C + c) * H * W];
            T* dst = &out.data[(size_t(n) * C + c) * Ho * Wo];
            for (int oy = 0; oy < Ho; ++oy) {
                auto [y0, y1, fy] = ty[size_t(oy)];
                for (int ox = 0; ox < Wo; ++ox) {
                    auto [x0, x1, fx] = tx[size_t(ox)];
                    T v00 = src[size_t(y0) * W + x0], v01 = src[size_t(y0) * W + x1];
                    T v10 = src[size_t(y1) * W + x0], v11 = src[size_t(y1) * W + x1];
                    dst[size_t(oy) * Wo + ox] = (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) +
                                                fy * ((T(1) - fx) * v10 + fx * v11);
                }
            }
        }
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [x, wr, N, C, H, W, Ho, Wo, ty, tx]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    T* dx = &x->grad.data[(size_t(n) * C + c) * H * W];
                    const T* g = &r->grad.data[(size_t(n) * C + c) * Ho * Wo];
                    for (int oy = 0; oy < Ho; ++oy) {
                        auto [y0, y1, fy] = ty[size_t(oy)];
                        for (int ox = 0; ox < Wo; ++ox) {
                            auto [x0, x1, fx] = tx[size_t(ox)];
                            T gg = g[size_t(oy) * Wo + ox];
                            dx[size_t(y0) * W + x0] += (T(1) - fy) * (T(1) - fx) * gg;
                            dx[size_t(y0) * W + x1] += (T(1) - fy) * fx * gg;
                            dx[size_t(y1) * W + x0] += fy * (T(1) - fx) * gg;
                            dx[size_t(y1) * W + x1] += fy * fx * gg;
                        }
                    }
                }
        };
    }
    return result;
}

// L2 normalization over channels of [N,C,H,W].
template <typename T>
Var<T> l2norm_channels(const Var<T>& x, T eps = T(1e-8)) {
    const auto& s = x->value.shape;
    check_shape<T>(s.size() == 4, "l2norm rank");
    const int N = s[0], C = s[1], HW = s[2] * s[3];
    Tensor<T> out(s);
    Tensor<T> inv({N, 1, s[2], s[3]});
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < HW; ++i) {
            double ss = 0;
            for (int c = 0; c < C; ++c) {
                double v = double(x->value.data[(size_t(n) * C + c) * HW + i]);
                ss += v * v;
            }
            T is = T(1.0 / std::sqrt(ss + double(eps)));
            inv.data[size_t(n) * HW + i] = is;
            for (int c = 0; c < C; ++c)
                out.data[(size_t(n) * C + c) * HW + i] =
                    x->value.data[(size_t(n) * C + c) * HW + i] * is;
        }
    auto result = make_op<T>(std::move(out), {x}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        auto inv_p = std::make_shared<Tensor<T>>(std::move(inv));
        result->backprop = [x, wr, inv_p, N, C, HW]() {
            auto r = wr.lock();
            x->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int i = 0; i < HW; ++i) {
                    T is = inv_p->data[size_t(n) * HW + i];
                    double dot = 0;
                    for (int c = 0; c < C; ++c)
                        dot += double(r->grad.data[(size_t(n) * C + c) * HW + i]) *
                               double(x->value.data[(size_t(n) * C + c) * HW + i]);
                    for (int c = 0; c < C; ++c) {
                        double g = double(r->grad.data[(size_t(n) * C + c) * HW + i]);
                        double xv = double(x->value.data[(size_t(n) * C + c) * HW + i]);
                        x->grad.data[(size_t(n) * C + c) * HW + i] +=
                            T(double(is) * g - double(is) * double(is) * double(is) * xv * dot);
                    }
                }
        };
    }
    return result;
}

// Correlation volume: scores[n,k,y,x] = sum_c fl[n,c,y,x] * fr[n,c,y,x-k],
// zero where x-k falls outside. Candidate count = d4.
template <typename T>
Var<T> corr_volume(const Var<T>& fl, const Var<T>& fr, int d4) {
    const auto& s = fl->value.shape;
    check_shape<T>(s.size() == 4 && fl->value.same_shape(fr->value),
                   "corr_volume inputs " + fl->value.shape_str() + " vs " +
                       fr->value.shape_str());
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    check_shape<T>(d4 >= 1 && d4 <= W, "corr_volume candidates exceed width");
    Tensor<T> out({N, d4, H, W});
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < d4; ++k)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    if (x - k < 0) continue;
                    double acc = 0;
                    for (int c = 0; c < C; ++c)
                        acc += double(fl->value.data[((size_t(n) * C + c) * H + y) * W + x]) *
                               double(fr->value.data[((size_t(n) * C + c) * H + y) * W + x - k]);
                    out.data[((size_t(n) * d4 + k) * H + y) * W + x] = T(acc);
                }
    auto result = make_op<T>(std::move(out), {fl, fr}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [fl, fr, wr, N, C, H, W, d4]() {
            auto r = wr.lock();
            if (fl->requires_grad) fl->ensure_grad();
            if (fr->requires_grad) fr->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int k = 0; k < d4; ++k)
                    for (int y = 0; y < H; ++y)
                        for (int x = k; x < W; ++x) {
                            T g = r->grad.data[((size_t(n) * d4 + k) * H + y) * W + x];
                            if (g == T(0)) continue;
                            for (int c = 0; c < C; ++c) {
                                size_t il = ((size_t(n) * C + c) * H + y) * W + x;
                                size_t ir = il - size_t(k);
                                if (fl->requires_grad)
                                    fl->grad.data[il] += g * fr->value.data[ir];
                                if (fr->requires_grad)
                                    fr->grad.data[ir] += g * fl->value.data[il];
                            }
                        }
        };
    }
    return result;
}

// Samples (2*radius+1) cost slices around the current disparity with linear
// interpolation along the candidate axis. `disp` holds full-resolution pixels
// (candidate k corresponds to 4k px) and is treated as a constant index map;
// gradients flow into the volume only.
template <typename T>
Var<T> lookup_volume(const Var<T>& vol, const Var<T>& disp, int radius) {
    const auto& vs = vol->value.shape;
    const auto& ds = disp->value.shape;
    check_shape<T>(vs.size() == 4 && ds.size() == 4 && ds[1] == 1 && ds[2] == vs[2] &&
                       ds[3] == vs[3],
                   "lookup_volume shapes");
    const int N = vs[0], D4 = vs[1], H = vs[2], W = vs[3];
    const int taps = 2 * radius + 1;
    Tensor<T> out({N, taps, H, W});
    for (int n = 0; n < N; ++n)
        for (int j = 0; j < taps; ++j)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    T pos = disp->value.data[(size_t(n) * H + y) * W + x] / T(4) +
                            T(j - radius);
                    int k0 = int(std::floor(double(pos)));
                    T a = pos - T(k0);
                    T v = T(0);
                    if (k0 >= 0 && k0 < D4)
                        v += (T(1) - a) * vol->value.data[((size_t(n) * D4 + k0) * H + y) * W + x];
                    if (k0 + 1 >= 0 && k0 + 1 < D4)
                        v += a * vol->value.data[((size_t(n) * D4 + k0 + 1) * H + y) * W + x];
                    out.data[((size_t(n) * taps + j) * H + y) * W + x] = v;
                }
    auto result = make_op<T>(std::move(out), {vol}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        result->backprop = [vol, disp, wr, N, D4, H, W, taps, radius]() {
            auto r = wr.lock();
            vol->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int j = 0; j < taps; ++j)
                    for (int y = 0; y < H; ++y)
                        for (int x = 0; x < W; ++x) {
                            T g = r->grad.data[((size_t(n) * taps + j) * H + y) * W + x];
                            if (g == T(0)) continue;
                            T pos = disp->value.data[(size_t(n) * H + y) * W + x] / T(4) +
                                    T(j - radius);
                            int k0 = int(std::floor(double(pos)));
                            T a = pos - T(k0);
                            if (k0 >= 0 && k0 < D4)
                                vol->grad.data[((size_t(n) * D4 + k0) * H + y) * W + x] +=
                                    (T(1) - a) * g;
                            if (k0 + 1 >= 0 && k0 + 1 < D4)
                                vol->grad.data[((size_t(n) * D4 + k0 + 1) * H + y) * W + x] +=
                                    a * g;
                        }
        };
    }
    return result;
}

// Feature masking: y = f*(1-w) + m*w with a binary spatial mask w [H,W]
// (constant) and a learned per-channel token m [C].
template <typename T>
Var<T> mask_mix(const Var<T>& f, const Var<T>& m, const Tensor<T>& w) {
    const auto& s = f->value.shape;
    check_shape<T>(s.size() == 4, "mask_mix rank");
    const int N = s[0], C = s[1], H = s[2], W = s[3];
    check_shape<T>(int(w.shape.size()) == 2 && w.shape[0] == H && w.shape[1] == W,
                   "mask_mix mask dims");
    check_shape<T>(m->value.numel() == C, "mask_mix token dims");
    Tensor<T> out(s);
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H * W; ++i) {
                T wv = w.data[size_t(i)];
                out.data[(size_t(n) * C + c) * H * W + i] =
                    f->value.data[(size_t(n) * C + c) * H * W + i] * (T(1) - wv) +
                    m->value.data[size_t(c)] * wv;
            }
    auto result = make_op<T>(std::move(out), {f, m}, nullptr);
    if (result->requires_grad) {
        std::weak_ptr<Node<T>> wr = result;
        auto wp = std::make_shared<Tensor<T>>(w);
        result->backprop = [f, m, wr, wp, N, C, H, W]() {
            auto r = wr.lock();
            if (f->requires_grad) f->ensure_grad();
            if (m->requires_grad) m->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c)
                    for (int i = 0; i < H * W; ++i) {
                        T wv = wp->data[size_t(i)];
                        T g = r->grad.data[(size_t(n) * C + c) * H * W + i];
                        if (f->requires_grad)
                            f->grad.data[(size_t(n) * C + c) * H * W + i] +=
                                g * (T(1) - wv);
                        if (m->requires_grad) m->grad.data[size_t(c)] += g * wv;
                    }
        };
    }
    return result;
}

}  // namespace seastereo::nn
