#ifndef POSEVID_TENSOR_HPP
#define POSEVID_TENSOR_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace posevid {

inline void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw std::invalid_argument(msg);
    }
}

inline int64_t numel_of(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        n *= d;
    }
    return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        os << shape[i] << (i + 1 < shape.size() ? "," : "");
    }
    os << "]";
    return os.str();
}

// Dense N-d array with an optional gradient buffer. Data is contiguous,
// row-major in the given shape. The scalar type is a template parameter so
// numeric tests can run the same code in double precision.
template <typename S>
struct TensorT {
    using Array = Eigen::Array<S, Eigen::Dynamic, 1>;

    std::vector<int> shape;
    Array value;
    Array grad;  // empty until a backward pass touches this tensor
    bool requires_grad = false;

    int64_t size() const { return value.size(); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    void ensure_grad() {
        if (grad.size() != value.size()) {
            grad = Array::Zero(value.size());
        }
    }
    void zero_grad() {
        if (grad.size() > 0) {
            grad.setZero();
        }
    }
};

template <typename S>
using TensorPtr = std::shared_ptr<TensorT<S>>;

template <typename S>
TensorPtr<S> make_tensor(std::vector<int> shape) {
    auto t = std::make_shared<TensorT<S>>();
    t->shape = std::move(shape);
    t->value = TensorT<S>::Array::Zero(numel_of(t->shape));
    return t;
}

template <typename S>
TensorPtr<S> make_full(std::vector<int> shape, S v) {
    auto t = make_tensor<S>(std::move(shape));
    t->value.setConstant(v);
    return t;
}

// Records backward closures in forward order and replays them in reverse.
// Ops recorded on a null tape (or whose output needs no gradient) run
// forward-only, which is how inference and frozen submodels skip backward
// work entirely.
template <typename S>
class TapeT {
public:
    void record(std::function<void()> f) { ops_.push_back(std::move(f)); }

    void backward(const TensorPtr<S>& root) {
        require(root->size() == 1, "backward: root must be a scalar tensor");
        root->ensure_grad();
        root->grad.setConstant(S(1));
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
            (*it)();
        }
    }

    void clear() { ops_.clear(); }
    size_t size() const { return ops_.size(); }

private:
    std::vector<std::function<void()>> ops_;
};

// Collects softmax row-sum deviations from every attention evaluation while
// installed; used to check row-stochasticity through full forward passes.
struct AttnProbe {
    double max_row_dev = 0.0;
    int64_t rows_seen = 0;
    void note(double dev, int64_t rows) {
        if (dev > max_row_dev) max_row_dev = dev;
        rows_seen += rows;
    }
};

namespace detail {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<MatRM<S>>;
template <typename S>
using CMapRM = Eigen::Map<const MatRM<S>>;

template <typename S>
bool want_grad(const TapeT<S>* tape, std::initializer_list<const TensorPtr<S>*> ins) {
    if (tape == nullptr) return false;
    for (const auto* p : ins) {
        if (*p && (*p)->requires_grad) return true;
    }
    return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

template <typename S>
TensorPtr<S> add(TapeT<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
    require(a->shape == b->shape, "add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto y = make_tensor<S>(a->shape);
    y->value = a->value + b->value;
    if (detail::want_grad<S>(tape, {&a, &b})) {
        y->requires_grad = true;
        tape->record([a, b, y]() {
            if (a->requires_grad) { a->ensure_grad(); a->grad += y->grad; }
            if (b->requires_grad) { b->ensure_grad(); b->grad += y->grad; }
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> sub(TapeT<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
    require(a->shape == b->shape, "sub: shape mismatch");
    auto y = make_tensor<S>(a->shape);
    y->value = a->value - b->value;
    if (detail::want_grad<S>(tape, {&a, &b})) {
        y->requires_grad = true;
        tape->record([a, b, y]() {
            if (a->requires_grad) { a->ensure_grad(); a->grad += y->grad; }
            if (b->requires_grad) { b->ensure_grad(); b->grad -= y->grad; }
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> mul(TapeT<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
    require(a->shape == b->shape, "mul: shape mismatch");
    auto y = make_tensor<S>(a->shape);
    y->value = a->value * b->value;
    if (detail::want_grad<S>(tape, {&a, &b})) {
        y->requires_grad = true;
        tape->record([a, b, y]() {
            if (a->requires_grad) { a->ensure_grad(); a->grad += y->grad * b->value; }
            if (b->requires_grad) { b->ensure_grad(); b->grad += y->grad * a->value; }
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> scale(TapeT<S>* tape, const TensorPtr<S>& a, S s) {
    auto y = make_tensor<S>(a->shape);
    y->value = a->value * s;
    if (detail::want_grad<S>(tape, {&a})) {
        y->requires_grad = true;
        tape->record([a, y, s]() {
            a->ensure_grad();
            a->grad += y->grad * s;
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> silu(TapeT<S>* tape, const TensorPtr<S>& x) {
    auto y = make_tensor<S>(x->shape);
    y->value = x->value / (S(1) + (-x->value).exp());
    if (detail::want_grad<S>(tape, {&x})) {
        y->requires_grad = true;
        tape->record([x, y]() {
            x->ensure_grad();
            auto sig = (S(1) / (S(1) + (-x->value).exp())).eval();
            x->grad += y->grad * sig * (S(1) + x->value * (S(1) - sig));
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> sigmoid(TapeT<S>* tape, const TensorPtr<S>& x) {
    auto y = make_tensor<S>(x->shape);
    y->value = S(1) / (S(1) + (-x->value).exp());
    if (detail::want_grad<S>(tape, {&x})) {
        y->requires_grad = true;
        tape->record([x, y]() {
            x->ensure_grad();
            x->grad += y->grad * y->value * (S(1) - y->value);
        });
    }
    return y;
}

// Per-channel bias broadcast over [N,C,H,W]; v has shape [1,C] or [C].
template <typename S>
TensorPtr<S> add_channel_vec(TapeT<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& v) {
    require(x->shape.size() == 4, "add_channel_vec: x must be [N,C,H,W]");
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    require(v->size() == C, "add_channel_vec: channel count mismatch");
    auto y = make_tensor<S>(x->shape);
    const int64_t hw = int64_t(H) * W;
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            y->value.segment((int64_t(n) * C + c) * hw, hw) =
                x->value.segment((int64_t(n) * C + c) * hw, hw) + v->value[c];
        }
    }
    if (detail::want_grad<S>(tape, {&x, &v})) {
        y->requires_grad = true;
        tape->record([x, v, y, N, C, hw]() {
            if (x->requires_grad) { x->ensure_grad(); x->grad += y->grad; }
            if (v->requires_grad) {
                v->ensure_grad();
                for (int n = 0; n < N; ++n) {
                    for (int c = 0; c < C; ++c) {
                        v->grad[c] += y->grad.segment((int64_t(n) * C + c) * hw, hw).sum();
                    }
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename S>
TensorPtr<S> mean_all(TapeT<S>* tape, const TensorPtr<S>& x) {
    auto y = make_tensor<S>({1});
    y->value[0] = x->value.mean();
    if (detail::want_grad<S>(tape, {&x})) {
        y->requires_grad = true;
        tape->record([x, y]() {
            x->ensure_grad();
            x->grad += y->grad[0] / S(x->size());
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> mse(TapeT<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
    require(a->shape == b->shape, "mse: shape mismatch");
    auto y = make_tensor<S>({1});
    y->value[0] = (a->value - b->value).square().mean();
    if (detail::want_grad<S>(tape, {&a, &b})) {
        y->requires_grad = true;
        tape->record([a, b, y]() {
            auto d = ((a->value - b->value) * (S(2) / S(a->size())) * y->grad[0]).eval();
            if (a->requires_grad) { a->ensure_grad(); a->grad += d; }
            if (b->requires_grad) { b->ensure_grad(); b->grad -= d; }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

// x:[N,Cin] w:[Cout,Cin] b:[Cout] or null -> [N,Cout]
template <typename S>
TensorPtr<S> linear(TapeT<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& w,
                    const TensorPtr<S>& b) {
    require(x->shape.size() == 2 && w->shape.size() == 2, "linear: rank mismatch");
    const int N = x->dim(0), Cin = x->dim(1), Cout = w->dim(0);
    require(w->dim(1) == Cin, "linear: weight shape mismatch");
    auto y = make_tensor<S>({N, Cout});
    detail::CMapRM<S> xm(x->value.data(), N, Cin);
    detail::CMapRM<S> wm(w->value.data(), Cout, Cin);
    detail::MapRM<S> ym(y->value.data(), N, Cout);
    ym.noalias() = xm * wm.transpose();
    if (b) {
        require(b->size() == Cout, "linear: bias shape mismatch");
        ym.rowwise() += Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(b->value.data(), Cout);
    }
    if (detail::want_grad<S>(tape, {&x, &w, &b})) {
        y->requires_grad = true;
        tape->record([x, w, b, y, N, Cin, Cout]() {
            detail::CMapRM<S> gy(y->grad.data(), N, Cout);
            if (x->requires_grad) {
                x->ensure_grad();
                detail::MapRM<S> gx(x->grad.data(), N, Cin);
                detail::CMapRM<S> wm(w->value.data(), Cout, Cin);
                gx.noalias() += gy * wm;
            }
            if (w->requires_grad) {
                w->ensure_grad();
                detail::MapRM<S> gw(w->grad.data(), Cout, Cin);
                detail::CMapRM<S> xm(x->value.data(), N, Cin);
                gw.noalias() += gy.transpose() * xm;
            }
            if (b && b->requires_grad) {
                b->ensure_grad();
                Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(b->grad.data(), Cout) +=
                    gy.colwise().sum();
            }
        });
    }
    return y;
}

// a:[N,K] x b:[K,M] -> [N,M]; optional transposes apply to the stored layout.
template <typename S>
TensorPtr<S> matmul(TapeT<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b,
                    bool trans_a = false, bool trans_b = false) {
    require(a->shape.size() == 2 && b->shape.size() == 2, "matmul: rank mismatch");
    const int ar = a->dim(0), ac = a->dim(1), br = b->dim(0), bc = b->dim(1);
    const int N = trans_a ? ac : ar;
    const int K = trans_a ? ar : ac;
    const int Kb = trans_b ? bc : br;
    const int M = trans_b ? br : bc;
    require(K == Kb, "matmul: inner dimension mismatch");
    auto y = make_tensor<S>({N, M});
    detail::CMapRM<S> am(a->value.data(), ar, ac);
    detail::CMapRM<S> bm(b->value.data(), br, bc);
    detail::MapRM<S> ym(y->value.data(), N, M);
    if (!trans_a && !trans_b) ym.noalias() = am * bm;
    else if (!trans_a && trans_b) ym.noalias() = am * bm.transpose();
    else if (trans_a && !trans_b) ym.noalias() = am.transpose() * bm;
    else ym.noalias() = am.transpose() * bm.transpose();
    if (detail::want_grad<S>(tape, {&a, &b})) {
        y->requires_grad = true;
        tape->record([a, b, y, ar, ac, br, bc, N, M, trans_a, trans_b]() {
            detail::CMapRM<S> gy(y->grad.data(), N, M);
            detail::CMapRM<S> am(a->value.data(), ar, ac);
            detail::CMapRM<S> bm(b->value.data(), br, bc);
            if (a->requires_grad) {
                a->ensure_grad();
                detail::MapRM<S> ga(a->grad.data(), ar, ac);
                if (!trans_a && !trans_b) ga.noalias() += gy * bm.transpose();
                else if (!trans_a && trans_b) ga.noalias() += gy * bm;
                else if (trans_a && !trans_b) ga.noalias() += bm * gy.transpose();
                else ga.noalias() += bm.transpose() * gy.transpose();
            }
            if (b->requires_grad) {
                b->ensure_grad();
                detail::MapRM<S> gb(b->grad.data(), br, bc);
                if (!trans_a && !trans_b) gb.noalias() += am.transpose() * gy;
                else if (!trans_a && trans_b) gb.noalias() += gy.transpose() * am;
                else if (trans_a && !trans_b) gb.noalias() += am * gy;
                else gb.noalias() += gy.transpose() * am.transpose();
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// softmax
// ---------------------------------------------------------------------------

template <typename S>
TensorPtr<S> softmax_rows(TapeT<S>* tape, const TensorPtr<S>& x, AttnProbe* probe = nullptr) {
    require(x->shape.size() == 2, "softmax_rows: expects [R,C]");
    const int R = x->dim(0), C = x->dim(1);
    auto y = make_tensor<S>(x->shape);
    detail::CMapRM<S> xm(x->value.data(), R, C);
    detail::MapRM<S> ym(y->value.data(), R, C);
    for (int r = 0; r < R; ++r) {
        S mx = xm.row(r).maxCoeff();
        ym.row(r) = (xm.row(r).array() - mx).exp().matrix();
        ym.row(r) /= ym.row(r).sum();
    }
    if (probe) {
        double dev = 0.0;
        for (int r = 0; r < R; ++r) {
            dev = std::max(dev, std::abs(double(ym.row(r).sum()) - 1.0));
        }
        probe->note(dev, R);
    }
    if (detail::want_grad<S>(tape, {&x})) {
        y->requires_grad = true;
        tape->record([x, y, R, C]() {
            x->ensure_grad();
            detail::CMapRM<S> ym(y->value.data(), R, C);
            detail::CMapRM<S> gy(y->grad.data(), R, C);
            detail::MapRM<S> gx(x->grad.data(), R, C);
            for (int r = 0; r < R; ++r) {
                S dot = ym.row(r).dot(gy.row(r));
                gx.row(r).array() += ym.row(r).array() * (gy.row(r).array() - dot);
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

// GroupNorm over [N,C,H,W] with per-channel affine.
template <typename S>
TensorPtr<S> group_norm(TapeT<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                        const TensorPtr<S>& beta, int groups, S eps = S(1e-5)) {
    require(x->shape.size() == 4, "group_norm: expects [N,C,H,W]");
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    require(C % groups == 0, "group_norm: channels not divisible by groups");
    require(gamma->size() == C && beta->size() == C, "group_norm: affine shape mismatch");
    const int cg = C / groups;
    const int64_t hw = int64_t(H) * W;
    const int64_t gsz = cg * hw;
    auto y = make_tensor<S>(x->shape);
    auto xhat = std::make_shared<typename TensorT<S>::Array>(x->size());
    auto istd = std::make_shared<typename TensorT<S>::Array>(int64_t(N) * groups);
    for (int n = 0; n < N; ++n) {
        for (int g = 0; g < groups; ++g) {
            const int64_t off = (int64_t(n) * C + int64_t(g) * cg) * hw;
            auto seg = x->value.segment(off, gsz);
            S mu = seg.mean();
            S var = (seg - mu).square().mean();
            S is = S(1) / std::sqrt(var + eps);
            (*istd)[int64_t(n) * groups + g] = is;
            xhat->segment(off, gsz) = (seg - mu) * is;
            for (int c = 0; c < cg; ++c) {
                const int ch = g * cg + c;
                y->value.segment(off + int64_t(c) * hw, hw) =
                    xhat->segment(off + int64_t(c) * hw, hw) * gamma->value[ch] + beta->value[ch];
            }
        }
    }
    if (detail::want_grad<S>(tape, {&x, &gamma, &beta})) {
        y->requires_grad = true;
        tape->record([x, gamma, beta, y, xhat, istd, N, C, groups, cg, hw, gsz]() {
            for (int n = 0; n < N; ++n) {
                for (int g = 0; g < groups; ++g) {
                    const int64_t off = (int64_t(n) * C + int64_t(g) * cg) * hw;
                    // dxhat = gy * gamma (channelwise)
                    typename TensorT<S>::Array dxh(gsz);
                    for (int c = 0; c < cg; ++c) {
                        const int ch = g * cg + c;
                        dxh.segment(int64_t(c) * hw, hw) =
                            y->grad.segment(off + int64_t(c) * hw, hw) * gamma->value[ch];
                        if (gamma->requires_grad) {
                            gamma->ensure_grad();
                            gamma->grad[ch] += (y->grad.segment(off + int64_t(c) * hw, hw) *
                                                xhat->segment(off + int64_t(c) * hw, hw))
                                                   .sum();
                        }
                        if (beta->requires_grad) {
                            beta->ensure_grad();
                            beta->grad[ch] += y->grad.segment(off + int64_t(c) * hw, hw).sum();
                        }
                    }
                    if (x->requires_grad) {
                        x->ensure_grad();
                        const S is = (*istd)[int64_t(n) * groups + g];
                        auto xh = xhat->segment(off, gsz);
                        const S m = S(gsz);
                        S sum_dxh = dxh.sum();
                        S sum_dxh_xh = (dxh * xh).sum();
                        x->grad.segment(off, gsz) +=
                            is * (dxh - (sum_dxh + xh * sum_dxh_xh) / m);
                    }
                }
            }
        });
    }
    return y;
}

// LayerNorm over the last dim of [R,C] rows with affine.
template <typename S>
TensorPtr<S> layer_norm(TapeT<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& gamma,
                        const TensorPtr<S>& beta, S eps = S(1e-5)) {
    require(x->shape.size() == 2, "layer_norm: expects [R,C]");
    const int R = x->dim(0), C = x->dim(1);
    require(gamma->size() == C && beta->size() == C, "layer_norm: affine shape mismatch");
    auto y = make_tensor<S>(x->shape);
    auto xhat = std::make_shared<typename TensorT<S>::Array>(x->size());
    auto istd = std::make_shared<typename TensorT<S>::Array>(R);
    for (int r = 0; r < R; ++r) {
        auto seg = x->value.segment(int64_t(r) * C, C);
        S mu = seg.mean();
        S var = (seg - mu).square().mean();
        S is = S(1) / std::sqrt(var + eps);
        (*istd)[r] = is;
        xhat->segment(int64_t(r) * C, C) = (seg - mu) * is;
        y->value.segment(int64_t(r) * C, C) =
            xhat->segment(int64_t(r) * C, C) * gamma->value + beta->value;
    }
    if (detail::want_grad<S>(tape, {&x, &gamma, &beta})) {
        y->requires_grad = true;
        tape->record([x, gamma, beta, y, xhat, istd, R, C]() {
            for (int r = 0; r < R; ++r) {
                const int64_t off = int64_t(r) * C;
                auto gy = y->grad.segment(off, C);
                auto xh = xhat->segment(off, C);
                if (gamma->requires_grad) {
                    gamma->ensure_grad();
                    gamma->grad += gy * xh;
                }
                if (beta->requires_grad) {
                    beta->ensure_grad();
                    beta->grad += gy;
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    auto dxh = (gy * gamma->value).eval();
                    const S m = S(C);
                    S sum_dxh = dxh.sum();
                    S sum_dxh_xh = (dxh * xh).sum();
                    x->grad.segment(off, C) +=
                        (*istd)[r] * (dxh - (sum_dxh + xh * sum_dxh_xh) / m);
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// convolution
// ---------------------------------------------------------------------------

namespace detail {

template <typename S>
void im2col(const S* x, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho, int Wo,
            S* col) {
    // col is [C*kh*kw, Ho*Wo] row-major
    const int64_t P = int64_t(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx) {
                S* dst = col + ((int64_t(c) * kh + dy) * kw + dx) * P;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride - pad + dy;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst + int64_t(oy) * Wo, dst + int64_t(oy + 1) * Wo, S(0));
                        continue;
                    }
                    const S* src = x + (int64_t(c) * H + iy) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride - pad + dx;
                        dst[int64_t(oy) * Wo + ox] = (ix >= 0 && ix < W) ? src[ix] : S(0);
                    }
                }
            }
        }
    }
}

template <typename S>
void col2im_add(const S* col, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
                int Wo, S* x) {
    const int64_t P = int64_t(Ho) * Wo;
    for (int c = 0; c < C; ++c) {
        for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx) {
                const S* src = col + ((int64_t(c) * kh + dy) * kw + dx) * P;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * stride - pad + dy;
                    if (iy < 0 || iy >= H) continue;
                    S* dst = x + (int64_t(c) * H + iy) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * stride - pad + dx;
                        if (ix >= 0 && ix < W) dst[ix] += src[int64_t(oy) * Wo + ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// x:[N,Cin,H,W] w:[Cout,Cin,kh,kw] b:[Cout] or null
template <typename S>
TensorPtr<S> conv2d(TapeT<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& w,
                    const TensorPtr<S>& b, int stride, int pad) {
    require(x->shape.size() == 4 && w->shape.size() == 4, "conv2d: rank mismatch");
    const int N = x->dim(0), Cin = x->dim(1), H = x->dim(2), W = x->dim(3);
    const int Cout = w->dim(0), kh = w->dim(2), kw = w->dim(3);
    require(w->dim(1) == Cin, "conv2d: channel mismatch: x " + shape_str(x->shape) + " w " + shape_str(w->shape));
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    require(Ho >= 1 && Wo >= 1, "conv2d: empty output");
    auto y = make_tensor<S>({N, Cout, Ho, Wo});
    const int K = Cin * kh * kw;
    const int64_t P = int64_t(Ho) * Wo;
    detail::CMapRM<S> wm(w->value.data(), Cout, K);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (N > 1)
#endif
    for (int n = 0; n < N; ++n) {
        std::vector<S> col(size_t(K) * P);
        detail::im2col(x->value.data() + int64_t(n) * Cin * H * W, Cin, H, W, kh, kw, stride, pad,
                       Ho, Wo, col.data());
        detail::CMapRM<S> cm(col.data(), K, P);
        detail::MapRM<S> ym(y->value.data() + int64_t(n) * Cout * P, Cout, P);
        ym.noalias() = wm * cm;
        if (b) {
            for (int co = 0; co < Cout; ++co) {
                ym.row(co).array() += b->value[co];
            }
        }
    }
    if (detail::want_grad<S>(tape, {&x, &w, &b})) {
        y->requires_grad = true;
        tape->record([x, w, b, y, N, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo, K, P]() {
            if (x->requires_grad) x->ensure_grad();
            if (w->requires_grad) w->ensure_grad();
            if (b && b->requires_grad) b->ensure_grad();
            detail::CMapRM<S> wm(w->value.data(), Cout, K);
            // dW accumulation is serialized across the batch; dX per image is
            // independent.
            std::vector<S> gw_local;
            if (w->requires_grad) gw_local.assign(size_t(Cout) * K, S(0));
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (N > 1)
#endif
            for (int n = 0; n < N; ++n) {
                detail::CMapRM<S> gym(y->grad.data() + int64_t(n) * Cout * P, Cout, P);
                std::vector<S> col(size_t(K) * P);
                detail::im2col(x->value.data() + int64_t(n) * Cin * H * W, Cin, H, W, kh, kw,
                               stride, pad, Ho, Wo, col.data());
                detail::CMapRM<S> cm(col.data(), K, P);
                if (w->requires_grad) {
                    detail::MatRM<S> gw_n = gym * cm.transpose();
#ifdef _OPENMP
#pragma omp critical(posevid_conv_gw)
#endif
                    {
                        detail::MapRM<S>(gw_local.data(), Cout, K) += gw_n;
                    }
                }
                if (x->requires_grad) {
                    detail::MatRM<S> gcol = wm.transpose() * gym;
                    detail::col2im_add(gcol.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo,
                                       x->grad.data() + int64_t(n) * Cin * H * W);
                }
            }
            if (w->requires_grad) {
                detail::MapRM<S>(w->grad.data(), Cout, K) +=
                    detail::CMapRM<S>(gw_local.data(), Cout, K);
            }
            if (b && b->requires_grad) {
                for (int n = 0; n < N; ++n) {
                    detail::CMapRM<S> gym(y->grad.data() + int64_t(n) * Cout * P, Cout, P);
                    for (int co = 0; co < Cout; ++co) {
                        b->grad[co] += gym.row(co).sum();
                    }
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// shape ops
// ---------------------------------------------------------------------------

// [N,C,H,W] -> [N*H*W, C]; row n*H*W + (h*W+w) holds the channel vector at
// that pixel. Frame n's tokens are the contiguous row block [n*HW, (n+1)*HW).
template <typename S>
TensorPtr<S> chw_to_tokens(TapeT<S>* tape, const TensorPtr<S>& x) {
    require(x->shape.size() == 4, "chw_to_tokens: expects [N,C,H,W]");
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    const int64_t hw = int64_t(H) * W;
    auto y = make_tensor<S>({int(N * hw), C});
    for (int n = 0; n < N; ++n) {
        detail::CMapRM<S> xm(x->value.data() + int64_t(n) * C * hw, C, hw);
        detail::MapRM<S> ym(y->value.data() + int64_t(n) * hw * C, hw, C);
        ym = xm.transpose();
    }
    if (detail::want_grad<S>(tape, {&x})) {
        y->requires_grad = true;
        tape->record([x, y, N, C, hw]() {
            x->ensure_grad();
            for (int n = 0; n < N; ++n) {
                detail::MapRM<S> gx(x->grad.data() + int64_t(n) * C * hw, C, hw);
                detail::CMapRM<S> gy(y->grad.data() + int64_t(n) * hw * C, hw, C);
                gx += gy.transpose();
            }
        });
    }
    return y;
}

// inverse of chw_to_tokens
template <typename S>
TensorPtr<S> tokens_to_chw(TapeT<S>* tape, const TensorPtr<S>& tok, int N, int C, int H, int W) {
    require(tok->shape.size() == 2 && tok->dim(0) == N * H * W && tok->dim(1) == C,
            "tokens_to_chw: shape mismatch");
    const int64_t hw = int64_t(H) * W;
    auto y = make_tensor<S>({N, C, H, W});
    for (int n = 0; n < N; ++n) {
        detail::CMapRM<S> tm(tok->value.data() + int64_t(n) * hw * C, hw, C);
        detail::MapRM<S> ym(y->value.data() + int64_t(n) * C * hw, C, hw);
        ym = tm.transpose();
    }
    if (detail::want_grad<S>(tape, {&tok})) {
        y->requires_grad = true;
        tape->record([tok, y, N, C, hw]() {
            tok->ensure_grad();
            for (int n = 0; n < N; ++n) {
                detail::MapRM<S> gt(tok->grad.data() + int64_t(n) * hw * C, hw, C);
                detail::CMapRM<S> gy(y->grad.data() + int64_t(n) * C * hw, C, hw);
                gt += gy.transpose();
            }
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> slice_rows(TapeT<S>* tape, const TensorPtr<S>& x, int r0, int r1) {
    require(x->shape.size() == 2 && r0 >= 0 && r1 <= x->dim(0) && r0 < r1,
            "slice_rows: bad range");
    const int C = x->dim(1);
    auto y = make_tensor<S>({r1 - r0, C});
    y->value = x->value.segment(int64_t(r0) * C, int64_t(r1 - r0) * C);
    if (detail::want_grad<S>(tape, {&x})) {
        y->requires_grad = true;
        tape->record([x, y, r0, C]() {
            x->ensure_grad();
            x->grad.segment(int64_t(r0) * C, y->size()) += y->grad;
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> concat_rows(TapeT<S>* tape, const TensorPtr<S>& a, const TensorPtr<S>& b) {
    require(a->shape.size() == 2 && b->shape.size() == 2 && a->dim(1) == b->dim(1),
            "concat_rows: column mismatch");
    auto y = make_tensor<S>({a->dim(0) + b->dim(0), a->dim(1)});
    y->value.segment(0, a->size()) = a->value;
    y->value.segment(a->size(), b->size()) = b->value;
    if (detail::want_grad<S>(tape, {&a, &b})) {
        y->requires_grad = true;
        tape->record([a, b, y]() {
            if (a->requires_grad) { a->ensure_grad(); a->grad += y->grad.segment(0, a->size()); }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad += y->grad.segment(a->size(), b->size());
            }
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> concat_channels(TapeT<S>* tape, const std::vector<TensorPtr<S>>& xs) {
    require(!xs.empty(), "concat_channels: empty input");
    const int N = xs[0]->dim(0), H = xs[0]->dim(2), W = xs[0]->dim(3);
    int Ctot = 0;
    for (const auto& x : xs) {
        require(x->shape.size() == 4 && x->dim(0) == N && x->dim(2) == H && x->dim(3) == W,
                "concat_channels: shape mismatch");
        Ctot += x->dim(1);
    }
    auto y = make_tensor<S>({N, Ctot, H, W});
    const int64_t hw = int64_t(H) * W;
    for (int n = 0; n < N; ++n) {
        int64_t coff = 0;
        for (const auto& x : xs) {
            const int64_t sz = int64_t(x->dim(1)) * hw;
            y->value.segment((int64_t(n) * Ctot) * hw + coff, sz) =
                x->value.segment(int64_t(n) * x->dim(1) * hw, sz);
            coff += sz;
        }
    }
    bool want = false;
    for (const auto& x : xs) want = want || (tape && x->requires_grad);
    if (want) {
        y->requires_grad = true;
        auto inputs = xs;
        tape->record([inputs, y, N, Ctot, hw]() {
            for (int n = 0; n < N; ++n) {
                int64_t coff = 0;
                for (const auto& x : inputs) {
                    const int64_t sz = int64_t(x->dim(1)) * hw;
                    if (x->requires_grad) {
                        x->ensure_grad();
                        x->grad.segment(int64_t(n) * x->dim(1) * hw, sz) +=
                            y->grad.segment((int64_t(n) * Ctot) * hw + coff, sz);
                    }
                    coff += sz;
                }
            }
        });
    }
    return y;
}

template <typename S>
TensorPtr<S> upsample_nearest2x(TapeT<S>* tape, const TensorPtr<S>& x) {
    require(x->shape.size() == 4, "upsample_nearest2x: expects [N,C,H,W]");
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    auto y = make_tensor<S>({N, C, 2 * H, 2 * W});
    for (int nc = 0; nc < N * C; ++nc) {
        const S* src = x->value.data() + int64_t(nc) * H * W;
        S* dst = y->value.data() + int64_t(nc) * 4 * H * W;
        for (int iy = 0; iy < H; ++iy) {
            for (int ix = 0; ix < W; ++ix) {
                const S v = src[int64_t(iy) * W + ix];
                S* d = dst + (int64_t(2 * iy) * 2 * W + 2 * ix);
                d[0] = v;
                d[1] = v;
                d[2 * W] = v;
                d[2 * W + 1] = v;
            }
        }
    }
    if (detail::want_grad<S>(tape, {&x})) {
        y->requires_grad = true;
        tape->record([x, y, N, C, H, W]() {
            x->ensure_grad();
            for (int nc = 0; nc < N * C; ++nc) {
                S* gx = x->grad.data() + int64_t(nc) * H * W;
                const S* gy = y->grad.data() + int64_t(nc) * 4 * H * W;
                for (int iy = 0; iy < H; ++iy) {
                    for (int ix = 0; ix < W; ++ix) {
                        const S* g = gy + (int64_t(2 * iy) * 2 * W + 2 * ix);
                        gx[int64_t(iy) * W + ix] += g[0] + g[1] + g[2 * W] + g[2 * W + 1];
                    }
                }
            }
        });
    }
    return y;
}

// ---------------------------------------------------------------------------
// per-location temporal attention
// ---------------------------------------------------------------------------

// q,k,v: [F*L, C] where row f*L + l is frame f at spatial location l. For each
// location independently: scores = Q K^T * scale, A = softmax(scores),
// O = A V. Returns O with the same layout.
template <typename S>
TensorPtr<S> per_location_attention(TapeT<S>* tape, const TensorPtr<S>& q, const TensorPtr<S>& k,
                                    const TensorPtr<S>& v, int frames, int locs, S att_scale,
                                    AttnProbe* probe = nullptr) {
    require(q->shape == k->shape && q->shape == v->shape, "per_location_attention: qkv mismatch");
    require(q->dim(0) == frames * locs, "per_location_attention: F*L mismatch");
    const int C = q->dim(1);
    auto y = make_tensor<S>(q->shape);
    auto attn = std::make_shared<typename TensorT<S>::Array>(int64_t(locs) * frames * frames);
    double dev_all = 0.0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(max : dev_all) if (locs > 8)
#endif
    for (int l = 0; l < locs; ++l) {
        detail::MatRM<S> Q(frames, C), K(frames, C), V(frames, C);
        for (int f = 0; f < frames; ++f) {
            const int64_t row = (int64_t(f) * locs + l) * C;
            Q.row(f) = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(q->value.data() + row, C);
            K.row(f) = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(k->value.data() + row, C);
            V.row(f) = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(v->value.data() + row, C);
        }
        detail::MatRM<S> sc = Q * K.transpose() * att_scale;
        detail::MapRM<S> A(attn->data() + int64_t(l) * frames * frames, frames, frames);
        for (int f = 0; f < frames; ++f) {
            S mx = sc.row(f).maxCoeff();
            A.row(f) = (sc.row(f).array() - mx).exp().matrix();
            A.row(f) /= A.row(f).sum();
            dev_all = std::max(dev_all, std::abs(double(A.row(f).sum()) - 1.0));
        }
        detail::MatRM<S> O = A * V;
        for (int f = 0; f < frames; ++f) {
            Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(
                y->value.data() + (int64_t(f) * locs + l) * C, C) = O.row(f);
        }
    }
    if (probe) probe->note(dev_all, int64_t(locs) * frames);
    if (detail::want_grad<S>(tape, {&q, &k, &v})) {
        y->requires_grad = true;
        tape->record([q, k, v, y, attn, frames, locs, C, att_scale]() {
            if (q->requires_grad) q->ensure_grad();
            if (k->requires_grad) k->ensure_grad();
            if (v->requires_grad) v->ensure_grad();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (locs > 8)
#endif
            for (int l = 0; l < locs; ++l) {
                detail::MatRM<S> Q(frames, C), K(frames, C), V(frames, C), GO(frames, C);
                for (int f = 0; f < frames; ++f) {
                    const int64_t row = (int64_t(f) * locs + l) * C;
                    Q.row(f) = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(q->value.data() + row, C);
                    K.row(f) = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(k->value.data() + row, C);
                    V.row(f) = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(v->value.data() + row, C);
                    GO.row(f) = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(y->grad.data() + row, C);
                }
                detail::CMapRM<S> A(attn->data() + int64_t(l) * frames * frames, frames, frames);
                detail::MatRM<S> gV = A.transpose() * GO;
                detail::MatRM<S> gA = GO * V.transpose();
                detail::MatRM<S> gS(frames, frames);
                for (int f = 0; f < frames; ++f) {
                    S dot = A.row(f).dot(gA.row(f));
                    gS.row(f) = A.row(f).array() * (gA.row(f).array() - dot);
                }
                gS *= att_scale;
                detail::MatRM<S> gQ = gS * K;
                detail::MatRM<S> gK = gS.transpose() * Q;
                for (int f = 0; f < frames; ++f) {
                    const int64_t row = (int64_t(f) * locs + l) * C;
                    if (q->requires_grad)
                        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(q->grad.data() + row, C) += gQ.row(f);
                    if (k->requires_grad)
                        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(k->grad.data() + row, C) += gK.row(f);
                    if (v->requires_grad)
                        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>(v->grad.data() + row, C) += gV.row(f);
                }
            }
        });
    }
    return y;
}

// Adds posenc row pos[f] to every token of frame f; tokens laid out as
// [F*L, C] with row f*L + l.
template <typename S>
TensorPtr<S> add_frame_posenc(TapeT<S>* tape, const TensorPtr<S>& x, const TensorPtr<S>& pos,
                              int frames, int locs) {
    require(x->dim(0) == frames * locs && pos->shape.size() == 2 && pos->dim(1) == x->dim(1) &&
                pos->dim(0) >= frames,
            "add_frame_posenc: shape mismatch");
    const int C = x->dim(1);
    auto y = make_tensor<S>(x->shape);
    for (int f = 0; f < frames; ++f) {
        for (int l = 0; l < locs; ++l) {
            const int64_t row = (int64_t(f) * locs + l) * C;
            y->value.segment(row, C) = x->value.segment(row, C) + pos->value.segment(int64_t(f) * C, C);
        }
    }
    if (detail::want_grad<S>(tape, {&x, &pos})) {
        y->requires_grad = true;
        tape->record([x, pos, y, frames, locs, C]() {
            if (x->requires_grad) { x->ensure_grad(); x->grad += y->grad; }
            if (pos->requires_grad) {
                pos->ensure_grad();
                for (int f = 0; f < frames; ++f) {
                    for (int l = 0; l < locs; ++l) {
                        pos->grad.segment(int64_t(f) * C, C) +=
                            y->grad.segment((int64_t(f) * locs + l) * C, C);
                    }
                }
            }
        });
    }
    return y;
}

inline void init_parallelism() {
#ifdef _OPENMP
    Eigen::setNbThreads(omp_get_max_threads());
#endif
}

}  // namespace posevid

#endif
