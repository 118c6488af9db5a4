#include <doctest.h>

#include "posevid/rng.hpp"
#include "posevid/tensor.hpp"

using namespace posevid;

using DTensor = TensorPtr<double>;
using DTape = TapeT<double>;

namespace {

DTensor randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    auto t = make_tensor<double>(std::move(shape));
    for (int64_t i = 0; i < t->size(); ++i) t->value[i] = rng.normal() * scale;
    t->requires_grad = true;
    return t;
}

// Central finite differences against the tape's analytic gradients.
template <typename Fwd>
void gradcheck(std::vector<DTensor> leaves, Fwd forward, double tol = 1e-6,
               double eps = 1e-5) {
    for (auto& l : leaves) {
        l->ensure_grad();
        l->zero_grad();
    }
    DTape tape;
    auto loss = forward(&tape);
    REQUIRE(loss->size() == 1);
    tape.backward(loss);
    std::vector<Eigen::ArrayXd> analytic;
    for (auto& l : leaves) {
        l->ensure_grad();
        analytic.push_back(l->grad);
    }
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& l = leaves[li];
        for (int64_t i = 0; i < l->size(); ++i) {
            const double orig = l->value[i];
            l->value[i] = orig + eps;
            const double up = forward(nullptr)->value[0];
            l->value[i] = orig - eps;
            const double dn = forward(nullptr)->value[0];
            l->value[i] = orig;
            const double fd = (up - dn) / (2 * eps);
            const double an = analytic[li][i];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            INFO("leaf ", li, " index ", i, " fd=", fd, " analytic=", an);
            CHECK(std::abs(fd - an) / denom < tol);
        }
    }
}

}  // namespace

TEST_CASE("elementwise ops: values and gradients") {
    Rng rng(1);
    auto a = randn({2, 3}, rng);
    auto b = randn({2, 3}, rng);
    gradcheck({a, b}, [&](DTape* t) {
        return mean_all(t, mul(t, silu(t, a), sigmoid(t, add(t, a, b))));
    }, 1e-5);
    gradcheck({a, b}, [&](DTape* t) { return mse(t, scale(t, a, 1.7), sub(t, b, a)); }, 1e-5);
}

TEST_CASE("linear and matmul gradients (all transpose combos)") {
    Rng rng(2);
    auto x = randn({3, 4}, rng);
    auto w = randn({5, 4}, rng);
    auto b = randn({5}, rng);
    gradcheck({x, w, b}, [&](DTape* t) { return mean_all(t, linear(t, x, w, b)); }, 1e-5);

    auto a34 = randn({3, 4}, rng);
    auto b45 = randn({4, 5}, rng);
    auto a43 = randn({4, 3}, rng);
    auto b54 = randn({5, 4}, rng);
    gradcheck({a34, b45}, [&](DTape* t) { return mean_all(t, matmul(t, a34, b45)); }, 1e-5);
    gradcheck({a43, b45}, [&](DTape* t) { return mean_all(t, matmul(t, a43, b45, true, false)); }, 1e-5);
    gradcheck({a34, b54}, [&](DTape* t) { return mean_all(t, matmul(t, a34, b54, false, true)); }, 1e-5);
    gradcheck({a43, b54}, [&](DTape* t) { return mean_all(t, matmul(t, a43, b54, true, true)); }, 1e-5);
}

TEST_CASE("softmax rows: stochastic rows and gradient") {
    Rng rng(3);
    auto x = randn({4, 6}, rng, 2.0);
    DTape tape;
    AttnProbe probe;
    auto y = softmax_rows(&tape, x, &probe);
    for (int r = 0; r < 4; ++r) {
        double s = 0;
        for (int c = 0; c < 6; ++c) s += y->value[r * 6 + c];
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
    CHECK(probe.rows_seen == 4);
    auto q = randn({4, 6}, rng);
    gradcheck({x}, [&](DTape* t) { return mse(t, softmax_rows(t, x), q); }, 1e-5);
}

TEST_CASE("group_norm and layer_norm gradients") {
    Rng rng(4);
    auto x = randn({2, 4, 3, 3}, rng);
    auto g = randn({4}, rng, 0.5);
    auto b = randn({4}, rng, 0.5);
    g->value += 1.0;
    gradcheck({x, g, b}, [&](DTape* t) {
        return mean_all(t, silu(t, group_norm(t, x, g, b, 2)));
    }, 2e-5, 1e-5);

    auto xt = randn({5, 6}, rng);
    auto lg = randn({6}, rng, 0.3);
    auto lb = randn({6}, rng, 0.3);
    lg->value += 1.0;
    auto tgt = randn({5, 6}, rng);
    gradcheck({xt, lg, lb}, [&](DTape* t) {
        return mse(t, layer_norm(t, xt, lg, lb), tgt);
    }, 2e-5, 1e-5);
}

TEST_CASE("conv2d matches direct convolution and gradients") {
    Rng rng(5);
    auto x = randn({2, 3, 5, 5}, rng);
    auto w = randn({4, 3, 3, 3}, rng);
    auto b = randn({4}, rng);

    // direct dense conv oracle, stride 2 pad 1
    DTape tape;
    auto y = conv2d(&tape, x, w, b, 2, 1);
    const int Ho = 3, Wo = 3;
    REQUIRE(y->shape == std::vector<int>({2, 4, Ho, Wo}));
    for (int n = 0; n < 2; ++n) {
        for (int co = 0; co < 4; ++co) {
            for (int oy = 0; oy < Ho; ++oy) {
                for (int ox = 0; ox < Wo; ++ox) {
                    double acc = b->value[co];
                    for (int ci = 0; ci < 3; ++ci) {
                        for (int dy = 0; dy < 3; ++dy) {
                            for (int dx = 0; dx < 3; ++dx) {
                                const int iy = oy * 2 - 1 + dy, ix = ox * 2 - 1 + dx;
                                if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
                                acc += x->value[((n * 3 + ci) * 5 + iy) * 5 + ix] *
                                       w->value[((co * 3 + ci) * 3 + dy) * 3 + dx];
                            }
                        }
                    }
                    CHECK(std::abs(acc - y->value[((n * 4 + co) * Ho + oy) * Wo + ox]) < 1e-12);
                }
            }
        }
    }
    gradcheck({x, w, b}, [&](DTape* t) { return mean_all(t, conv2d(t, x, w, b, 2, 1)); }, 1e-5);
    gradcheck({x, w, b}, [&](DTape* t) { return mean_all(t, conv2d(t, x, w, b, 1, 1)); }, 1e-5);
}

TEST_CASE("shape ops round-trip and gradients") {
    Rng rng(6);
    auto x = randn({2, 3, 2, 2}, rng);
    DTape tape;
    auto tok = chw_to_tokens(&tape, x);
    REQUIRE(tok->shape == std::vector<int>({8, 3}));
    // row f*L + l carries pixel l of frame f
    CHECK(tok->value[0 * 3 + 1] == x->value[(0 * 3 + 1) * 4 + 0]);
    CHECK(tok->value[(1 * 4 + 2) * 3 + 2] == x->value[((1 * 3 + 2) * 2 + 1) * 2 + 0]);
    auto back = tokens_to_chw(&tape, tok, 2, 3, 2, 2);
    CHECK((back->value - x->value).abs().maxCoeff() == 0.0);

    auto q = randn({8, 3}, rng);
    gradcheck({x}, [&](DTape* t) { return mse(t, chw_to_tokens(t, x), q); }, 1e-6);

    auto a = randn({3, 4}, rng);
    auto b = randn({2, 4}, rng);
    auto tgt = randn({5, 4}, rng);
    gradcheck({a, b}, [&](DTape* t) { return mse(t, concat_rows(t, a, b), tgt); }, 1e-6);
    gradcheck({a}, [&](DTape* t) { return mean_all(t, slice_rows(t, a, 1, 3)); }, 1e-6);

    auto c1 = randn({2, 2, 3, 3}, rng);
    auto c2 = randn({2, 1, 3, 3}, rng);
    auto ct = randn({2, 3, 3, 3}, rng);
    gradcheck({c1, c2}, [&](DTape* t) {
        return mse(t, concat_channels<double>(t, {c1, c2}), ct);
    }, 1e-6);

    auto u = randn({1, 2, 3, 3}, rng);
    gradcheck({u}, [&](DTape* t) { return mean_all(t, silu(t, upsample_nearest2x(t, u))); }, 1e-5);

    auto cv = randn({2, 3, 2, 2}, rng);
    auto vb = randn({3}, rng);
    gradcheck({cv, vb}, [&](DTape* t) {
        return mean_all(t, silu(t, add_channel_vec(t, cv, vb)));
    }, 1e-5);
}

TEST_CASE("per-location temporal attention matches brute force") {
    Rng rng(7);
    const int F = 3, L = 4, C = 2;
    auto q = randn({F * L, C}, rng);
    auto k = randn({F * L, C}, rng);
    auto v = randn({F * L, C}, rng);
    const double scale = 1.0 / std::sqrt(double(C));

    DTape tape;
    AttnProbe probe;
    auto o = per_location_attention(&tape, q, k, v, F, L, scale, &probe);
    CHECK(probe.max_row_dev <= 1e-12);

    for (int l = 0; l < L; ++l) {
        for (int f = 0; f < F; ++f) {
            // brute-force row f of location l
            std::vector<double> logits(F);
            for (int f2 = 0; f2 < F; ++f2) {
                double dot = 0;
                for (int c = 0; c < C; ++c) {
                    dot += q->value[(f * L + l) * C + c] * k->value[(f2 * L + l) * C + c];
                }
                logits[f2] = dot * scale;
            }
            double mx = *std::max_element(logits.begin(), logits.end());
            double z = 0;
            for (double& lg : logits) {
                lg = std::exp(lg - mx);
                z += lg;
            }
            for (int c = 0; c < C; ++c) {
                double acc = 0;
                for (int f2 = 0; f2 < F; ++f2) {
                    acc += logits[f2] / z * v->value[(f2 * L + l) * C + c];
                }
                CHECK(std::abs(acc - o->value[(f * L + l) * C + c]) < 1e-12);
            }
        }
    }

    auto tgt = randn({F * L, C}, rng);
    gradcheck({q, k, v}, [&](DTape* t) {
        return mse(t, per_location_attention(t, q, k, v, F, L, scale), tgt);
    }, 1e-5);

    auto pos = randn({F, C}, rng);
    pos->requires_grad = true;
    gradcheck({q, pos}, [&](DTape* t) {
        return mean_all(t, silu(t, add_frame_posenc(t, q, pos, F, L)));
    }, 1e-5);
}

TEST_CASE("requires_grad gates recording") {
    Rng rng(8);
    auto a = randn({2, 2}, rng);
    a->requires_grad = false;
    auto b = randn({2, 2}, rng);
    b->requires_grad = false;
    DTape tape;
    auto y = mul(&tape, a, b);
    CHECK(tape.size() == 0);
    CHECK(!y->requires_grad);
    b->requires_grad = true;
    auto z = mul(&tape, a, b);
    CHECK(tape.size() == 1);
    CHECK(z->requires_grad);
}

TEST_CASE("shape mismatches are rejected") {
    Rng rng(9);
    auto a = randn({2, 2}, rng);
    auto b = randn({2, 3}, rng);
    DTape tape;
    CHECK_THROWS_AS((void)add(&tape, a, b), std::invalid_argument);
    auto c = randn({3, 2}, rng);
    CHECK_THROWS_AS((void)matmul(&tape, a, c, false, false), std::invalid_argument);
}
