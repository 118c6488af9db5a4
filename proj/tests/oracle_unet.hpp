#ifndef POSEVID_TESTS_ORACLE_UNET_HPP
#define POSEVID_TESTS_ORACLE_UNET_HPP

// Straight-line dense-arithmetic replica of the UNet forward pass, written
// with plain loops over std::vector<double>. Reads the same parameter store
// as the production model but shares no code with it; used to pin down the
// exact layer semantics on miniature configurations.

#include <cmath>
#include <string>
#include <vector>

#include "posevid/unet.hpp"

namespace oracle {

using posevid::ParamStoreT;
using posevid::UNetConfig;

struct OTensor {
    int F = 0, C = 0, H = 0, W = 0;
    std::vector<double> v;

    OTensor() = default;
    OTensor(int f, int c, int h, int w) : F(f), C(c), H(h), W(w), v(size_t(f) * c * h * w, 0.0) {}
    double& at(int f, int c, int y, int x) {
        return v[((size_t(f) * C + c) * H + y) * W + x];
    }
    double at(int f, int c, int y, int x) const {
        return v[((size_t(f) * C + c) * H + y) * W + x];
    }
};

class OracleUNet {
public:
    OracleUNet(const ParamStoreT<double>& ps, std::string prefix, UNetConfig cfg)
        : ps_(ps), prefix_(std::move(prefix)), cfg_(cfg) {}

    // bank: per attention site, tokens [Tb][C]. capture mirrors the
    // reference pass.
    OTensor forward(const OTensor& x, int t, const std::vector<std::vector<double>>* bank,
                    const std::vector<OTensor>* residuals, const std::vector<double>& embed,
                    std::vector<std::vector<double>>* capture = nullptr) const {
        const int n = cfg_.stages();
        site_ = 0;
        std::vector<double> temb = timestep_embedding(t);
        OTensor h = conv(x, prefix_ + ".conv_in", 1, 1);
        std::vector<OTensor> skips;
        for (int i = 0; i < n; ++i) {
            if (residuals) h = add(h, (*residuals)[size_t(i)]);
            h = res_block(h, prefix_ + ".enc" + std::to_string(i), temb);
            if (cfg_.has_attn(i)) {
                h = attn_stack(h, prefix_ + ".enc" + std::to_string(i), bank, embed, capture,
                               cfg_.with_motion);
            }
            skips.push_back(h);
            if (i + 1 < n) h = conv(h, prefix_ + ".down" + std::to_string(i), 2, 1);
        }
        if (residuals) h = add(h, (*residuals)[size_t(n)]);
        h = res_block(h, prefix_ + ".mid.res1", temb);
        if (cfg_.has_attn(n - 1)) {
            h = attn_stack(h, prefix_ + ".mid", bank, embed, capture, cfg_.with_motion);
        }
        h = res_block(h, prefix_ + ".mid.res2", temb);
        for (int i = n - 1; i >= 0; --i) {
            h = concat_c(h, skips[size_t(i)]);
            h = res_block(h, prefix_ + ".dec" + std::to_string(i), temb);
            if (cfg_.has_attn(i)) {
                h = attn_stack(h, prefix_ + ".dec" + std::to_string(i), bank, embed, capture,
                               cfg_.with_motion);
            }
            if (i > 0) {
                h = upsample2(h);
                h = conv(h, prefix_ + ".up" + std::to_string(i), 1, 1);
            }
        }
        h = group_norm(h, prefix_ + ".out.norm");
        h = silu(h);
        return conv(h, prefix_ + ".out.conv", 1, 1);
    }

    std::vector<std::vector<double>> reference_forward(const OTensor& ref_image,
                                                       const std::vector<double>& embed) const {
        std::vector<std::vector<double>> bank;
        forward(ref_image, 0, nullptr, nullptr, embed, &bank);
        return bank;
    }

private:
    const ParamStoreT<double>& ps_;
    std::string prefix_;
    UNetConfig cfg_;
    mutable int site_ = 0;

    const Eigen::Array<double, Eigen::Dynamic, 1>& p(const std::string& name) const {
        return ps_.at(name)->value;
    }
    const std::vector<int>& pshape(const std::string& name) const { return ps_.at(name)->shape; }

    static OTensor add(const OTensor& a, const OTensor& b) {
        OTensor y = a;
        for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += b.v[i];
        return y;
    }

    static OTensor silu(const OTensor& x) {
        OTensor y = x;
        for (double& e : y.v) e = e / (1.0 + std::exp(-e));
        return y;
    }

    std::vector<double> timestep_embedding(int t) const {
        const int D = cfg_.temb_dim();
        std::vector<double> sin_emb(size_t(D), 0.0);
        const int half = D / 2;
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
            sin_emb[size_t(i)] = std::sin(t * freq);
            sin_emb[size_t(half + i)] = std::cos(t * freq);
        }
        std::vector<double> h1 = matvec(prefix_ + ".temb.lin1", sin_emb, true);
        for (double& e : h1) e = e / (1.0 + std::exp(-e));
        return matvec(prefix_ + ".temb.lin2", h1, true);
    }

    std::vector<double> matvec(const std::string& name, const std::vector<double>& x,
                               bool bias) const {
        const auto& w = p(name + ".w");
        const auto shape = pshape(name + ".w");
        const int out = shape[0], in = shape[1];
        std::vector<double> y(size_t(out), 0.0);
        for (int o = 0; o < out; ++o) {
            double acc = bias ? p(name + ".b")[o] : 0.0;
            for (int i = 0; i < in; ++i) acc += w[int64_t(o) * in + i] * x[size_t(i)];
            y[size_t(o)] = acc;
        }
        return y;
    }

    OTensor conv(const OTensor& x, const std::string& name, int stride, int pad) const {
        const auto shape = pshape(name + ".w");
        const int Cout = shape[0], Cin = shape[1], kh = shape[2], kw = shape[3];
        const auto& w = p(name + ".w");
        const auto& b = p(name + ".b");
        const int Ho = (x.H + 2 * pad - kh) / stride + 1;
        const int Wo = (x.W + 2 * pad - kw) / stride + 1;
        OTensor y(x.F, Cout, Ho, Wo);
        for (int f = 0; f < x.F; ++f) {
            for (int co = 0; co < Cout; ++co) {
                for (int oy = 0; oy < Ho; ++oy) {
                    for (int ox = 0; ox < Wo; ++ox) {
                        double acc = b[co];
                        for (int ci = 0; ci < Cin; ++ci) {
                            for (int dy = 0; dy < kh; ++dy) {
                                for (int dx = 0; dx < kw; ++dx) {
                                    const int iy = oy * stride - pad + dy;
                                    const int ix = ox * stride - pad + dx;
                                    if (iy < 0 || iy >= x.H || ix < 0 || ix >= x.W) continue;
                                    acc += x.at(f, ci, iy, ix) *
                                           w[(((int64_t(co) * Cin) + ci) * kh + dy) * kw + dx];
                                }
                            }
                        }
                        y.at(f, co, oy, ox) = acc;
                    }
                }
            }
        }
        return y;
    }

    OTensor group_norm(const OTensor& x, const std::string& name) const {
        const auto& g = p(name + ".g");
        const auto& be = p(name + ".b");
        const int groups = std::min(cfg_.norm_groups, x.C);
        const int cg = x.C / groups;
        OTensor y = x;
        for (int f = 0; f < x.F; ++f) {
            for (int gr = 0; gr < groups; ++gr) {
                double mu = 0, m2 = 0;
                const int64_t cnt = int64_t(cg) * x.H * x.W;
                for (int c = gr * cg; c < (gr + 1) * cg; ++c) {
                    for (int yy = 0; yy < x.H; ++yy) {
                        for (int xx = 0; xx < x.W; ++xx) {
                            mu += x.at(f, c, yy, xx);
                        }
                    }
                }
                mu /= double(cnt);
                for (int c = gr * cg; c < (gr + 1) * cg; ++c) {
                    for (int yy = 0; yy < x.H; ++yy) {
                        for (int xx = 0; xx < x.W; ++xx) {
                            const double d = x.at(f, c, yy, xx) - mu;
                            m2 += d * d;
                        }
                    }
                }
                const double is = 1.0 / std::sqrt(m2 / double(cnt) + 1e-5);
                for (int c = gr * cg; c < (gr + 1) * cg; ++c) {
                    for (int yy = 0; yy < x.H; ++yy) {
                        for (int xx = 0; xx < x.W; ++xx) {
                            y.at(f, c, yy, xx) =
                                (x.at(f, c, yy, xx) - mu) * is * g[c] + be[c];
                        }
                    }
                }
            }
        }
        return y;
    }

    OTensor res_block(const OTensor& x, const std::string& name, const std::vector<double>& temb) const {
        OTensor h = conv(silu(group_norm(x, name + ".res.norm1")), name + ".res.conv1", 1, 1);
        // temb projection after SiLU, broadcast per channel
        std::vector<double> te = temb;
        for (double& e : te) e = e / (1.0 + std::exp(-e));
        std::vector<double> proj = matvec(name + ".res.temb", te, true);
        for (int f = 0; f < h.F; ++f) {
            for (int c = 0; c < h.C; ++c) {
                for (int yy = 0; yy < h.H; ++yy) {
                    for (int xx = 0; xx < h.W; ++xx) {
                        h.at(f, c, yy, xx) += proj[size_t(c)];
                    }
                }
            }
        }
        h = conv(silu(group_norm(h, name + ".res.norm2")), name + ".res.conv2", 1, 1);
        OTensor skip = x;
        if (ps_.contains(name + ".res.skip.w")) {
            skip = conv(x, name + ".res.skip", 1, 0);
        }
        return add(h, skip);
    }

    static OTensor concat_c(const OTensor& a, const OTensor& b) {
        OTensor y(a.F, a.C + b.C, a.H, a.W);
        for (int f = 0; f < a.F; ++f) {
            for (int c = 0; c < a.C; ++c) {
                for (int yy = 0; yy < a.H; ++yy) {
                    for (int xx = 0; xx < a.W; ++xx) {
                        y.at(f, c, yy, xx) = a.at(f, c, yy, xx);
                    }
                }
            }
            for (int c = 0; c < b.C; ++c) {
                for (int yy = 0; yy < a.H; ++yy) {
                    for (int xx = 0; xx < a.W; ++xx) {
                        y.at(f, a.C + c, yy, xx) = b.at(f, c, yy, xx);
                    }
                }
            }
        }
        return y;
    }

    static OTensor upsample2(const OTensor& x) {
        OTensor y(x.F, x.C, 2 * x.H, 2 * x.W);
        for (int f = 0; f < x.F; ++f) {
            for (int c = 0; c < x.C; ++c) {
                for (int yy = 0; yy < 2 * x.H; ++yy) {
                    for (int xx = 0; xx < 2 * x.W; ++xx) {
                        y.at(f, c, yy, xx) = x.at(f, c, yy / 2, xx / 2);
                    }
                }
            }
        }
        return y;
    }

    // Self-attention (+ optional bank tokens), cross-attention to the embed,
    // then the motion module; one "site" consumed per call.
    OTensor attn_stack(const OTensor& x, const std::string& base,
                       const std::vector<std::vector<double>>* bank,
                       const std::vector<double>& embed,
                       std::vector<std::vector<double>>* capture, bool with_motion) const {
        const int C = x.C, T = x.H * x.W;
        OTensor y = x;

        // --- self-attention ---
        OTensor xn = group_norm(x, base + ".attn.norm");
        // tokens per frame: row l = pixel l
        std::vector<std::vector<double>> tokens(size_t(x.F),
                                                std::vector<double>(size_t(T) * C, 0.0));
        for (int f = 0; f < x.F; ++f) {
            for (int l = 0; l < T; ++l) {
                for (int c = 0; c < C; ++c) {
                    tokens[size_t(f)][size_t(l) * C + c] = xn.at(f, c, l / x.W, l % x.W);
                }
            }
        }
        if (capture) {
            std::vector<double> cap;
            for (int f = 0; f < x.F; ++f) {
                cap.insert(cap.end(), tokens[size_t(f)].begin(), tokens[size_t(f)].end());
            }
            capture->push_back(cap);
        }
        const std::vector<double>* bank_tok = bank ? &(*bank)[size_t(site_)] : nullptr;
        const int Tb = bank_tok ? int(bank_tok->size()) / C : 0;
        const double scl = 1.0 / std::sqrt(double(C));
        for (int f = 0; f < x.F; ++f) {
            // kv source = [self tokens ; bank tokens]
            std::vector<double> kv = tokens[size_t(f)];
            if (bank_tok) kv.insert(kv.end(), bank_tok->begin(), bank_tok->end());
            const int M = T + Tb;
            for (int l = 0; l < T; ++l) {
                std::vector<double> q = proj_token(base + ".attn.q", &tokens[size_t(f)][size_t(l) * C], C);
                std::vector<double> logits(size_t(M), 0.0);
                for (int m = 0; m < M; ++m) {
                    std::vector<double> k = proj_token(base + ".attn.k", &kv[size_t(m) * C], C);
                    double dot = 0;
                    for (int c = 0; c < C; ++c) dot += q[size_t(c)] * k[size_t(c)];
                    logits[size_t(m)] = dot * scl;
                }
                double mx = logits[0];
                for (double lg : logits) mx = std::max(mx, lg);
                double z = 0;
                for (double& lg : logits) {
                    lg = std::exp(lg - mx);
                    z += lg;
                }
                std::vector<double> att(size_t(C), 0.0);
                for (int m = 0; m < M; ++m) {
                    std::vector<double> vv = proj_token(base + ".attn.v", &kv[size_t(m) * C], C);
                    for (int c = 0; c < C; ++c) att[size_t(c)] += logits[size_t(m)] / z * vv[size_t(c)];
                }
                std::vector<double> o = matvec(base + ".attn.o", att, true);
                for (int c = 0; c < C; ++c) {
                    y.at(f, c, l / x.W, l % x.W) += o[size_t(c)];
                }
            }
        }
        ++site_;

        // --- cross-attention to the single-token embedding ---
        OTensor yx = y;
        OTensor yn = group_norm(y, base + ".xattn.norm");
        std::vector<double> ve = matvec_noblas(base + ".xattn.v", embed);
        // single key: softmax over one logit = 1, so output is v for every token
        std::vector<double> o = matvec(base + ".xattn.o", ve, true);
        for (int f = 0; f < x.F; ++f) {
            for (int c = 0; c < C; ++c) {
                for (int yy = 0; yy < x.H; ++yy) {
                    for (int xx = 0; xx < x.W; ++xx) {
                        yx.at(f, c, yy, xx) += o[size_t(c)];
                    }
                }
            }
        }
        (void)yn;  // queries do not influence a one-key softmax

        // --- motion module across frames ---
        if (!with_motion) return yx;
        OTensor out = yx;
        const auto& g = p(base + ".motion.norm.g");
        const auto& be = p(base + ".motion.norm.b");
        const std::vector<double> pos = posenc(C);
        for (int l = 0; l < T; ++l) {
            // h[f] = LN(token) + pos[f]
            std::vector<std::vector<double>> hh(size_t(x.F), std::vector<double>(size_t(C), 0.0));
            for (int f = 0; f < x.F; ++f) {
                double mu = 0;
                for (int c = 0; c < C; ++c) mu += yx.at(f, c, l / x.W, l % x.W);
                mu /= C;
                double m2 = 0;
                for (int c = 0; c < C; ++c) {
                    const double d = yx.at(f, c, l / x.W, l % x.W) - mu;
                    m2 += d * d;
                }
                const double is = 1.0 / std::sqrt(m2 / C + 1e-5);
                for (int c = 0; c < C; ++c) {
                    hh[size_t(f)][size_t(c)] =
                        (yx.at(f, c, l / x.W, l % x.W) - mu) * is * g[c] + be[c] +
                        pos[size_t(f) * C + c];
                }
            }
            for (int f = 0; f < x.F; ++f) {
                std::vector<double> q = matvec_noblas(base + ".motion.q", hh[size_t(f)]);
                std::vector<double> logits(size_t(x.F), 0.0);
                for (int f2 = 0; f2 < x.F; ++f2) {
                    std::vector<double> k = matvec_noblas(base + ".motion.k", hh[size_t(f2)]);
                    double dot = 0;
                    for (int c = 0; c < C; ++c) dot += q[size_t(c)] * k[size_t(c)];
                    logits[size_t(f2)] = dot * scl;
                }
                double mx = logits[0];
                for (double lg : logits) mx = std::max(mx, lg);
                double z = 0;
                for (double& lg : logits) {
                    lg = std::exp(lg - mx);
                    z += lg;
                }
                std::vector<double> att(size_t(C), 0.0);
                for (int f2 = 0; f2 < x.F; ++f2) {
                    std::vector<double> vv = matvec_noblas(base + ".motion.v", hh[size_t(f2)]);
                    for (int c = 0; c < C; ++c) att[size_t(c)] += logits[size_t(f2)] / z * vv[size_t(c)];
                }
                std::vector<double> oo = matvec(base + ".motion.o", att, true);
                for (int c = 0; c < C; ++c) {
                    out.at(f, c, l / x.W, l % x.W) += oo[size_t(c)];
                }
            }
        }
        return out;
    }

    std::vector<double> proj_token(const std::string& name, const double* tok, int C) const {
        const auto& w = p(name + ".w");
        std::vector<double> y(size_t(C), 0.0);
        for (int o = 0; o < C; ++o) {
            double acc = 0;
            for (int i = 0; i < C; ++i) acc += w[int64_t(o) * C + i] * tok[i];
            y[size_t(o)] = acc;
        }
        return y;
    }

    std::vector<double> matvec_noblas(const std::string& name, const std::vector<double>& x) const {
        const auto shape = pshape(name + ".w");
        const int out = shape[0], in = shape[1];
        const auto& w = p(name + ".w");
        std::vector<double> y(size_t(out), 0.0);
        for (int o = 0; o < out; ++o) {
            double acc = 0;
            for (int i = 0; i < in; ++i) acc += w[int64_t(o) * in + i] * x[size_t(i)];
            y[size_t(o)] = acc;
        }
        return y;
    }

    std::vector<double> posenc(int C) const {
        std::vector<double> tab(size_t(cfg_.max_frames) * C, 0.0);
        const int half = C / 2;
        for (int f = 0; f < cfg_.max_frames; ++f) {
            for (int i = 0; i < half; ++i) {
                const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
                tab[size_t(f) * C + i] = std::sin(f * freq);
                tab[size_t(f) * C + half + i] = std::cos(f * freq);
            }
        }
        return tab;
    }
};

}  // namespace oracle

#endif
