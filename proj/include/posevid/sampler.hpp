#ifndef POSEVID_SAMPLER_HPP
#define POSEVID_SAMPLER_HPP

#include <functional>
#include <vector>

#include "posevid/schedule.hpp"

namespace posevid {

struct SamplerConfig {
    int steps = 20;
    double guidance_scale = 2.0;
    double eta = 0.0;  // deterministic sampler only
};

// Trailing spacing: t_i = round((S-i)*T/S) - 1; always starts at T-1 so
// sampling genuinely begins at the zero-SNR step.
inline std::vector<int> trailing_timesteps(int steps, int T) {
    require(steps >= 1, "trailing_timesteps: steps must be >= 1");
    require(steps <= T, "trailing_timesteps: steps must be <= T");
    std::vector<int> ts(size_t(steps), 0);
    for (int i = 0; i < steps; ++i) {
        ts[size_t(i)] = int(std::lround(double(steps - i) * double(T) / double(steps))) - 1;
    }
    for (size_t i = 1; i < ts.size(); ++i) {
        require(ts[i] < ts[i - 1], "trailing_timesteps: not strictly decreasing");
    }
    return ts;
}

// v -> (x0_hat, eps_hat) at timestep t.
template <typename S>
void v_to_x0_eps(const TensorPtr<S>& x, const TensorPtr<S>& v, int t, const NoiseSchedule& sched,
                 TensorPtr<S>& x0_hat, TensorPtr<S>& eps_hat) {
    const S sab = S(sched.sqrt_ab(t));
    const S s1m = S(sched.sqrt_1mab(t));
    x0_hat = make_tensor<S>(x->shape);
    eps_hat = make_tensor<S>(x->shape);
    x0_hat->value = sab * x->value - s1m * v->value;
    eps_hat->value = s1m * x->value + sab * v->value;
}

// Deterministic update x_t -> x_{t_next} given the model's v at t.
template <typename S>
TensorPtr<S> ddim_step(const TensorPtr<S>& x, const TensorPtr<S>& v, int t, int t_next,
                       const NoiseSchedule& sched) {
    TensorPtr<S> x0_hat, eps_hat;
    v_to_x0_eps(x, v, t, sched, x0_hat, eps_hat);
    auto y = make_tensor<S>(x->shape);
    y->value = S(sched.sqrt_ab(t_next)) * x0_hat->value + S(sched.sqrt_1mab(t_next)) * eps_hat->value;
    return y;
}

template <typename S>
using ModelFn = std::function<TensorPtr<S>(const TensorPtr<S>&, int)>;

// Iterates the selected timesteps from T-1 down; the final output is the
// x0 estimate of the last step. Fully deterministic (eta = 0).
template <typename S>
TensorPtr<S> sample(const ModelFn<S>& model, const TensorPtr<S>& x_T, const SamplerConfig& cfg,
                    const NoiseSchedule& sched) {
    require(cfg.eta == 0.0, "sample: only the deterministic eta=0 sampler is supported");
    const auto ts = trailing_timesteps(cfg.steps, sched.T);
    auto x = make_tensor<S>(x_T->shape);
    x->value = x_T->value;
    for (size_t i = 0; i < ts.size(); ++i) {
        const int t = ts[i];
        auto v = model(x, t);
        require(v->shape == x->shape, "sample: model output shape mismatch");
        if (i + 1 == ts.size()) {
            TensorPtr<S> x0_hat, eps_hat;
            v_to_x0_eps(x, v, t, sched, x0_hat, eps_hat);
            return x0_hat;
        }
        x = ddim_step(x, v, t, ts[i + 1], sched);
    }
    return x;  // unreachable
}

}  // namespace posevid

#endif
