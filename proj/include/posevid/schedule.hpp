#ifndef POSEVID_SCHEDULE_HPP
#define POSEVID_SCHEDULE_HPP

#include <cstdint>
#include <vector>

#include "posevid/tensor.hpp"

namespace posevid {

// Per-timestep noise schedule with zero terminal SNR. Schedule math stays in
// double; model tensors only see the per-timestep scalars.
struct NoiseSchedule {
    int T = 1000;
    std::vector<double> beta;
    std::vector<double> alpha_bar;  // strictly decreasing, alpha_bar[T-1] == 0
    std::vector<double> snr;        // alpha_bar / (1 - alpha_bar)

    double sqrt_ab(int t) const { return std::sqrt(alpha_bar[size_t(t)]); }
    double sqrt_1mab(int t) const { return std::sqrt(1.0 - alpha_bar[size_t(t)]); }
};

// Scaled-linear betas rescaled so sqrt(alpha_bar) ends at exactly zero while
// keeping its first value; betas recomputed from the rescaled alpha_bars.
NoiseSchedule make_zero_snr_schedule(int T = 1000, double beta_start = 0.00085,
                                     double beta_end = 0.012);

// weight = min(snr, gamma) / (snr + 1); finite everywhere including snr = 0.
double min_snr_weight(int t, const NoiseSchedule& sched, double gamma = 5.0);

// x_t = sqrt(ab)*x0 + sqrt(1-ab)*eps
template <typename S>
TensorPtr<S> add_noise(const TensorPtr<S>& x0, const TensorPtr<S>& eps, int t,
                       const NoiseSchedule& sched) {
    require(t >= 0 && t < sched.T, "add_noise: t out of range");
    require(x0->shape == eps->shape, "add_noise: shape mismatch");
    auto y = make_tensor<S>(x0->shape);
    y->value = S(sched.sqrt_ab(t)) * x0->value + S(sched.sqrt_1mab(t)) * eps->value;
    return y;
}

// v = sqrt(ab)*eps - sqrt(1-ab)*x0
template <typename S>
TensorPtr<S> v_target(const TensorPtr<S>& x0, const TensorPtr<S>& eps, int t,
                      const NoiseSchedule& sched) {
    require(t >= 0 && t < sched.T, "v_target: t out of range");
    require(x0->shape == eps->shape, "v_target: shape mismatch");
    auto y = make_tensor<S>(x0->shape);
    y->value = S(sched.sqrt_ab(t)) * eps->value - S(sched.sqrt_1mab(t)) * x0->value;
    return y;
}

// v_guided = v_uncond + s * (v_cond - v_uncond)
template <typename S>
TensorPtr<S> cfg_combine(const TensorPtr<S>& v_cond, const TensorPtr<S>& v_uncond, S s) {
    require(v_cond->shape == v_uncond->shape, "cfg_combine: shape mismatch");
    auto y = make_tensor<S>(v_cond->shape);
    // s = 1 and s = 0 reproduce the inputs exactly
    if (s == S(1)) {
        y->value = v_cond->value;
    } else if (s == S(0)) {
        y->value = v_uncond->value;
    } else {
        y->value = v_uncond->value + s * (v_cond->value - v_uncond->value);
    }
    return y;
}

}  // namespace posevid

#endif
