#include "posevid/schedule.hpp"

#include <cmath>

namespace posevid {

NoiseSchedule make_zero_snr_schedule(int T, double beta_start, double beta_end) {
    require(T >= 2, "make_zero_snr_schedule: T must be >= 2");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(size_t(T));
    s.alpha_bar.resize(size_t(T));
    s.snr.resize(size_t(T));

    // scaled-linear betas
    const double b0 = std::sqrt(beta_start);
    const double b1 = std::sqrt(beta_end);
    std::vector<double> ab_sqrt(size_t(T), 0.0);
    double cum = 1.0;
    for (int t = 0; t < T; ++t) {
        const double b = b0 + (b1 - b0) * double(t) / double(T - 1);
        cum *= 1.0 - b * b;
        ab_sqrt[size_t(t)] = std::sqrt(cum);
    }

    // Affine rescale of sqrt(alpha_bar): terminal value to zero, first value
    // preserved.
    const double first = ab_sqrt[0];
    const double last = ab_sqrt[size_t(T - 1)];
    for (int t = 0; t < T; ++t) {
        double v = (ab_sqrt[size_t(t)] - last) * (first / (first - last));
        s.alpha_bar[size_t(t)] = v * v;
    }
    s.alpha_bar[size_t(T - 1)] = 0.0;  // exact by construction; pin against rounding

    // Recompute betas from the rescaled cumulative products.
    s.beta[0] = 1.0 - s.alpha_bar[0];
    for (int t = 1; t < T; ++t) {
        s.beta[size_t(t)] = 1.0 - s.alpha_bar[size_t(t)] / s.alpha_bar[size_t(t - 1)];
    }
    for (int t = 0; t < T; ++t) {
        const double ab = s.alpha_bar[size_t(t)];
        s.snr[size_t(t)] = ab / (1.0 - ab);
    }
    return s;
}

double min_snr_weight(int t, const NoiseSchedule& sched, double gamma) {
    require(t >= 0 && t < sched.T, "min_snr_weight: t out of range");
    const double snr = sched.snr[size_t(t)];
    return std::min(snr, gamma) / (snr + 1.0);
}

}  // namespace posevid
