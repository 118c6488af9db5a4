#include <doctest.h>

#include "posevid/rng.hpp"
#include "posevid/schedule.hpp"

using namespace posevid;

TEST_CASE("zero terminal SNR schedule invariants") {
    const auto s = make_zero_snr_schedule(1000);
    REQUIRE(s.alpha_bar.size() == 1000);
    CHECK(s.alpha_bar[999] == 0.0);
    CHECK(s.snr[999] == 0.0);
    CHECK(s.alpha_bar[0] > 0.99);
    CHECK(s.alpha_bar[0] < 1.0);
    for (int t = 1; t < 1000; ++t) {
        CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
        CHECK(std::isfinite(s.snr[t - 1]));
    }
}

TEST_CASE("rescale preserves alpha_bar[0]") {
    // Unrescaled scaled-linear schedule has alpha_bar[0] = 1 - beta_start.
    const auto s = make_zero_snr_schedule(1000, 0.00085, 0.012);
    CHECK(std::abs(s.alpha_bar[0] - (1.0 - 0.00085)) < 1e-12);
}

TEST_CASE("T=3 schedule matches independent hand computation") {
    const double beta_start = 0.00085, beta_end = 0.012;
    // independent oracle: scaled-linear betas, cumprod, affine rescale of
    // sqrt(alpha_bar)
    double b[3];
    const double r0 = std::sqrt(beta_start), r1 = std::sqrt(beta_end);
    for (int t = 0; t < 3; ++t) {
        const double r = r0 + (r1 - r0) * t / 2.0;
        b[t] = r * r;
    }
    double ab[3];
    ab[0] = 1 - b[0];
    ab[1] = ab[0] * (1 - b[1]);
    ab[2] = ab[1] * (1 - b[2]);
    double sq[3] = {std::sqrt(ab[0]), std::sqrt(ab[1]), std::sqrt(ab[2])};
    const double first = sq[0], last = sq[2];
    double expect[3];
    for (int t = 0; t < 3; ++t) {
        const double v = (sq[t] - last) * first / (first - last);
        expect[t] = v * v;
    }

    const auto s = make_zero_snr_schedule(3, beta_start, beta_end);
    for (int t = 0; t < 3; ++t) {
        CHECK(std::abs(s.alpha_bar[t] - expect[t]) <= 1e-12);
    }
    // betas recomputed from rescaled alpha_bars
    CHECK(std::abs(s.beta[0] - (1 - expect[0])) <= 1e-12);
    CHECK(std::abs(s.beta[1] - (1 - expect[1] / expect[0])) <= 1e-12);
    CHECK(s.beta[2] == 1.0);
}

TEST_CASE("T < 2 rejected") {
    CHECK_THROWS_AS(make_zero_snr_schedule(1), std::invalid_argument);
}

TEST_CASE("min-SNR weight formula") {
    const auto s = make_zero_snr_schedule(1000);
    // snr = 0 at terminal step -> weight 0
    CHECK(min_snr_weight(999, s) == 0.0);
    // direct formula on all t
    for (int t = 0; t < 1000; ++t) {
        const double snr = s.snr[t];
        const double expect = std::min(snr, 5.0) / (snr + 1.0);
        CHECK(min_snr_weight(t, s) == doctest::Approx(expect).epsilon(1e-15));
        CHECK(std::isfinite(min_snr_weight(t, s)));
    }
    // frozen examples: snr=1 -> 1/2, snr=100 -> 5/101 (synthetic schedules)
    NoiseSchedule toy;
    toy.T = 2;
    toy.alpha_bar = {0.5, 100.0 / 101.0};
    toy.snr = {1.0, 100.0};
    toy.beta = {0, 0};
    CHECK(min_snr_weight(0, toy) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(min_snr_weight(1, toy) == doctest::Approx(5.0 / 101.0).epsilon(1e-15));
}

TEST_CASE("add_noise and v_target identities") {
    const auto s = make_zero_snr_schedule(1000);
    Rng rng(11);
    auto x0 = make_tensor<double>({2, 3, 4, 4});
    auto eps = make_tensor<double>({2, 3, 4, 4});
    for (int64_t i = 0; i < x0->size(); ++i) {
        x0->value[i] = rng.uniform(-1, 1);
        eps->value[i] = rng.normal();
    }

    // alpha_bar == 1: x_t = x0, v = eps
    NoiseSchedule unit = s;
    unit.alpha_bar[0] = 1.0;
    auto xt0 = add_noise(x0, eps, 0, unit);
    auto v0 = v_target(x0, eps, 0, unit);
    CHECK((xt0->value - x0->value).abs().maxCoeff() == 0.0);
    CHECK((v0->value - eps->value).abs().maxCoeff() == 0.0);

    // terminal zero-SNR step: x_t = eps, v = -x0
    auto xtT = add_noise(x0, eps, 999, s);
    auto vT = v_target(x0, eps, 999, s);
    CHECK((xtT->value - eps->value).abs().maxCoeff() == 0.0);
    CHECK((vT->value + x0->value).abs().maxCoeff() == 0.0);

    // x0 recovery: x0 = sqrt(ab)*x_t - sqrt(1-ab)*v for all t
    for (int t : {0, 1, 250, 500, 998, 999}) {
        auto xt = add_noise(x0, eps, t, s);
        auto v = v_target(x0, eps, t, s);
        Eigen::ArrayXd rec = s.sqrt_ab(t) * xt->value - s.sqrt_1mab(t) * v->value;
        CHECK((rec - x0->value).abs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("x_t marginal statistics over 1e5 draws") {
    const auto s = make_zero_snr_schedule(1000);
    const int t = 600;
    const double x0 = 0.37;
    const int N = 100000;
    Rng rng(123);
    double sum = 0, sum2 = 0;
    for (int i = 0; i < N; ++i) {
        const double x = s.sqrt_ab(t) * x0 + s.sqrt_1mab(t) * rng.normal();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / N;
    const double var = sum2 / N - mean * mean;
    const double expect_mean = s.sqrt_ab(t) * x0;
    const double expect_var = 1.0 - s.alpha_bar[t];
    const double se_mean = std::sqrt(expect_var / N);
    const double se_var = expect_var * std::sqrt(2.0 / (N - 1));
    CHECK(std::abs(mean - expect_mean) < 3 * se_mean);
    CHECK(std::abs(var - expect_var) < 3 * se_var);
}

TEST_CASE("cfg_combine") {
    Rng rng(5);
    auto a = make_tensor<double>({8});
    auto b = make_tensor<double>({8});
    for (int i = 0; i < 8; ++i) {
        a->value[i] = rng.normal();
        b->value[i] = rng.normal();
    }
    auto s1 = cfg_combine(a, b, 1.0);
    CHECK((s1->value - a->value).abs().maxCoeff() == 0.0);
    auto s0 = cfg_combine(a, b, 0.0);
    CHECK((s0->value - b->value).abs().maxCoeff() == 0.0);
    auto same = cfg_combine(a, a, 7.3);
    CHECK((same->value - a->value).abs().maxCoeff() == 0.0);
    auto c = make_tensor<double>({4});
    CHECK_THROWS_AS((void)cfg_combine(a, c, 2.0), std::invalid_argument);
}
