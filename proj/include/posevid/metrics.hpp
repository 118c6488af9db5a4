#ifndef POSEVID_METRICS_HPP
#define POSEVID_METRICS_HPP

#include <cmath>
#include <vector>

#include "posevid/image.hpp"
#include "posevid/render.hpp"

namespace posevid {

constexpr double kPsnrCap = 99.0;  // sentinel for identical images

// PSNR on the [0,255] scale: 10*log10(255^2 / MSE); identical inputs report
// the 99 dB cap.
inline double metric_psnr(const ImageU8& a, const ImageU8& b) {
    require(a.height == b.height && a.width == b.width, "metric_psnr: shape mismatch");
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        se += d * d;
    }
    if (se == 0.0) return kPsnrCap;
    const double mse = se / double(a.data.size());
    return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

// PSNR restricted to a pixel box (inclusive). Empty box -> cap.
inline double metric_psnr_box(const ImageU8& a, const ImageU8& b, const PixelBox& box) {
    require(a.height == b.height && a.width == b.width, "metric_psnr_box: shape mismatch");
    if (box.empty()) return kPsnrCap;
    double se = 0.0;
    int64_t n = 0;
    for (int y = box.y0; y <= box.y1; ++y) {
        for (int x = box.x0; x <= box.x1; ++x) {
            const uint8_t* pa = a.px(y, x);
            const uint8_t* pb = b.px(y, x);
            for (int c = 0; c < 3; ++c) {
                const double d = double(pa[c]) - double(pb[c]);
                se += d * d;
                ++n;
            }
        }
    }
    if (se == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / (se / double(n))));
}

inline double mean_psnr(const std::vector<ImageU8>& a, const std::vector<ImageU8>& b) {
    require(a.size() == b.size() && !a.empty(), "mean_psnr: length mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += metric_psnr(a[i], b[i]);
    return acc / double(a.size());
}

// Mean squared second temporal difference on the [0,1] scale; 0 for constant
// or linearly ramping videos.
inline double metric_jerk(const std::vector<ImageU8>& video) {
    if (video.size() < 3) return 0.0;
    double acc = 0.0;
    int64_t n = 0;
    for (size_t f = 1; f + 1 < video.size(); ++f) {
        const auto& prev = video[f - 1].data;
        const auto& cur = video[f].data;
        const auto& next = video[f + 1].data;
        for (size_t i = 0; i < cur.size(); ++i) {
            const double d =
                (double(next[i]) - 2.0 * double(cur[i]) + double(prev[i])) / 255.0;
            acc += d * d;
            ++n;
        }
    }
    return acc / double(n);
}

}  // namespace posevid

#endif
