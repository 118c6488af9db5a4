#ifndef POSEVID_IMAGE_HPP
#define POSEVID_IMAGE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "posevid/tensor.hpp"

namespace posevid {

// 8-bit RGB raster, row-major, interleaved channels.
struct ImageU8 {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;  // height*width*3

    ImageU8() = default;
    ImageU8(int h, int w) : height(h), width(w), data(size_t(h) * w * 3, 0) {}

    uint8_t* px(int y, int x) { return data.data() + (size_t(y) * width + x) * 3; }
    const uint8_t* px(int y, int x) const { return data.data() + (size_t(y) * width + x) * 3; }

    bool operator==(const ImageU8& o) const {
        return height == o.height && width == o.width && data == o.data;
    }

    bool all_black() const {
        for (uint8_t v : data) {
            if (v != 0) return false;
        }
        return true;
    }
};

// PNG io (lossless 8-bit RGB). Throws std::runtime_error on failure.
ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& img);

// [0,255] u8 -> [-1,1] float CHW tensor of shape [1,3,H,W]
template <typename S>
TensorPtr<S> image_to_tensor(const ImageU8& img) {
    auto t = make_tensor<S>({1, 3, img.height, img.width});
    const int64_t hw = int64_t(img.height) * img.width;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const uint8_t* p = img.px(y, x);
            const int64_t i = int64_t(y) * img.width + x;
            for (int c = 0; c < 3; ++c) {
                t->value[c * hw + i] = S(p[c]) / S(127.5) - S(1);
            }
        }
    }
    return t;
}

// [-1,1] float CHW (frame f of [F,3,H,W]) -> u8, clamped
template <typename S>
ImageU8 tensor_to_image(const TensorT<S>& t, int frame) {
    const int H = t.shape[2], W = t.shape[3];
    const int64_t hw = int64_t(H) * W;
    ImageU8 img(H, W);
    const int64_t base = int64_t(frame) * 3 * hw;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            uint8_t* p = img.px(y, x);
            const int64_t i = int64_t(y) * W + x;
            for (int c = 0; c < 3; ++c) {
                S v = t.value[base + c * hw + i];
                v = (v < S(-1)) ? S(-1) : (v > S(1) ? S(1) : v);
                p[c] = uint8_t(std::lround(double(v + S(1)) * 127.5));
            }
        }
    }
    return img;
}

}  // namespace posevid

#endif
