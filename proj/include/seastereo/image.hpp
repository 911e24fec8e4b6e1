#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace seastereo {

// Dense row-major image, `channels` interleaved floats per pixel.
// Color images hold values in [0,1]; single-channel maps (depth, disparity)
// hold whatever unit the producer documents.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.f)
        : height(h), width(w), channels(c), data(size_t(h) * w * c, fill) {}

    float& at(int y, int x, int c = 0) {
        return data[(size_t(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c = 0) const {
        return data[(size_t(y) * width + x) * channels + c];
    }
    size_t numel() const { return data.size(); }
    bool empty() const { return data.empty(); }
};

// Bilinear sample with edge clamping; `x`,`y` in pixel coordinates where
// integer coordinates land on pixel centers.
float sample_bilinear(const Image& img, float x, float y, int c);

// Area average over an integer factor. Dimensions must divide evenly.
Image downsample_area(const Image& img, int factor);

// 8-bit RGB PNG round trip. Values are clamped to [0,1] and quantized on
// write; read returns values in [0,1].
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

}  // namespace seastereo
