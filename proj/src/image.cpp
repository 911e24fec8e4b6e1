#include "seastereo/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "seastereo/error.hpp"

namespace seastereo {

float sample_bilinear(const Image& img, float x, float y, int c) {
    x = std::clamp(x, 0.f, float(img.width - 1));
    y = std::clamp(y, 0.f, float(img.height - 1));
    int x0 = int(std::floor(x));
    int y0 = int(std::floor(y));
    int x1 = std::min(x0 + 1, img.width - 1);
    int y1 = std::min(y0 + 1, img.height - 1);
    float fx = x - float(x0);
    float fy = y - float(y0);
    float v00 = img.at(y0, x0, c), v01 = img.at(y0, x1, c);
    float v10 = img.at(y1, x0, c), v11 = img.at(y1, x1, c);
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

Image downsample_area(const Image& img, int factor) {
    if (factor == 1) return img;
    if (img.height % factor != 0 || img.width % factor != 0)
        raise(ErrorCode::Internal, "downsample_area: dims not divisible by factor");
    Image out(img.height / factor, img.width / factor, img.channels);
    const float inv = 1.f / float(factor * factor);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                float acc = 0.f;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += img.at(y * factor + dy, x * factor + dx, c);
                out.at(y, x, c) = acc * inv;
            }
    return out;
}

namespace {
struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
}  // namespace

void write_png(const std::string& path, const Image& img) {
    if (img.channels != 3)
        raise(ErrorCode::Internal, "write_png expects a 3-channel image: " + path);
    std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) raise(ErrorCode::Io, "cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) raise(ErrorCode::Internal, "libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        raise(ErrorCode::Io, "png write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);

    std::vector<png_byte> row(size_t(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = std::clamp(img.at(y, x, c), 0.f, 1.f);
                row[size_t(x) * 3 + c] = png_byte(std::lround(v * 255.f));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
    std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) raise(ErrorCode::Io, "cannot open: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (!png || !info) raise(ErrorCode::Internal, "libpng init failed");
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        raise(ErrorCode::Data, "malformed png: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    int w = int(png_get_image_width(png, info));
    int h = int(png_get_image_height(png, info));
    Image img(h, w, 3);
    std::vector<png_byte> row(size_t(w) * 3);
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = float(row[size_t(x) * 3 + c]) / 255.f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace seastereo
