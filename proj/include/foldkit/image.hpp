#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "foldkit/common.hpp"
#include "foldkit/tensor.hpp"
#include "foldkit/vec.hpp"

namespace foldkit {

// RGB image, channels in [0,1], row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(size_t(3) * size_t(w) * size_t(h), 0.0f) {}

    float* pixel(int u, int v) { return rgb.data() + 3 * (size_t(v) * size_t(width) + size_t(u)); }
    const float* pixel(int u, int v) const {
        return rgb.data() + 3 * (size_t(v) * size_t(width) + size_t(u));
    }
};

// Binary PPM (P6, maxval 255).
inline std::vector<unsigned char> encode_ppm(const Image& img) {
    const std::string header =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(out.size() + img.rgb.size());
    for (float c : img.rgb) {
        const double clamped = std::clamp(static_cast<double>(c), 0.0, 1.0);
        out.push_back(static_cast<unsigned char>(std::lround(clamped * 255.0)));
    }
    return out;
}

inline Image decode_ppm(const std::vector<unsigned char>& bytes, const std::string& name) {
    size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        }
        std::string t;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(char(bytes[pos++]));
        return t;
    };
    if (token() != "P6") throw IoError("ppm '" + name + "': not a binary P6 file");
    const std::string ws = token(), hs = token(), maxs = token();
    if (ws.empty() || hs.empty() || maxs.empty())
        throw IoError("ppm '" + name + "': truncated header");
    const int w = std::stoi(ws), h = std::stoi(hs), maxval = std::stoi(maxs);
    if (maxval != 255) throw IoError("ppm '" + name + "': expected maxval 255");
    ++pos;  // single whitespace after maxval
    const size_t need = size_t(3) * size_t(w) * size_t(h);
    if (bytes.size() - pos < need) throw IoError("ppm '" + name + "': truncated pixel data");
    Image img(w, h);
    for (size_t i = 0; i < need; ++i)
        img.rgb[i] = static_cast<float>(bytes[pos + i]) / 255.0f;
    return img;
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + path.string() + "'");
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_ppm(const Image& img, const std::filesystem::path& path) {
    write_file(path, encode_ppm(img));
}

inline Image read_ppm(const std::filesystem::path& path) {
    return decode_ppm(read_file(path), path.string());
}

inline Tensor<float> image_to_tensor(const Image& img) {
    Tensor<float> t({3, img.height, img.width});
    const int64_t plane = int64_t(img.width) * img.height;
    for (int64_t p = 0; p < plane; ++p)
        for (int64_t c = 0; c < 3; ++c)
            t[c * plane + p] = img.rgb[size_t(3 * p + c)];
    return t;
}

// Bilinear resize with the same (dst+0.5)*scale-0.5 source mapping the
// upsampling layer uses; annotation coordinates scale by the plain size
// ratio.
inline Image resize_bilinear(const Image& src, int new_w, int new_h) {
    Image dst(new_w, new_h);
    const double sx = static_cast<double>(src.width) / new_w;
    const double sy = static_cast<double>(src.height) / new_h;
    for (int v = 0; v < new_h; ++v) {
        const double fy = (v + 0.5) * sy - 0.5;
        const int64_t y0 = std::clamp<int64_t>(int64_t(std::floor(fy)), 0, src.height - 1);
        const int64_t y1 = std::min<int64_t>(y0 + 1, src.height - 1);
        const double wy = std::clamp(fy - std::floor(fy), 0.0, 1.0);
        for (int u = 0; u < new_w; ++u) {
            const double fx = (u + 0.5) * sx - 0.5;
            const int64_t x0 = std::clamp<int64_t>(int64_t(std::floor(fx)), 0, src.width - 1);
            const int64_t x1 = std::min<int64_t>(x0 + 1, src.width - 1);
            const double wx = std::clamp(fx - std::floor(fx), 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double top = (1 - wx) * src.pixel(int(x0), int(y0))[c] +
                                   wx * src.pixel(int(x1), int(y0))[c];
                const double bot = (1 - wx) * src.pixel(int(x0), int(y1))[c] +
                                   wx * src.pixel(int(x1), int(y1))[c];
                dst.pixel(u, v)[c] = static_cast<float>((1 - wy) * top + wy * bot);
            }
        }
    }
    return dst;
}

// Filled disc marker, used for keypoint overlays.
inline void draw_disc(Image& img, double u, double v, double radius, const Vec3& color) {
    const int u0 = std::max(0, int(std::floor(u - radius)));
    const int u1 = std::min(img.width - 1, int(std::ceil(u + radius)));
    const int v0 = std::max(0, int(std::floor(v - radius)));
    const int v1 = std::min(img.height - 1, int(std::ceil(v + radius)));
    for (int y = v0; y <= v1; ++y)
        for (int x = u0; x <= u1; ++x)
            if ((x - u) * (x - u) + (y - v) * (y - v) <= radius * radius) {
                float* p = img.pixel(x, y);
                p[0] = static_cast<float>(color.x);
                p[1] = static_cast<float>(color.y);
                p[2] = static_cast<float>(color.z);
            }
}

}  // namespace foldkit
