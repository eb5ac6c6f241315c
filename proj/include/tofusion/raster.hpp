#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace tofusion {

// Invalid depth pixels carry a quiet NaN in memory; on disk the reserved bit
// pattern 0x7FC00000 (see io.hpp).
inline float invalid_depth() { return std::numeric_limits<float>::quiet_NaN(); }

inline bool depth_valid(float v) { return std::isfinite(v); }

// Single-channel metric depth raster, row-major, top-left origin.
class DepthMap {
public:
    DepthMap() = default;
    DepthMap(int width, int height, float fill = invalid_depth())
        : width_(width), height_(height) {
        if (width < 1 || height < 1) throw std::invalid_argument("DepthMap: non-positive size");
        values_.assign(static_cast<size_t>(width) * height, fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return values_.size(); }

    float at(int x, int y) const { return values_[idx(x, y)]; }
    float& at(int x, int y) { return values_[idx(x, y)]; }
    bool valid(int x, int y) const { return depth_valid(at(x, y)); }
    void invalidate(int x, int y) { at(x, y) = invalid_depth(); }

    const std::vector<float>& values() const { return values_; }
    std::vector<float>& values() { return values_; }

    int valid_count() const {
        int n = 0;
        for (float v : values_) n += depth_valid(v) ? 1 : 0;
        return n;
    }

    size_t idx(int x, int y) const { return static_cast<size_t>(y) * width_ + x; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> values_;
};

// Relative (scale-free) depth shares the raster layout and invalid sentinel.
using RelDepthMap = DepthMap;

class Mask {
public:
    Mask() = default;
    Mask(int width, int height, bool fill = false)
        : width_(width), height_(height),
          bits_(static_cast<size_t>(width) * height, fill ? 1 : 0) {}

    int width() const { return width_; }
    int height() const { return height_; }

    bool at(int x, int y) const { return bits_[idx(x, y)] != 0; }
    void set(int x, int y, bool v) { bits_[idx(x, y)] = v ? 1 : 0; }

    int count() const {
        int n = 0;
        for (auto b : bits_) n += b;
        return n;
    }

    const std::vector<std::uint8_t>& bits() const { return bits_; }

    size_t idx(int x, int y) const { return static_cast<size_t>(y) * width_ + x; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

// Derives the validity mask of a depth map.
inline Mask valid_mask(const DepthMap& d) {
    Mask m(d.width(), d.height());
    for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x) m.set(x, y, d.valid(x, y));
    return m;
}

// Interleaved RGB float image, channels in [0, 1].
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int width, int height)
        : width_(width), height_(height),
          values_(static_cast<size_t>(width) * height * 3, 0.0f) {}

    int width() const { return width_; }
    int height() const { return height_; }

    float at(int x, int y, int c) const { return values_[idx(x, y, c)]; }
    float& at(int x, int y, int c) { return values_[idx(x, y, c)]; }

    // Rec.601 luma.
    float luminance(int x, int y) const {
        return 0.299f * at(x, y, 0) + 0.587f * at(x, y, 1) + 0.114f * at(x, y, 2);
    }

    const std::vector<float>& values() const { return values_; }
    std::vector<float>& values() { return values_; }

    size_t idx(int x, int y, int c) const {
        return (static_cast<size_t>(y) * width_ + x) * 3 + c;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> values_;
};

}  // namespace tofusion
