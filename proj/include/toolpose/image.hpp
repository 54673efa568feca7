#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "toolpose/geometry.hpp"

namespace toolpose {

/// Row-major H x W x C image of doubles.
class Image {
  public:
    Image() = default;
    Image(int width, int height, int channels = 3, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool same_shape(const Image& o) const {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    double& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
    double operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
    double* pixel(int x, int y) { return data_.data() + index(x, y, 0); }
    const double* pixel(int x, int y) const { return data_.data() + index(x, y, 0); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

  private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(channels_) +
               static_cast<std::size_t>(c);
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
};

class Mask {
  public:
    Mask() = default;
    Mask(int width, int height, bool fill = false)
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

    int width() const { return width_; }
    int height() const { return height_; }
    bool operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
    std::size_t count() const;
    bool operator==(const Mask&) const = default;

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Observed or rendered RGB frame, channel values in [0, 1].
struct Frame {
    Image pixels;
    std::optional<Mask> mask;

    /// Throws InvalidArgument on out-of-range values or a mismatched mask.
    void validate() const;
};

/// 8-bit RGB PNG; values are rounded from [0, 1] to [0, 255].
void write_png(const std::filesystem::path& path, const Image& rgb);
Image read_png(const std::filesystem::path& path);

/// Binary PGM (P5); nonzero pixels are true. Masks are written as 0 / 255.
void write_pgm(const std::filesystem::path& path, const Mask& mask);
Mask read_pgm(const std::filesystem::path& path);

/// Box-filtered reduction by an integer factor; trailing rows and columns that
/// do not fill a whole block are dropped.
Image downsample(const Image& img, int factor);
/// A block is true when at least half of its pixels are.
Mask downsample(const Mask& mask, int factor);

/// Stored 8-bit value of a channel in [0, 1].
inline double quantize_unit(double v) {
    const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    return static_cast<double>(static_cast<int>(c * 255.0 + 0.5)) / 255.0;
}

}  // namespace toolpose
