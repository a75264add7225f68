#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wcs {

/// Row-major grayscale image with intensities nominally in [0, 1].
class Image {
public:
    Image() = default;
    Image(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), pixels_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return pixels_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return pixels_[r * cols_ + c]; }

    std::span<double> data() noexcept { return pixels_; }
    std::span<const double> data() const noexcept { return pixels_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> pixels_;
};

}  // namespace wcs
