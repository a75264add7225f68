#include "wcs/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "wcs/errors.hpp"

namespace wcs {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kPeak = 255.0;

void check_same_dims(const Image& a, const Image& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError("image dimensions differ: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                             " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    if (a.empty()) throw ArgumentError("empty image");
}

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> taps{};
    double sum = 0.0;
    for (std::size_t i = 0; i < kWindow; ++i) {
        const double x = static_cast<double>(i) - 5.0;
        taps[i] = std::exp(-(x * x) / (2.0 * kSigma * kSigma));
        sum += taps[i];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Separable 'valid' Gaussian filtering of a rows x cols field.
std::vector<double> filter_valid(const std::vector<double>& f, std::size_t rows, std::size_t cols,
                                 const std::array<double, kWindow>& taps) {
    const std::size_t out_cols = cols - kWindow + 1;
    const std::size_t out_rows = rows - kWindow + 1;
    std::vector<double> horiz(rows * out_cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < out_cols; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * f[r * cols + c + k];
            horiz[r * out_cols + c] = acc;
        }
    }
    std::vector<double> out(out_rows * out_cols, 0.0);
    for (std::size_t r = 0; r < out_rows; ++r) {
        for (std::size_t c = 0; c < out_cols; ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < kWindow; ++k) acc += taps[k] * horiz[(r + k) * out_cols + c];
            out[r * out_cols + c] = acc;
        }
    }
    return out;
}

}  // namespace

double mse_8bit(const Image& ref, const Image& test) {
    check_same_dims(ref, test);
    double acc = 0.0;
    const auto a = ref.data();
    const auto b = test.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = kPeak * (a[i] - b[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.size());
}

double psnr(const Image& ref, const Image& test) {
    const double mse = mse_8bit(ref, test);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(kPeak * kPeak / mse);
}

double ssim(const Image& ref, const Image& test) {
    check_same_dims(ref, test);
    if (ref.rows() < kWindow || ref.cols() < kWindow) {
        throw DimensionError("ssim: image smaller than the 11x11 window");
    }
    const std::size_t rows = ref.rows(), cols = ref.cols();
    std::vector<double> x(ref.size()), y(ref.size()), xx(ref.size()), yy(ref.size()), xy(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        x[i] = kPeak * ref.data()[i];
        y[i] = kPeak * test.data()[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto taps = gaussian_taps();
    const auto mu_x = filter_valid(x, rows, cols, taps);
    const auto mu_y = filter_valid(y, rows, cols, taps);
    const auto e_xx = filter_valid(xx, rows, cols, taps);
    const auto e_yy = filter_valid(yy, rows, cols, taps);
    const auto e_xy = filter_valid(xy, rows, cols, taps);

    const double c1 = (0.01 * kPeak) * (0.01 * kPeak);
    const double c2 = (0.03 * kPeak) * (0.03 * kPeak);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
        const double mx = mu_x[i], my = mu_y[i];
        const double vx = e_xx[i] - mx * mx;
        const double vy = e_yy[i] - my * my;
        const double cov = e_xy[i] - mx * my;
        acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    return acc / static_cast<double>(mu_x.size());
}

QualityReport evaluate(const Image& ref, const Image& test) {
    return QualityReport{psnr(ref, test), ssim(ref, test)};
}

}  // namespace wcs
