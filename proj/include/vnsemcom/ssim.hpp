#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "vnsemcom/errors.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

/// SSIM constants for unit-range images, with non-overlapping square
/// windows (the last window clipped when the side does not divide evenly).
struct SsimParams {
    double dynamic_range = 1.0;
    int window_side = 8;

    double c1() const { return (0.01 * dynamic_range) * (0.01 * dynamic_range); }
    double c2() const { return (0.03 * dynamic_range) * (0.03 * dynamic_range); }
};

/// Mean windowed structural similarity of two equal-shape square images.
/// Inputs are clipped to [0,1]; the result lies in [-1, 1] and equals 1
/// exactly when the images are identical.
inline double ssim(const Tensor& a, const Tensor& b, const SsimParams& p = {}) {
    if (a.shape != b.shape || a.size() != b.size()) {
        throw DimensionError("ssim shapes differ: " + shape_string(a) + " vs " +
                             shape_string(b));
    }
    const auto side_d = std::sqrt(static_cast<double>(a.size()));
    const int side = static_cast<int>(std::llround(side_d));
    if (static_cast<std::size_t>(side) * side != a.size()) {
        throw DimensionError("ssim expects square images, got " +
                             std::to_string(a.size()) + " pixels");
    }
    const int w = std::min(p.window_side, side);
    const double c1 = p.c1(), c2 = p.c2();

    auto clip = [](double v) { return std::clamp(v, 0.0, 1.0); };

    double total = 0.0;
    int windows = 0;
    for (int r0 = 0; r0 < side; r0 += w) {
        for (int col0 = 0; col0 < side; col0 += w) {
            const int rend = std::min(r0 + w, side);
            const int cend = std::min(col0 + w, side);
            const double npix = static_cast<double>((rend - r0) * (cend - col0));
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            for (int r = r0; r < rend; ++r) {
                for (int col = col0; col < cend; ++col) {
                    const double x = clip(a[static_cast<std::size_t>(r) * side + col]);
                    const double y = clip(b[static_cast<std::size_t>(r) * side + col]);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            const double mu_a = sa / npix, mu_b = sb / npix;
            const double var_a = saa / npix - mu_a * mu_a;
            const double var_b = sbb / npix - mu_b * mu_b;
            const double cov = sab / npix - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            ++windows;
        }
    }
    return total / windows;
}

} // namespace vnsemcom
