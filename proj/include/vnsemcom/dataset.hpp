#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "vnsemcom/errors.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

/// Procedurally generated grayscale image set. `targets` is normally empty,
/// meaning reconstruction targets equal the images; targeted poisoning
/// substitutes rows there.
struct SyntheticDataset {
    Tensor images; // [n x image_dim], values in [0,1]
    std::vector<int> labels;
    int class_count = 0;
    std::string generator_spec;
    Tensor targets; // empty, or [n x image_dim]

    std::size_t size() const { return labels.size(); }
    std::size_t image_dim() const { return images.cols(); }
    int image_side() const {
        return static_cast<int>(std::llround(std::sqrt(static_cast<double>(image_dim()))));
    }

    Tensor image(std::size_t i) const {
        auto r = images.row(i);
        return Tensor::from({r.size()}, std::vector<double>(r.begin(), r.end()));
    }

    Tensor target(std::size_t i) const {
        auto r = targets.empty() ? images.row(i) : targets.row(i);
        return Tensor::from({r.size()}, std::vector<double>(r.begin(), r.end()));
    }

    SyntheticDataset slice(std::size_t begin, std::size_t count) const {
        SyntheticDataset out;
        out.class_count = class_count;
        out.generator_spec = generator_spec;
        const std::size_t d = image_dim();
        out.images = Tensor::zeros({count, d});
        out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                          labels.begin() + static_cast<std::ptrdiff_t>(begin + count));
        std::copy_n(images.data.begin() + static_cast<std::ptrdiff_t>(begin * d),
                    count * d, out.images.data.begin());
        if (!targets.empty()) {
            out.targets = Tensor::zeros({count, d});
            std::copy_n(targets.data.begin() + static_cast<std::ptrdiff_t>(begin * d),
                        count * d, out.targets.data.begin());
        }
        return out;
    }
};

namespace detail {

// Renders one soft-edged shape. Classes: 0 horizontal bar, 1 cross,
// 2 hollow box, 3 diagonal band. Jitter is one pixel of position plus
// intensity wobble; enough variety for learning while keeping classes
// far apart relative to within-class spread.
inline void render_shape(std::vector<double>& img, int side, int cls, RngStream& rng) {
    const int offset_x = static_cast<int>(rng.index(3)) - 1;
    const int offset_y = static_cast<int>(rng.index(3)) - 1;
    const int thick = 4;
    const double intensity = rng.uniform(0.85, 1.0);
    const int c = side / 2;

    auto put = [&](int r, int col) {
        if (r >= 0 && r < side && col >= 0 && col < side)
            img[static_cast<std::size_t>(r) * side + col] = intensity;
    };

    switch (cls) {
    case 0: { // horizontal bar
        const int r0 = c + offset_y - thick / 2;
        for (int r = r0; r < r0 + thick; ++r)
            for (int col = 1; col < side - 1; ++col) put(r, col);
        break;
    }
    case 1: { // cross
        const int t = thick - 1;
        const int r0 = c + offset_y - t / 2;
        const int c0 = c + offset_x - t / 2;
        for (int r = r0; r < r0 + t; ++r)
            for (int col = 1; col < side - 1; ++col) put(r, col);
        for (int col = c0; col < c0 + t; ++col)
            for (int r = 1; r < side - 1; ++r) put(r, col);
        break;
    }
    case 2: { // hollow box
        const int half = side / 2 - 3;
        const int top = c + offset_y - half, bottom = c + offset_y + half;
        const int left = c + offset_x - half, right = c + offset_x + half;
        for (int r = top; r <= bottom; ++r) {
            for (int col = left; col <= right; ++col) {
                const bool border = r - top < 2 || bottom - r < 2 ||
                                    col - left < 2 || right - col < 2;
                if (border) put(r, col);
            }
        }
        break;
    }
    case 3: { // diagonal band
        for (int r = 0; r < side; ++r)
            for (int col = 0; col < side; ++col)
                if (std::abs(col - r - offset_x) < thick - 1) put(r, col);
        break;
    }
    default:
        throw ConfigError("shape class out of range: " + std::to_string(cls));
    }
}

inline void box_blur3(std::vector<double>& img, int side) {
    std::vector<double> src = img;
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            double acc = 0.0;
            int cnt = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr >= 0 && rr < side && cc >= 0 && cc < side) {
                        acc += src[static_cast<std::size_t>(rr) * side + cc];
                        ++cnt;
                    }
                }
            }
            img[static_cast<std::size_t>(r) * side + c] = acc / cnt;
        }
    }
}

} // namespace detail

inline constexpr int kShapeClassCount = 4;

/// Generators are named "shapes<side>", e.g. "shapes16": four soft-edged
/// shape classes (bar, cross, box, diagonal) with position/thickness/
/// intensity jitter and additive pixel noise. Labels cycle 0..3 so any
/// contiguous slice stays class-balanced up to remainder.
inline SyntheticDataset make_dataset(std::string_view spec, std::size_t n, RngStream& rng) {
    constexpr std::string_view prefix = "shapes";
    if (spec.substr(0, prefix.size()) != prefix) {
        throw ConfigError("unknown dataset generator: " + std::string(spec));
    }
    int side = 0;
    const auto* first = spec.data() + prefix.size();
    const auto* last = spec.data() + spec.size();
    auto [ptr, ec] = std::from_chars(first, last, side);
    if (ec != std::errc() || ptr != last || side < 8 || side > 64) {
        throw ConfigError("unknown dataset generator: " + std::string(spec) +
                          " (expected shapes<side>, side in [8,64])");
    }
    if (n < static_cast<std::size_t>(kShapeClassCount)) {
        throw ConfigError("dataset size must be >= class count");
    }

    const std::size_t dim = static_cast<std::size_t>(side) * side;
    SyntheticDataset ds;
    ds.class_count = kShapeClassCount;
    ds.generator_spec = std::string(spec);
    ds.images = Tensor::zeros({n, dim});
    ds.labels.resize(n);

    std::vector<double> canvas(dim);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % kShapeClassCount);
        ds.labels[i] = cls;
        std::fill(canvas.begin(), canvas.end(), 0.0);
        detail::render_shape(canvas, side, cls, rng);
        detail::box_blur3(canvas, side);
        for (std::size_t p = 0; p < dim; ++p) {
            double v = canvas[p] + 0.02 * rng.standard_normal();
            ds.images.at(i, p) = std::clamp(v, 0.0, 1.0);
        }
    }
    return ds;
}

/// Flat binary dump: magic "VNSD", u32 n, u32 image_side, u32 class_count
/// (little-endian), pixels as u8 row-major, then labels as u8.
inline void dump_dataset(const SyntheticDataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path.string());
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    out.write("VNSD", 4);
    put_u32(static_cast<std::uint32_t>(ds.size()));
    put_u32(static_cast<std::uint32_t>(ds.image_side()));
    put_u32(static_cast<std::uint32_t>(ds.class_count));
    for (double v : ds.images.data) {
        const auto q = static_cast<unsigned char>(std::clamp(
            static_cast<int>(std::lround(v * 255.0)), 0, 255));
        out.put(static_cast<char>(q));
    }
    for (int label : ds.labels) out.put(static_cast<char>(label));
    if (!out) throw IoError("write failed: " + path.string());
}

inline SyntheticDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for read: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "VNSD", 4) != 0) {
        throw IoError("bad magic in dataset file: " + path.string());
    }
    auto get_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    };
    const std::uint32_t n = get_u32();
    const std::uint32_t side = get_u32();
    const std::uint32_t classes = get_u32();
    const std::size_t dim = static_cast<std::size_t>(side) * side;

    SyntheticDataset ds;
    ds.class_count = static_cast<int>(classes);
    ds.generator_spec = "shapes" + std::to_string(side);
    ds.images = Tensor::zeros({n, dim});
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * dim; ++i) {
        const int c = in.get();
        if (c == EOF) throw IoError("truncated dataset file: " + path.string());
        ds.images.data[i] = static_cast<double>(c) / 255.0;
    }
    ds.labels.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const int c = in.get();
        if (c == EOF) throw IoError("truncated dataset file: " + path.string());
        ds.labels[i] = c;
    }
    return ds;
}

} // namespace vnsemcom
