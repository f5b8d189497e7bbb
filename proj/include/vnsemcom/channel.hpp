#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "vnsemcom/errors.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

enum class FadingKind { AwgnOnly, Rayleigh, Rician };

inline FadingKind fading_kind_from_string(std::string_view s) {
    if (s == "awgn_only") return FadingKind::AwgnOnly;
    if (s == "rayleigh") return FadingKind::Rayleigh;
    if (s == "rician") return FadingKind::Rician;
    throw ConfigError("unknown channel kind: " + std::string(s));
}

inline std::string to_string(FadingKind k) {
    switch (k) {
    case FadingKind::AwgnOnly: return "awgn_only";
    case FadingKind::Rayleigh: return "rayleigh";
    case FadingKind::Rician: return "rician";
    }
    return "?";
}

/// Flat block-fading channel description. Rician models the legitimate
/// line-of-sight link, Rayleigh the eavesdropper link without one.
/// snr_db = +infinity disables noise entirely (test sentinel).
struct ChannelParams {
    FadingKind kind = FadingKind::AwgnOnly;
    double k_factor = 0.0; // linear Rician K, ignored unless kind == Rician
    double snr_db = 15.0;

    bool noise_disabled() const { return std::isinf(snr_db) && snr_db > 0; }

    void validate() const {
        if (k_factor < 0.0) throw ConfigError("k_factor must be >= 0");
    }
};

struct ChannelRealization {
    double h_re = 1.0;
    double h_im = 0.0;
    double noise_power = 0.0; // per complex symbol

    double gain_magnitude() const { return std::hypot(h_re, h_im); }
};

/// One block-fading draw, normalized so E|h|^2 = 1 for every kind and K.
inline ChannelRealization sample_fading(const ChannelParams& params, RngStream& rng) {
    params.validate();
    ChannelRealization r;
    switch (params.kind) {
    case FadingKind::AwgnOnly:
        r.h_re = 1.0;
        r.h_im = 0.0;
        break;
    case FadingKind::Rayleigh: {
        const double inv = 1.0 / std::sqrt(2.0);
        r.h_re = rng.standard_normal() * inv;
        r.h_im = rng.standard_normal() * inv;
        break;
    }
    case FadingKind::Rician: {
        const double k = params.k_factor;
        const double los = std::sqrt(k / (k + 1.0));
        const double scatter = 1.0 / std::sqrt(2.0 * (k + 1.0));
        r.h_re = los + rng.standard_normal() * scatter;
        r.h_im = rng.standard_normal() * scatter;
        break;
    }
    }
    return r;
}

struct TransmitResult {
    Tensor received;
    ChannelRealization realization;
};

/// Send a real tensor as interleaved complex pairs through y = h*x + n and
/// zero-forcing equalize with the receiver's own h. Noise power tracks the
/// empirical power of this transmission: noise_power = mean per-symbol
/// signal power / 10^(snr_db/10), circular Gaussian with per-dimension
/// variance noise_power/2. A deep fade (|h| < 1e-9) is resampled once,
/// then reported as an error.
inline TransmitResult transmit(const Tensor& signal, const ChannelParams& params,
                               RngStream& rng) {
    if (signal.empty()) throw DimensionError("transmit: signal is empty");
    params.validate();

    const std::size_t n = signal.size();
    const std::size_t padded = n % 2 == 0 ? n : n + 1;

    ChannelRealization real = sample_fading(params, rng);
    if (real.gain_magnitude() < 1e-9) {
        real = sample_fading(params, rng);
        if (real.gain_magnitude() < 1e-9) {
            throw DeepFadeError("channel gain below 1e-9 after one resample");
        }
    }

    double sym_power = 0.0;
    for (double v : signal.data) sym_power += v * v;
    sym_power /= static_cast<double>(padded) / 2.0; // mean |x|^2 per complex symbol

    const bool noiseless = params.noise_disabled();
    real.noise_power = noiseless ? 0.0 : sym_power / std::pow(10.0, params.snr_db / 10.0);
    const double nstd = noiseless ? 0.0 : std::sqrt(real.noise_power / 2.0);

    const double h2 = real.h_re * real.h_re + real.h_im * real.h_im;
    TransmitResult out;
    out.realization = real;
    out.received = Tensor::zeros(signal.shape);
    for (std::size_t s = 0; s < padded / 2; ++s) {
        const double xr = signal[2 * s];
        const double xi = 2 * s + 1 < n ? signal[2 * s + 1] : 0.0;
        double yr = real.h_re * xr - real.h_im * xi;
        double yi = real.h_re * xi + real.h_im * xr;
        if (!noiseless) {
            yr += nstd * rng.standard_normal();
            yi += nstd * rng.standard_normal();
        }
        // zero-forcing: y / h
        const double er = (yr * real.h_re + yi * real.h_im) / h2;
        const double ei = (yi * real.h_re - yr * real.h_im) / h2;
        out.received[2 * s] = er;
        if (2 * s + 1 < n) out.received[2 * s + 1] = ei;
    }
    return out;
}

inline constexpr std::size_t kCsiFeatureDim = 5;

/// Fixed-length channel descriptor used to condition the noise generator:
/// [K/(K+1), snr_db/30, kind one-hot(awgn, rayleigh, rician)]. The SNR
/// term is clamped to [-30, 60] dB so the noiseless sentinel stays finite.
inline Tensor csi_features(const ChannelParams& params) {
    params.validate();
    Tensor f = Tensor::zeros({kCsiFeatureDim});
    const double k = params.kind == FadingKind::Rician ? params.k_factor : 0.0;
    f[0] = k / (k + 1.0);
    const double snr = std::max(-30.0, std::min(60.0, params.snr_db));
    f[1] = snr / 30.0;
    switch (params.kind) {
    case FadingKind::AwgnOnly: f[2] = 1.0; break;
    case FadingKind::Rayleigh: f[3] = 1.0; break;
    case FadingKind::Rician: f[4] = 1.0; break;
    }
    return f;
}

} // namespace vnsemcom
