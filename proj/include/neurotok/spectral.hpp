#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "neurotok/errors.hpp"
#include "neurotok/types.hpp"

namespace neurotok {

// Retained DFT bins are k = 1 .. w/2-1: DC carries no oscillatory phase and the
// Nyquist bin is real-valued, so neither contributes a usable phase target.
inline int spectral_bins(int w) { return w / 2 - 1; }

// Real-input DFT expressed as two basis products so a whole P x w patch matrix
// becomes two GEMMs. X_k = patches * (cos_k - i sin_k).
struct DftBasis {
    int w = 0;
    int bins = 0;
    Mat cos_basis;  // w x F
    Mat sin_basis;  // w x F

    explicit DftBasis(int patch_len) : w(patch_len), bins(spectral_bins(patch_len)) {
        if (patch_len < 4 || patch_len % 2 != 0)
            throw usage_error("dft: patch length must be even and at least 4");
        cos_basis.resize(w, bins);
        sin_basis.resize(w, bins);
        for (int n = 0; n < w; ++n) {
            for (int k = 1; k <= bins; ++k) {
                const double angle = 2.0 * std::numbers::pi * k * n / w;
                cos_basis(n, k - 1) = std::cos(angle);
                sin_basis(n, k - 1) = std::sin(angle);
            }
        }
    }
};

struct SpectralTarget {
    Mat amplitude;  // P x F, scaled 2/w so a unit sinusoid has amplitude 1
    Mat phase;      // P x F, radians in (-pi, pi], 0 where the bin is empty
    Mat phase_sin;  // P x F
    Mat phase_cos;  // P x F
    int bins = 0;
};

inline std::pair<double, double> phase_encode(double phase) {
    return {std::sin(phase), std::cos(phase)};
}

// Smallest absolute angular distance, wrap-aware: min_k |a - b + 2 pi k|.
inline double wrapped_angle_error(double predicted, double actual) {
    return std::abs(std::remainder(predicted - actual, 2.0 * std::numbers::pi));
}

inline SpectralTarget spectral_targets(const Mat& patches, const DftBasis& basis) {
    if (patches.cols() != basis.w) throw usage_error("dft: patch length does not match basis");
    if (!patches.allFinite()) throw data_error("dft: non-finite value in patches");
    const Mat re = patches * basis.cos_basis;
    const Mat im = -(patches * basis.sin_basis);

    SpectralTarget target;
    target.bins = basis.bins;
    const double scale = 2.0 / basis.w;
    target.amplitude = scale * (re.array().square() + im.array().square()).sqrt();
    target.phase.resize(re.rows(), re.cols());
    target.phase_sin.resize(re.rows(), re.cols());
    target.phase_cos.resize(re.rows(), re.cols());
    for (Eigen::Index r = 0; r < re.rows(); ++r) {
        for (Eigen::Index k = 0; k < re.cols(); ++k) {
            const double mag = std::hypot(re(r, k), im(r, k));
            double phi = mag < 1e-12 ? 0.0 : std::atan2(im(r, k), re(r, k));
            if (phi <= -std::numbers::pi) phi = std::numbers::pi;  // keep (-pi, pi]
            target.phase(r, k) = phi;
            auto [s, c] = phase_encode(phi);
            target.phase_sin(r, k) = s;
            target.phase_cos(r, k) = c;
        }
    }
    return target;
}

inline SpectralTarget dft_features(const Vec& patch) {
    DftBasis basis(static_cast<int>(patch.size()));
    return spectral_targets(patch.transpose(), basis);
}

// Time-domain signal from retained-bin amplitude and phase; DC and Nyquist are
// zero by the bin policy, so this reconstructs the band-limited component.
inline Mat inverse_from_bins(const Mat& amplitude, const Mat& phase, const DftBasis& basis) {
    if (amplitude.rows() != phase.rows() || amplitude.cols() != phase.cols() ||
        amplitude.cols() != basis.bins)
        throw usage_error("idft: amplitude/phase shapes do not match basis");
    // x[n] = sum_k A_k cos(2 pi k n / w + phi_k)
    //      = (A cos phi) . cos_basis_row(n) - (A sin phi) . sin_basis_row(n)
    const Mat a_cos = amplitude.array() * phase.array().cos();
    const Mat a_sin = amplitude.array() * phase.array().sin();
    return a_cos * basis.cos_basis.transpose() - a_sin * basis.sin_basis.transpose();
}

// Mask of bins whose target amplitude is significant for the patch; phase
// terms are meaningless on (near-)empty bins and are excluded from losses.
inline Mat amplitude_mask(const Mat& target_amplitude, double relative_threshold = 1e-6) {
    Mat mask(target_amplitude.rows(), target_amplitude.cols());
    for (Eigen::Index r = 0; r < target_amplitude.rows(); ++r) {
        const double cutoff = relative_threshold * target_amplitude.row(r).maxCoeff();
        for (Eigen::Index k = 0; k < target_amplitude.cols(); ++k)
            mask(r, k) = (target_amplitude(r, k) >= cutoff && target_amplitude(r, k) > 0.0) ? 1.0 : 0.0;
    }
    return mask;
}

}  // namespace neurotok
