#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "neurotok/corpus.hpp"
#include "neurotok/errors.hpp"
#include "neurotok/recording.hpp"
#include "neurotok/types.hpp"

namespace neurotok {

struct FilterSpec {
    double low_cut = 0.5;    // Hz
    double high_cut = 44.5;  // Hz
    int order = 4;           // per edge; the band is a highpass+lowpass cascade
    bool zero_phase = true;

    void validate(double sample_rate) const {
        if (order < 1) throw usage_error("filter: order must be positive");
        if (!(0.0 < low_cut && low_cut < high_cut && high_cut < sample_rate / 2.0))
            throw data_error("filter: need 0 < low_cut < high_cut < Nyquist (" +
                             std::to_string(sample_rate / 2.0) + " Hz)");
    }
};

namespace dsp {

struct Biquad {
    double b0 = 0, b1 = 0, b2 = 0;  // numerator
    double a1 = 0, a2 = 0;          // denominator (a0 normalized to 1)

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

// Butterworth sections from the analog prototype, bilinear-transformed with
// prewarp K = tan(pi fc / fs). Odd orders add one first-order section
// (expressed as a biquad with zero second coefficients).
inline std::vector<Biquad> butterworth(int order, double cutoff_hz, double sample_rate, bool highpass) {
    const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
    std::vector<Biquad> sections;
    for (int i = 1; i <= order / 2; ++i) {
        const double theta = std::numbers::pi * (2.0 * i - 1.0) / (2.0 * order);
        const double q = 1.0 / (2.0 * std::sin(theta));
        const double norm = 1.0 / (1.0 + k / q + k * k);
        Biquad s;
        if (highpass) {
            s.b0 = norm;
            s.b1 = -2.0 * norm;
            s.b2 = norm;
        } else {
            s.b0 = k * k * norm;
            s.b1 = 2.0 * s.b0;
            s.b2 = s.b0;
        }
        s.a1 = 2.0 * (k * k - 1.0) * norm;
        s.a2 = (1.0 - k / q + k * k) * norm;
        sections.push_back(s);
    }
    if (order % 2 == 1) {
        Biquad s;
        const double norm = 1.0 / (1.0 + k);
        if (highpass) {
            s.b0 = norm;
            s.b1 = -norm;
        } else {
            s.b0 = k * norm;
            s.b1 = s.b0;
        }
        s.a1 = (k - 1.0) * norm;
        sections.push_back(s);
    }
    return sections;
}

// Direct form II transposed, started from the steady state for the first
// sample so step content does not ring.
inline void filter_in_place(const std::vector<Biquad>& sections, std::vector<double>& x) {
    for (const auto& s : sections) {
        const double x0 = x.empty() ? 0.0 : x.front();
        const double y0 = s.dc_gain() * x0;
        double s1 = (s.b1 + s.b2) * x0 - (s.a1 + s.a2) * y0;
        double s2 = s.b2 * x0 - s.a2 * y0;
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + s1;
            s1 = s.b1 * in - s.a1 * out + s2;
            s2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
}

// Forward-backward pass over an odd-reflection padded copy of the segment.
inline void filtfilt(const std::vector<Biquad>& sections, std::vector<double>& x, int pad_len) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    if (n <= pad_len)
        throw data_error("filter: segment of " + std::to_string(n) +
                         " samples is too short for padding length " + std::to_string(pad_len));
    std::vector<double> ext(static_cast<std::size_t>(n + 2 * pad_len));
    for (std::ptrdiff_t i = 0; i < pad_len; ++i)
        ext[static_cast<std::size_t>(i)] = 2.0 * x[0] - x[static_cast<std::size_t>(pad_len - i)];
    for (std::ptrdiff_t i = 0; i < n; ++i) ext[static_cast<std::size_t>(pad_len + i)] = x[static_cast<std::size_t>(i)];
    for (std::ptrdiff_t i = 0; i < pad_len; ++i)
        ext[static_cast<std::size_t>(pad_len + n + i)] =
            2.0 * x[static_cast<std::size_t>(n - 1)] - x[static_cast<std::size_t>(n - 2 - i)];

    filter_in_place(sections, ext);
    std::reverse(ext.begin(), ext.end());
    filter_in_place(sections, ext);
    std::reverse(ext.begin(), ext.end());
    for (std::ptrdiff_t i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = ext[static_cast<std::size_t>(pad_len + i)];
}

inline double bessel_i0(double x) {
    // power series; converges quickly for the beta range used here
    double sum = 1.0, term = 1.0;
    for (int i = 1; i < 60; ++i) {
        term *= (x / (2.0 * i)) * (x / (2.0 * i));
        sum += term;
        if (term < 1e-18 * sum) break;
    }
    return sum;
}

}  // namespace dsp

// Zero-phase bandpass, applied per channel and per trial so no energy leaks
// across trial boundaries.
inline Recording bandpass(const Recording& rec, const FilterSpec& spec = {}) {
    spec.validate(rec.sample_rate);
    auto sections = dsp::butterworth(spec.order, spec.low_cut, rec.sample_rate, /*highpass=*/true);
    auto low = dsp::butterworth(spec.order, spec.high_cut, rec.sample_rate, /*highpass=*/false);
    sections.insert(sections.end(), low.begin(), low.end());
    const int pad_len = 3 * spec.order;

    Recording out = rec;
    for (int c = 0; c < rec.channels(); ++c) {
        for (const auto& [start, end] : rec.trials) {
            std::vector<double> seg(static_cast<std::size_t>(end - start));
            for (SampleIndex i = 0; i < end - start; ++i)
                seg[static_cast<std::size_t>(i)] = rec.data(c, static_cast<Eigen::Index>(start + i));
            if (spec.zero_phase) {
                dsp::filtfilt(sections, seg, pad_len);
            } else {
                dsp::filter_in_place(sections, seg);
            }
            for (SampleIndex i = 0; i < end - start; ++i)
                out.data(c, static_cast<Eigen::Index>(start + i)) = static_cast<float>(seg[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

// Linear-phase windowed-sinc rate conversion (Kaiser window), lowpassed below
// the output Nyquist when decimating. A 200 Hz -> 200 Hz call is the identity.
inline Recording resample(const Recording& rec, double target_rate = kCanonicalRate) {
    if (target_rate <= 0.0) throw usage_error("resample: target rate must be positive");
    if (rec.sample_rate <= 0.0) throw data_error("resample: source rate must be positive");
    if (rec.sample_rate == target_rate) return rec;

    const double ratio = target_rate / rec.sample_rate;
    const SampleIndex t_in = rec.samples();
    const SampleIndex t_out = static_cast<SampleIndex>(std::llround(static_cast<double>(t_in) * ratio));

    const double cutoff = 0.475 * std::min(1.0, ratio);  // cycles per input sample
    const int half_width = static_cast<int>(std::ceil(24.0 / std::min(1.0, ratio)));
    const double beta = 8.6;
    const double i0_beta = dsp::bessel_i0(beta);
    auto kernel = [&](double t) {
        const double u = t / half_width;
        if (std::abs(u) >= 1.0) return 0.0;
        const double window = dsp::bessel_i0(beta * std::sqrt(1.0 - u * u)) / i0_beta;
        const double arg = 2.0 * cutoff * t;
        const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
        return 2.0 * cutoff * sinc * window;
    };
    auto mirrored = [&](SampleIndex i) {
        while (i < 0 || i >= t_in) {
            if (i < 0) i = -i;
            if (i >= t_in) i = 2 * t_in - 2 - i;
        }
        return i;
    };

    Recording out;
    out.electrode_names = rec.electrode_names;
    out.sample_rate = target_rate;
    out.data.resize(rec.channels(), static_cast<Eigen::Index>(t_out));
    for (int c = 0; c < rec.channels(); ++c) {
        for (SampleIndex n = 0; n < t_out; ++n) {
            const double tau = static_cast<double>(n) / ratio;
            const auto first = static_cast<SampleIndex>(std::ceil(tau - half_width));
            const auto last = static_cast<SampleIndex>(std::floor(tau + half_width));
            double acc = 0.0;
            for (SampleIndex k = first; k <= last; ++k)
                acc += static_cast<double>(rec.data(c, static_cast<Eigen::Index>(mirrored(k)))) *
                       kernel(static_cast<double>(k) - tau);
            out.data(c, static_cast<Eigen::Index>(n)) = static_cast<float>(acc);
        }
    }
    for (const auto& [start, end] : rec.trials) {
        auto s = std::clamp<SampleIndex>(static_cast<SampleIndex>(std::llround(static_cast<double>(start) * ratio)), 0, t_out);
        auto e = std::clamp<SampleIndex>(static_cast<SampleIndex>(std::llround(static_cast<double>(end) * ratio)), 0, t_out);
        if (e > s) out.trials.emplace_back(s, e);
    }
    out.validate();
    return out;
}

// Common average reference over channels: each time column loses its mean.
// A single channel referenced against itself is all zeros.
inline Mat car(const Mat& channels_by_time) {
    if (channels_by_time.rows() < 2) return Mat::Zero(channels_by_time.rows(), channels_by_time.cols());
    return channels_by_time.rowwise() - channels_by_time.colwise().mean();
}

// Per-patch standardization with population (divide-by-n) standard deviation.
// Constant patches map to zeros rather than erroring.
inline Vec zscore_patch(const Vec& patch, double epsilon = 1e-8) {
    if (patch.size() < 2) throw usage_error("zscore: patch must have at least two samples");
    if (!patch.allFinite()) throw data_error("zscore: non-finite value in patch");
    const double mean = patch.mean();
    const double sd = std::sqrt((patch.array() - mean).square().mean());
    if (sd <= epsilon) return Vec::Zero(patch.size());
    return (patch.array() - mean) / sd;
}

// CAR across the n_channels patches that share a time window — the sample is
// channel-major, so window j of channel c is row c * n_windows + j.
inline void apply_car(PatchSample& sample) {
    const int w = static_cast<int>(sample.patches.cols());
    Mat group(sample.n_channels, w);
    for (int win = 0; win < sample.n_windows; ++win) {
        for (int c = 0; c < sample.n_channels; ++c)
            group.row(c) = sample.patches.row(c * sample.n_windows + win);
        group = car(group);
        for (int c = 0; c < sample.n_channels; ++c)
            sample.patches.row(c * sample.n_windows + win) = group.row(c);
    }
}

inline void apply_zscore(PatchSample& sample, double epsilon = 1e-8) {
    for (Eigen::Index r = 0; r < sample.patches.rows(); ++r)
        sample.patches.row(r) = zscore_patch(sample.patches.row(r).transpose(), epsilon).transpose();
}

}  // namespace neurotok
