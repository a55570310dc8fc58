#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "neurotok/errors.hpp"
#include "neurotok/types.hpp"

namespace neurotok {

enum class LossMode { baseline, circular };

inline const char* to_string(LossMode mode) {
    return mode == LossMode::baseline ? "baseline" : "circular";
}

struct LossReport {
    double amplitude_loss = 0.0;     // L_A
    double sin_loss = 0.0;           // L_sin
    double cos_loss = 0.0;           // L_cos
    double direct_phase_loss = 0.0;  // L_phi (diagnostic in circular mode)
    double quantization_loss = 0.0;  // L_Q
    double total = 0.0;
};

struct ScalarGrad {
    double value = 0.0;
    Mat grad;
};

namespace detail {
inline void require_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw usage_error(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
}
}  // namespace detail

// Sum_i ||A_hat_i - A_i||^2 with gradient 2(A_hat - A).
inline ScalarGrad amplitude_loss(const Mat& predicted, const Mat& target) {
    detail::require_same_shape(predicted, target, "amplitude_loss");
    ScalarGrad out;
    const Mat diff = predicted - target;
    out.value = diff.squaredNorm();
    out.grad = 2.0 * diff;
    return out;
}

// The unwrapped baseline objective: plain squared error between raw angles.
// No wrap handling — this is the discontinuous formulation kept for comparison.
inline ScalarGrad direct_phase_loss(const Mat& predicted_angle, const Mat& target_angle) {
    detail::require_same_shape(predicted_angle, target_angle, "direct_phase_loss");
    ScalarGrad out;
    const Mat diff = predicted_angle - target_angle;
    out.value = diff.squaredNorm();
    out.grad = 2.0 * diff;
    return out;
}

struct CircularLoss {
    double sin_loss = 0.0;
    double cos_loss = 0.0;
    Mat grad_sin;
    Mat grad_cos;
};

// Squared error against the unit-circle encoding of the target angle,
// restricted to bins whose target amplitude is significant. Predictions are
// unconstrained reals; nothing forces them onto the circle.
inline CircularLoss circular_phase_loss(const Mat& predicted_sin, const Mat& predicted_cos,
                                        const Mat& target_angle, const Mat& mask) {
    detail::require_same_shape(predicted_sin, predicted_cos, "circular_phase_loss");
    detail::require_same_shape(predicted_sin, target_angle, "circular_phase_loss");
    detail::require_same_shape(predicted_sin, mask, "circular_phase_loss");
    CircularLoss out;
    const Mat ds = (predicted_sin.array() - target_angle.array().sin()) * mask.array();
    const Mat dc = (predicted_cos.array() - target_angle.array().cos()) * mask.array();
    out.sin_loss = ds.squaredNorm();
    out.cos_loss = dc.squaredNorm();
    out.grad_sin = 2.0 * ds;
    out.grad_cos = 2.0 * dc;
    return out;
}

struct ChordIdentity {
    double lhs = 0.0;           // (sin a - sin b)^2 + (cos a - cos b)^2
    double rhs_cos_form = 0.0;  // 2 - 2 cos(a - b)
    double rhs_sin_form = 0.0;  // 4 sin^2((a - b) / 2)
};

// The squared chord length between unit-circle points at angles a and b,
// evaluated three algebraically equivalent ways.
inline ChordIdentity chord_identity(double angle_a, double angle_b) {
    ChordIdentity id;
    const double ds = std::sin(angle_a) - std::sin(angle_b);
    const double dc = std::cos(angle_a) - std::cos(angle_b);
    id.lhs = ds * ds + dc * dc;
    id.rhs_cos_form = 2.0 - 2.0 * std::cos(angle_a - angle_b);
    const double half = std::sin((angle_a - angle_b) / 2.0);
    id.rhs_sin_form = 4.0 * half * half;
    return id;
}

// Assembles the report for the configured objective. The direct phase term
// stays populated as a diagnostic in circular mode but is kept out of the total.
inline LossReport total_loss(LossMode mode, LossReport parts) {
    parts.total = mode == LossMode::circular
                      ? parts.amplitude_loss + parts.sin_loss + parts.cos_loss + parts.quantization_loss
                      : parts.amplitude_loss + parts.direct_phase_loss + parts.quantization_loss;
    return parts;
}

struct LandscapePoint {
    double delta_phi = 0.0;
    double direct_value = 0.0;
    double direct_grad = 0.0;
    double circular_value = 0.0;
    double circular_grad = 0.0;
};

// Both objectives as functions of the raw angle difference, evaluated on
// unwrapped representatives so the +-pi boundary blow-up of the direct loss
// is visible next to the bounded circular loss.
inline std::vector<LandscapePoint> loss_landscape(const std::vector<double>& delta_grid) {
    std::vector<LandscapePoint> table;
    table.reserve(delta_grid.size());
    for (double d : delta_grid) {
        if (std::abs(d) > 2.0 * std::numbers::pi + 1e-12)
            throw usage_error("landscape: grid point outside [-2pi, 2pi]");
        LandscapePoint p;
        p.delta_phi = d;
        p.direct_value = d * d;
        p.direct_grad = 2.0 * d;
        p.circular_value = 2.0 - 2.0 * std::cos(d);
        p.circular_grad = 2.0 * std::sin(d);
        table.push_back(p);
    }
    return table;
}

inline std::vector<double> landscape_grid(int points) {
    if (points < 1) throw usage_error("landscape: grid needs at least one point");
    if (points == 1) return {0.0};
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] =
            -2.0 * std::numbers::pi + 4.0 * std::numbers::pi * i / (points - 1);
    return grid;
}

}  // namespace neurotok
