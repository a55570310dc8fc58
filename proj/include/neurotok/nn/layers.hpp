#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "neurotok/errors.hpp"
#include "neurotok/rng.hpp"
#include "neurotok/types.hpp"

namespace neurotok::nn {

// Every trainable tensor is a Mat (vectors as 1 x n); the registry walk fixes
// the order used by the optimizer, the gradient clip, and the checkpoint blob.
struct ParamRef {
    std::string name;
    Mat* value = nullptr;
    Mat* grad = nullptr;
};

using ParamRegistry = std::vector<ParamRef>;

inline void zero_grads(const ParamRegistry& params) {
    for (const auto& p : params) p.grad->setZero();
}

inline double grad_global_norm(const ParamRegistry& params) {
    double sum = 0.0;
    for (const auto& p : params) sum += p.grad->squaredNorm();
    return std::sqrt(sum);
}

inline Mat init_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng, 0.0, stddev);
    return m;
}

// ---------------------------------------------------------------------------
// GELU (exact erf form)
// ---------------------------------------------------------------------------

inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::inv_sqrt2)); }

inline double gelu_derivative(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(x * std::numbers::inv_sqrt2)) +
           x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline Mat gelu(const Mat& x) { return x.unaryExpr([](double v) { return gelu_scalar(v); }); }

inline Mat gelu_backward(const Mat& x, const Mat& dy) {
    return dy.array() * x.unaryExpr([](double v) { return gelu_derivative(v); }).array();
}

// ---------------------------------------------------------------------------
// Row-wise softmax
// ---------------------------------------------------------------------------

inline Mat softmax_rows(const Mat& x) {
    Mat y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        Eigen::ArrayXd e = (x.row(r).array() - m).exp();
        y.row(r) = (e / e.sum()).matrix();
    }
    return y;
}

inline Mat softmax_backward_rows(const Mat& y, const Mat& dy) {
    Mat dx(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = y.row(r).dot(dy.row(r));
        dx.row(r) = (y.row(r).array() * (dy.row(r).array() - dot)).matrix();
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Affine map y = x W + b
// ---------------------------------------------------------------------------

struct Linear {
    Mat weight;  // in x out
    Mat bias;    // 1 x out
    Mat grad_weight, grad_bias;
    bool use_bias = true;

    void init(int in, int out, Rng& rng, double stddev = 0.02, bool with_bias = true) {
        use_bias = with_bias;
        weight = init_normal(rng, in, out, stddev);
        bias = Mat::Zero(1, out);
        grad_weight = Mat::Zero(in, out);
        grad_bias = Mat::Zero(1, out);
    }

    Mat forward(const Mat& x) const {
        Mat y = x * weight;
        if (use_bias) y.rowwise() += bias.row(0);
        return y;
    }

    Mat backward(const Mat& x, const Mat& dy) {
        grad_weight.noalias() += x.transpose() * dy;
        if (use_bias) grad_bias.row(0) += dy.colwise().sum();
        return dy * weight.transpose();
    }

    void collect(const std::string& prefix, ParamRegistry& out) {
        out.push_back({prefix + ".weight", &weight, &grad_weight});
        if (use_bias) out.push_back({prefix + ".bias", &bias, &grad_bias});
    }
};

// ---------------------------------------------------------------------------
// Row-wise layer norm (population variance), optional learned affine
// ---------------------------------------------------------------------------

struct LayerNorm {
    Mat gamma;  // 1 x h
    Mat beta;   // 1 x h
    Mat grad_gamma, grad_beta;
    bool affine = true;
    double eps = 1e-6;

    struct Cache {
        Mat xhat;     // normalized rows, pre-affine
        Vec inv_std;  // per row
    };

    void init(int h, bool with_affine = true) {
        affine = with_affine;
        gamma = Mat::Ones(1, h);
        beta = Mat::Zero(1, h);
        grad_gamma = Mat::Zero(1, h);
        grad_beta = Mat::Zero(1, h);
    }

    Mat forward(const Mat& x, Cache& cache) const {
        cache.xhat.resize(x.rows(), x.cols());
        cache.inv_std.resize(x.rows());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double mean = x.row(r).mean();
            const double var = (x.row(r).array() - mean).square().mean();
            const double inv = 1.0 / std::sqrt(var + eps);
            cache.inv_std(r) = inv;
            cache.xhat.row(r) = ((x.row(r).array() - mean) * inv).matrix();
        }
        if (!affine) return cache.xhat;
        Mat y = cache.xhat;
        y.array().rowwise() *= gamma.row(0).array();
        y.rowwise() += beta.row(0);
        return y;
    }

    Mat backward(const Mat& dy, const Cache& cache) {
        Mat g = dy;
        if (affine) {
            grad_gamma.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
            grad_beta.row(0) += dy.colwise().sum();
            g.array().rowwise() *= gamma.row(0).array();
        }
        Mat dx(dy.rows(), dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            const double mean_g = g.row(r).mean();
            const double mean_gx = (g.row(r).array() * cache.xhat.row(r).array()).mean();
            dx.row(r) = ((g.row(r).array() - mean_g - cache.xhat.row(r).array() * mean_gx) *
                         cache.inv_std(r)).matrix();
        }
        return dx;
    }

    void collect(const std::string& prefix, ParamRegistry& out) {
        if (!affine) return;
        out.push_back({prefix + ".gamma", &gamma, &grad_gamma});
        out.push_back({prefix + ".beta", &beta, &grad_beta});
    }
};

// ---------------------------------------------------------------------------
// GroupNorm over a (channels x length) activation, affine per channel
// ---------------------------------------------------------------------------

struct GroupNorm {
    int groups = 1;
    int channels = 1;
    Mat gamma, beta;  // 1 x channels
    Mat grad_gamma, grad_beta;
    double eps = 1e-5;

    struct Cache {
        Mat xhat;     // channels x length
        Vec inv_std;  // per group
    };

    void init(int n_groups, int n_channels) {
        if (n_channels % n_groups != 0) throw usage_error("groupnorm: channels must divide into groups");
        groups = n_groups;
        channels = n_channels;
        gamma = Mat::Ones(1, channels);
        beta = Mat::Zero(1, channels);
        grad_gamma = Mat::Zero(1, channels);
        grad_beta = Mat::Zero(1, channels);
    }

    Mat forward(const Mat& x, Cache& cache) const {
        const int cpg = channels / groups;
        cache.xhat.resize(x.rows(), x.cols());
        cache.inv_std.resize(groups);
        for (int g = 0; g < groups; ++g) {
            auto block = x.middleRows(g * cpg, cpg);
            const double mean = block.mean();
            const double var = (block.array() - mean).square().mean();
            const double inv = 1.0 / std::sqrt(var + eps);
            cache.inv_std(g) = inv;
            cache.xhat.middleRows(g * cpg, cpg) = ((block.array() - mean) * inv).matrix();
        }
        Mat y = cache.xhat;
        for (int c = 0; c < channels; ++c) y.row(c) = y.row(c) * gamma(0, c) + Mat::Constant(1, x.cols(), beta(0, c));
        return y;
    }

    Mat backward(const Mat& dy, const Cache& cache) {
        const int cpg = channels / groups;
        Mat g_scaled(dy.rows(), dy.cols());
        for (int c = 0; c < channels; ++c) {
            grad_gamma(0, c) += dy.row(c).dot(cache.xhat.row(c));
            grad_beta(0, c) += dy.row(c).sum();
            g_scaled.row(c) = dy.row(c) * gamma(0, c);
        }
        Mat dx(dy.rows(), dy.cols());
        for (int g = 0; g < groups; ++g) {
            auto gs = g_scaled.middleRows(g * cpg, cpg);
            auto xh = cache.xhat.middleRows(g * cpg, cpg);
            const double mean_g = gs.mean();
            const double mean_gx = (gs.array() * xh.array()).mean();
            dx.middleRows(g * cpg, cpg) =
                ((gs.array() - mean_g - xh.array() * mean_gx) * cache.inv_std(g)).matrix();
        }
        return dx;
    }

    void collect(const std::string& prefix, ParamRegistry& out) {
        out.push_back({prefix + ".gamma", &gamma, &grad_gamma});
        out.push_back({prefix + ".beta", &beta, &grad_beta});
    }
};

// ---------------------------------------------------------------------------
// 1-D convolution (bias-free; a GroupNorm always follows in this model)
// ---------------------------------------------------------------------------

struct Conv1d {
    int in_channels = 1, out_channels = 1, kernel = 1, stride = 1, padding = 0;
    Mat weight;  // out_channels x (in_channels * kernel)
    Mat grad_weight;

    void init(int in_ch, int out_ch, int k, int s, int pad, Rng& rng) {
        in_channels = in_ch;
        out_channels = out_ch;
        kernel = k;
        stride = s;
        padding = pad;
        weight = init_normal(rng, out_ch, in_ch * k, std::sqrt(2.0 / (in_ch * k)));
        grad_weight = Mat::Zero(out_ch, in_ch * k);
    }

    int output_length(int input_length) const {
        return (input_length + 2 * padding - kernel) / stride + 1;
    }

    Mat forward(const Mat& x) const {  // x: in_channels x L
        const int l_in = static_cast<int>(x.cols());
        const int l_out = output_length(l_in);
        Mat y = Mat::Zero(out_channels, l_out);
        for (int o = 0; o < out_channels; ++o)
            for (int i = 0; i < in_channels; ++i)
                for (int t = 0; t < kernel; ++t) {
                    const double wv = weight(o, i * kernel + t);
                    if (wv == 0.0) continue;
                    for (int j = 0; j < l_out; ++j) {
                        const int src = j * stride + t - padding;
                        if (src >= 0 && src < l_in) y(o, j) += wv * x(i, src);
                    }
                }
        return y;
    }

    Mat backward(const Mat& x, const Mat& dy) {
        const int l_in = static_cast<int>(x.cols());
        const int l_out = static_cast<int>(dy.cols());
        Mat dx = Mat::Zero(in_channels, l_in);
        for (int o = 0; o < out_channels; ++o)
            for (int i = 0; i < in_channels; ++i)
                for (int t = 0; t < kernel; ++t) {
                    double gw = 0.0;
                    const double wv = weight(o, i * kernel + t);
                    for (int j = 0; j < l_out; ++j) {
                        const int src = j * stride + t - padding;
                        if (src < 0 || src >= l_in) continue;
                        gw += dy(o, j) * x(i, src);
                        dx(i, src) += dy(o, j) * wv;
                    }
                    grad_weight(o, i * kernel + t) += gw;
                }
        return dx;
    }

    void collect(const std::string& prefix, ParamRegistry& out) {
        out.push_back({prefix + ".weight", &weight, &grad_weight});
    }
};

}  // namespace neurotok::nn
