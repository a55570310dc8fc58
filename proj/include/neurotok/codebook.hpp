#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "neurotok/errors.hpp"
#include "neurotok/rng.hpp"
#include "neurotok/types.hpp"

namespace neurotok {

inline constexpr int kDeadCodeResetAfter = 200;  // consecutive idle updates

// K x D neural token table. Codes are stored unnormalized and l2-normalized at
// lookup; EMA accumulators maintain each code as the running mean of the
// encoder vectors assigned to it.
struct Codebook {
    Mat vectors;                           // K x D
    Vec ema_cluster_size;                  // K
    Mat ema_embed_sum;                     // K x D
    std::vector<std::int64_t> usage_count; // K, lifetime assignments
    std::vector<int> idle_updates;         // K, consecutive updates without use

    int code_count() const { return static_cast<int>(vectors.rows()); }
    int code_dim() const { return static_cast<int>(vectors.cols()); }
};

inline Codebook init_codebook(int k, int d, Rng& rng) {
    if (k < 2 || d < 1) throw usage_error("codebook: need K >= 2 and D >= 1");
    Codebook book;
    book.vectors.resize(k, d);
    for (int i = 0; i < k; ++i) {
        Vec row(d);
        do {
            for (int j = 0; j < d; ++j) row(j) = normal(rng);
        } while (row.norm() < 1e-12);
        book.vectors.row(i) = row.transpose() / row.norm();
    }
    book.ema_cluster_size = Vec::Zero(k);
    book.ema_embed_sum = Mat::Zero(k, d);
    book.usage_count.assign(static_cast<std::size_t>(k), 0);
    book.idle_updates.assign(static_cast<std::size_t>(k), 0);
    return book;
}

struct QuantizeResult {
    int index = -1;
    Vec code;         // the stored (unnormalized) row
    double distance;  // between the l2-normalized pair
};

// Nearest neighbor over l2-normalized vectors; ties break to the lowest index.
// Equivalent to maximizing cosine similarity.
inline QuantizeResult quantize(const Vec& p, const Codebook& book) {
    if (p.size() != book.code_dim()) throw usage_error("quantize: dimension mismatch");
    const double p_norm = p.norm();
    if (!(p_norm > 1e-300) || !p.allFinite())
        throw numeric_error("quantize: input vector has zero norm or non-finite entries");
    const Vec pn = p / p_norm;
    QuantizeResult best;
    double best_dist2 = std::numeric_limits<double>::infinity();
    for (int i = 0; i < book.code_count(); ++i) {
        Vec vn = book.vectors.row(i).transpose();
        const double v_norm = vn.norm();
        if (v_norm > 0.0) vn /= v_norm;
        const double dist2 = (pn - vn).squaredNorm();
        if (dist2 < best_dist2) {
            best_dist2 = dist2;
            best.index = i;
        }
    }
    best.code = book.vectors.row(best.index).transpose();
    best.distance = std::sqrt(best_dist2);
    return best;
}

inline std::vector<int> quantize_batch(const Mat& p_rows, const Codebook& book, Mat* codes = nullptr) {
    std::vector<int> indices(static_cast<std::size_t>(p_rows.rows()));
    if (codes) codes->resize(p_rows.rows(), book.code_dim());
    for (Eigen::Index r = 0; r < p_rows.rows(); ++r) {
        auto res = quantize(p_rows.row(r).transpose(), book);
        indices[static_cast<std::size_t>(r)] = res.index;
        if (codes) codes->row(r) = res.code.transpose();
    }
    return indices;
}

struct QuantizationLoss {
    double value = 0.0;          // the optimized scalar: beta * ||p - sg(z)||^2
    double codebook_term = 0.0;  // ||sg(p) - z||^2, maintained by EMA, reported only
    Mat grad_p;                  // 2 beta (p - z); straight-through adds the decoder's dz on top
};

inline QuantizationLoss quantization_loss(const Mat& p, const Mat& z, double beta = 0.25) {
    if (p.rows() != z.rows() || p.cols() != z.cols())
        throw usage_error("quantization_loss: shape mismatch");
    QuantizationLoss out;
    const Mat diff = p - z;
    out.codebook_term = diff.squaredNorm();
    out.value = beta * out.codebook_term;
    out.grad_p = 2.0 * beta * diff;
    return out;
}

// EMA codebook maintenance. Codes idle for kDeadCodeResetAfter consecutive
// updates are re-seeded from a random vector of the current batch.
inline void ema_update(Codebook& book, const std::vector<int>& indices, const Mat& p, double decay,
                       Rng& rng) {
    if (!(decay > 0.0 && decay < 1.0)) throw usage_error("ema_update: decay must be in (0,1)");
    if (static_cast<Eigen::Index>(indices.size()) != p.rows())
        throw usage_error("ema_update: index/vector count mismatch");
    const int k = book.code_count();

    Vec counts = Vec::Zero(k);
    Mat sums = Mat::Zero(k, book.code_dim());
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const int idx = indices[static_cast<std::size_t>(r)];
        if (idx < 0 || idx >= k) throw usage_error("ema_update: code index out of range");
        counts(idx) += 1.0;
        sums.row(idx) += p.row(r);
        book.usage_count[static_cast<std::size_t>(idx)] += 1;
    }

    book.ema_cluster_size = decay * book.ema_cluster_size + (1.0 - decay) * counts;
    book.ema_embed_sum = decay * book.ema_embed_sum + (1.0 - decay) * sums;
    if (indices.empty()) return;  // nothing assigned: only the decayed counters change

    // Laplace smoothing keeps tiny clusters from dividing by ~0 while staying
    // within 1e-6 of the exact EMA mean for any cluster above the threshold.
    const double eps = 1e-12;
    const double n_total = book.ema_cluster_size.sum();
    for (int i = 0; i < k; ++i) {
        if (book.ema_cluster_size(i) > 1e-5) {
            const double smoothed =
                (book.ema_cluster_size(i) + eps) / (n_total + k * eps) * n_total;
            book.vectors.row(i) = book.ema_embed_sum.row(i) / smoothed;
        }
        if (counts(i) > 0.0) {
            book.idle_updates[static_cast<std::size_t>(i)] = 0;
        } else if (++book.idle_updates[static_cast<std::size_t>(i)] >= kDeadCodeResetAfter) {
            const auto donor = static_cast<Eigen::Index>(uniform_i64(rng, 0, p.rows() - 1));
            book.vectors.row(i) = p.row(donor);
            book.ema_cluster_size(i) = 1.0 - decay;  // as if freshly assigned once
            book.ema_embed_sum.row(i) = (1.0 - decay) * p.row(donor);
            book.idle_updates[static_cast<std::size_t>(i)] = 0;
        }
    }
}

// exp(entropy) of the empirical code distribution; 1 = collapsed, K = uniform.
inline double perplexity(const std::vector<std::int64_t>& histogram) {
    std::int64_t n = 0;
    for (auto h : histogram) {
        if (h < 0) throw usage_error("perplexity: negative count");
        n += h;
    }
    if (n < 1) throw data_error("perplexity: empty histogram");
    double entropy = 0.0;
    for (auto h : histogram) {
        if (h == 0) continue;
        const double q = static_cast<double>(h) / static_cast<double>(n);
        entropy -= q * std::log(q);
    }
    return std::exp(entropy);
}

// ---------------------------------------------------------------------------
// Checkpointing: <base>.meta sidecar + <base>.bin float64 little-endian blob
// holding vectors, EMA state and usage counters.
// ---------------------------------------------------------------------------

inline void save_codebook(const Codebook& book, const std::filesystem::path& base,
                          std::int64_t step = 0) {
    auto meta_file = base;
    meta_file += ".meta";
    std::ofstream meta(meta_file);
    if (!meta) throw data_error("codebook: cannot open '" + meta_file.string() + "'");
    meta << "kind: codebook\nversion: 1\n";
    meta << "k: " << book.code_count() << "\nd: " << book.code_dim() << "\n";
    meta << "step: " << step << "\n";
    meta << "dtype: float64\n";

    auto bin_file = base;
    bin_file += ".bin";
    std::ofstream bin(bin_file, std::ios::binary);
    if (!bin) throw data_error("codebook: cannot open '" + bin_file.string() + "'");
    auto write_block = [&](const double* data, std::size_t count) {
        bin.write(reinterpret_cast<const char*>(data),
                  static_cast<std::streamsize>(count * sizeof(double)));
    };
    write_block(book.vectors.data(), static_cast<std::size_t>(book.vectors.size()));
    write_block(book.ema_cluster_size.data(), static_cast<std::size_t>(book.ema_cluster_size.size()));
    write_block(book.ema_embed_sum.data(), static_cast<std::size_t>(book.ema_embed_sum.size()));
    std::vector<double> aux;
    for (auto u : book.usage_count) aux.push_back(static_cast<double>(u));
    for (auto i : book.idle_updates) aux.push_back(static_cast<double>(i));
    write_block(aux.data(), aux.size());
    if (!bin) throw data_error("codebook: write failed for '" + bin_file.string() + "'");
}

inline Codebook load_codebook(const std::filesystem::path& base, std::int64_t* step = nullptr) {
    auto meta_file = base;
    meta_file += ".meta";
    std::ifstream meta(meta_file);
    if (!meta) throw data_error("codebook: cannot open '" + meta_file.string() + "'");
    int k = 0, d = 0;
    std::string line;
    while (std::getline(meta, line)) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        const std::string key = line.substr(0, colon);
        const std::string value = line.substr(colon + 1);
        if (key == "k") k = std::stoi(value);
        if (key == "d") d = std::stoi(value);
        if (key == "step" && step) *step = std::stoll(value);
        if (key == "version" && std::stoi(value) != 1)
            throw format_error("codebook: unsupported version in '" + meta_file.string() + "'");
    }
    if (k < 2 || d < 1) throw format_error("codebook: bad dimensions in '" + meta_file.string() + "'");

    auto bin_file = base;
    bin_file += ".bin";
    std::ifstream bin(bin_file, std::ios::binary | std::ios::ate);
    if (!bin) throw data_error("codebook: cannot open '" + bin_file.string() + "'");
    const std::uint64_t expected =
        (static_cast<std::uint64_t>(k) * d * 2 + k * 3) * sizeof(double);
    if (static_cast<std::uint64_t>(bin.tellg()) != expected)
        throw format_error("codebook: blob length mismatch in '" + bin_file.string() + "'");
    bin.seekg(0);

    Codebook book;
    book.vectors.resize(k, d);
    book.ema_cluster_size.resize(k);
    book.ema_embed_sum.resize(k, d);
    auto read_block = [&](double* data, std::size_t count) {
        bin.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    };
    read_block(book.vectors.data(), static_cast<std::size_t>(book.vectors.size()));
    read_block(book.ema_cluster_size.data(), static_cast<std::size_t>(book.ema_cluster_size.size()));
    read_block(book.ema_embed_sum.data(), static_cast<std::size_t>(book.ema_embed_sum.size()));
    std::vector<double> aux(static_cast<std::size_t>(k) * 2);
    read_block(aux.data(), aux.size());
    if (!bin) throw format_error("codebook: short read from '" + bin_file.string() + "'");
    book.usage_count.resize(static_cast<std::size_t>(k));
    book.idle_updates.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        book.usage_count[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(aux[static_cast<std::size_t>(i)]);
        book.idle_updates[static_cast<std::size_t>(i)] = static_cast<int>(aux[static_cast<std::size_t>(k + i)]);
    }
    return book;
}

}  // namespace neurotok
