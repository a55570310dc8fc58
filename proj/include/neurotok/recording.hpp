#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "neurotok/errors.hpp"
#include "neurotok/types.hpp"

namespace neurotok {

inline constexpr int kPatchLen = 200;          // one second at the canonical rate
inline constexpr double kCanonicalRate = 200;  // Hz
inline constexpr int kCanonicalVersion = 1;

using TrialRange = std::pair<SampleIndex, SampleIndex>;  // [start, end)

// A multichannel recording: C electrode channels by T samples, microvolts.
struct Recording {
    std::vector<std::string> electrode_names;
    double sample_rate = 0.0;
    std::vector<TrialRange> trials;
    SignalMatrix data;  // C x T, channel-major

    int channels() const { return static_cast<int>(data.rows()); }
    SampleIndex samples() const { return data.cols(); }

    void validate() const {
        if (sample_rate <= 0.0) throw data_error("recording: sample_rate must be positive");
        if (static_cast<int>(electrode_names.size()) != channels())
            throw format_error("recording: electrode name count does not match channel count");
        for (std::size_t i = 0; i < electrode_names.size(); ++i)
            for (std::size_t j = i + 1; j < electrode_names.size(); ++j)
                if (electrode_names[i] == electrode_names[j])
                    throw format_error("recording: duplicate electrode name '" + electrode_names[i] + "'");
        for (const auto& [start, end] : trials) {
            if (start < 0 || end > samples() || start >= end)
                throw data_error("recording: trial range [" + std::to_string(start) + "," +
                                 std::to_string(end) + ") outside [0," + std::to_string(samples()) + ")");
        }
    }

    bool operator==(const Recording& other) const {
        return electrode_names == other.electrode_names && sample_rate == other.sample_rate &&
               trials == other.trials && data.rows() == other.data.rows() &&
               data.cols() == other.data.cols() && data == other.data;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        auto next = s.find(sep, pos);
        if (next == std::string::npos) {
            out.push_back(trim(s.substr(pos)));
            break;
        }
        out.push_back(trim(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

inline double parse_double(const std::string& tok, const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw format_error(std::string("cannot parse ") + what + ": '" + tok + "'");
    return v;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV interchange: header row of electrode names, one sample per row.
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw format_error("csv: empty input");
    table.header = detail::split(line, ',');
    if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty()))
        throw format_error("csv: missing header row");

    std::size_t row_index = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row_index;
        auto toks = detail::split(line, ',');
        if (toks.size() != table.header.size())
            throw format_error("csv: row " + std::to_string(row_index) + " has " +
                               std::to_string(toks.size()) + " values, expected " +
                               std::to_string(table.header.size()));
        std::vector<double> vals;
        vals.reserve(toks.size());
        for (const auto& t : toks) vals.push_back(detail::parse_double(t, "csv value"));
        table.rows.push_back(std::move(vals));
    }
    return table;
}

inline CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("csv: cannot open '" + path.string() + "'");
    return read_csv(in);
}

// Packages tabular samples into a Recording. One trial spanning the full
// length unless explicit trial ranges are given.
inline Recording ingest_csv(const std::vector<std::vector<double>>& rows,
                            const std::vector<std::string>& electrode_names, double sample_rate,
                            const std::vector<TrialRange>& trial_ranges = {}) {
    if (sample_rate <= 0.0) throw usage_error("ingest: sample rate must be positive");
    if (electrode_names.empty()) throw format_error("ingest: need at least one electrode name");
    const std::size_t c = electrode_names.size();
    const std::size_t t = rows.size();
    for (std::size_t i = 0; i < t; ++i)
        if (rows[i].size() != c)
            throw format_error("ingest: row " + std::to_string(i + 1) + " has " +
                               std::to_string(rows[i].size()) + " values, expected " + std::to_string(c));

    Recording rec;
    rec.electrode_names = electrode_names;
    rec.sample_rate = sample_rate;
    rec.data.resize(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t));
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double v = rows[i][j];
            if (!std::isfinite(v))
                throw data_error("ingest: non-finite value at row " + std::to_string(i + 1) +
                                 ", column " + std::to_string(j + 1));
            rec.data(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = static_cast<float>(v);
        }
    }
    const double samples_at_canonical = static_cast<double>(t) * kCanonicalRate / sample_rate;
    if (samples_at_canonical < kPatchLen)
        throw data_error("ingest: recording too short: " + std::to_string(t) + " samples at " +
                         detail::format_double(sample_rate) + " Hz is under one patch after resampling");
    rec.trials = trial_ranges.empty()
                     ? std::vector<TrialRange>{{0, static_cast<SampleIndex>(t)}}
                     : trial_ranges;
    rec.validate();
    return rec;
}

// ---------------------------------------------------------------------------
// Canonical on-disk format: <base>.meta (key: value text) + <base>.f32
// (little-endian float32 body, channel-major).
// ---------------------------------------------------------------------------

inline std::filesystem::path meta_path(const std::filesystem::path& base) {
    auto p = base;
    p += ".meta";
    return p;
}

inline std::filesystem::path body_path(const std::filesystem::path& base) {
    auto p = base;
    p += ".f32";
    return p;
}

inline void save_canonical(const Recording& rec, const std::filesystem::path& base) {
    rec.validate();
    std::ofstream meta(meta_path(base));
    if (!meta) throw data_error("save: cannot open '" + meta_path(base).string() + "'");
    meta << "version: " << kCanonicalVersion << "\n";
    meta << "sample_rate: " << detail::format_double(rec.sample_rate) << "\n";
    meta << "electrodes: ";
    for (std::size_t i = 0; i < rec.electrode_names.size(); ++i)
        meta << (i ? "," : "") << rec.electrode_names[i];
    meta << "\n";
    meta << "samples: " << rec.samples() << "\n";
    meta << "trials: ";
    for (std::size_t i = 0; i < rec.trials.size(); ++i)
        meta << (i ? " " : "") << rec.trials[i].first << "-" << rec.trials[i].second;
    meta << "\n";
    if (!meta) throw data_error("save: write failed for '" + meta_path(base).string() + "'");

    std::ofstream body(body_path(base), std::ios::binary);
    if (!body) throw data_error("save: cannot open '" + body_path(base).string() + "'");
    body.write(reinterpret_cast<const char*>(rec.data.data()),
               static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(rec.data.size())));
    if (!body) throw data_error("save: write failed for '" + body_path(base).string() + "'");
}

// Sidecar alone; used by the corpus indexer, which never touches bodies.
struct RecordingMeta {
    std::vector<std::string> electrode_names;
    double sample_rate = 0.0;
    std::vector<TrialRange> trials;
    SampleIndex samples = 0;
};

inline RecordingMeta load_meta(const std::filesystem::path& base) {
    std::ifstream in(meta_path(base));
    if (!in) throw data_error("load: cannot open '" + meta_path(base).string() + "'");
    RecordingMeta meta;
    bool seen_version = false;
    std::string line;
    while (std::getline(in, line)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        auto colon = line.find(':');
        if (colon == std::string::npos)
            throw format_error("meta: malformed line '" + line + "' in " + meta_path(base).string());
        auto key = detail::trim(line.substr(0, colon));
        auto value = detail::trim(line.substr(colon + 1));
        if (key == "version") {
            if (static_cast<int>(detail::parse_double(value, "version")) != kCanonicalVersion)
                throw format_error("meta: unsupported version '" + value + "' in " +
                                   meta_path(base).string());
            seen_version = true;
        } else if (key == "sample_rate") {
            meta.sample_rate = detail::parse_double(value, "sample_rate");
        } else if (key == "electrodes") {
            meta.electrode_names = detail::split(value, ',');
        } else if (key == "samples") {
            meta.samples = static_cast<SampleIndex>(detail::parse_double(value, "samples"));
        } else if (key == "trials") {
            if (!value.empty()) {
                for (const auto& tok : detail::split(value, ' ')) {
                    if (tok.empty()) continue;
                    auto dash = tok.find('-');
                    if (dash == std::string::npos)
                        throw format_error("meta: malformed trial range '" + tok + "'");
                    meta.trials.emplace_back(
                        static_cast<SampleIndex>(detail::parse_double(tok.substr(0, dash), "trial start")),
                        static_cast<SampleIndex>(detail::parse_double(tok.substr(dash + 1), "trial end")));
                }
            }
        }
        // unknown keys are ignored for forward compatibility
    }
    if (!seen_version) throw format_error("meta: missing version in " + meta_path(base).string());
    return meta;
}

inline Recording load_canonical(const std::filesystem::path& base) {
    RecordingMeta meta = load_meta(base);
    const auto c = static_cast<Eigen::Index>(meta.electrode_names.size());
    const auto t = static_cast<Eigen::Index>(meta.samples);

    std::ifstream body(body_path(base), std::ios::binary | std::ios::ate);
    if (!body) throw data_error("load: cannot open '" + body_path(base).string() + "'");
    const auto actual = static_cast<std::uint64_t>(body.tellg());
    const auto expected = static_cast<std::uint64_t>(c) * static_cast<std::uint64_t>(t) * sizeof(float);
    if (actual != expected)
        throw format_error("load: body '" + body_path(base).string() + "' holds " +
                           std::to_string(actual) + " bytes, metadata implies " +
                           std::to_string(expected));

    Recording rec;
    rec.electrode_names = meta.electrode_names;
    rec.sample_rate = meta.sample_rate;
    rec.trials = meta.trials;
    rec.data.resize(c, t);
    body.seekg(0);
    body.read(reinterpret_cast<char*>(rec.data.data()), static_cast<std::streamsize>(expected));
    if (!body) throw format_error("load: short read from '" + body_path(base).string() + "'");
    rec.validate();
    return rec;
}

}  // namespace neurotok
