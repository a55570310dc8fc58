#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "neurotok/errors.hpp"
#include "neurotok/recording.hpp"
#include "neurotok/rng.hpp"
#include "neurotok/types.hpp"

namespace neurotok {

inline constexpr int kDefaultPatches = 256;  // P

struct CorpusEntry {
    std::string base_path;                    // canonical pair without extension
    std::vector<std::string> electrode_names; // as stored in the sidecar
    std::vector<int> electrode_ids;           // global ids, 0 = unknown
    double sample_rate = 0.0;
    SampleIndex samples = 0;
    std::vector<TrialRange> trials;

    int channels() const { return static_cast<int>(electrode_names.size()); }
};

// Immutable after construction; safe to share across concurrent readers.
struct CorpusIndex {
    std::vector<CorpusEntry> entries;
    std::vector<std::string> global_electrodes;     // sorted canonical names
    std::map<std::string, int> electrode_to_id;     // name -> 1-based id, 0 reserved
    std::vector<std::string> skipped;               // unreadable files

    int electrode_count() const { return static_cast<int>(global_electrodes.size()); }

    int id_of(const std::string& name) const {
        auto it = electrode_to_id.find(canonical_electrode(name));
        return it == electrode_to_id.end() ? 0 : it->second;
    }

    static std::string canonical_electrode(const std::string& name) {
        std::string up = name;
        std::transform(up.begin(), up.end(), up.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
        return up;
    }
};

// A training sample: P patches of w samples, rows grouped channel-major
// (all windows of channel 1, then channel 2, ...).
struct PatchSample {
    Mat patches;                     // P x w
    std::vector<int> electrode_ids;  // length P, global ids
    std::vector<int> time_ids;       // length P, 1-based, left-aligned
    int n_channels = 0;
    int n_windows = 0;

    // provenance, for reports
    int entry_index = -1;
    int trial_index = -1;
    SampleIndex window_start = -1;
};

inline CorpusIndex index_corpus(const std::filesystem::path& directory) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory))
        throw data_error("index: '" + directory.string() + "' is not a directory");

    std::vector<fs::path> metas;
    for (const auto& e : fs::directory_iterator(directory))
        if (e.is_regular_file() && e.path().extension() == ".meta") metas.push_back(e.path());
    std::sort(metas.begin(), metas.end());
    if (metas.empty())
        throw data_error("index: no canonical recordings (*.meta) in '" + directory.string() + "'");

    CorpusIndex index;
    for (const auto& meta_file : metas) {
        fs::path base = meta_file;
        base.replace_extension();
        try {
            RecordingMeta meta = load_meta(base);
            const auto expected = static_cast<std::uint64_t>(meta.electrode_names.size()) *
                                  static_cast<std::uint64_t>(meta.samples) * sizeof(float);
            if (!fs::exists(body_path(base)) || fs::file_size(body_path(base)) != expected)
                throw format_error("body missing or wrong length");
            CorpusEntry entry;
            entry.base_path = base.string();
            entry.electrode_names = meta.electrode_names;
            entry.sample_rate = meta.sample_rate;
            entry.samples = meta.samples;
            entry.trials = meta.trials;
            index.entries.push_back(std::move(entry));
        } catch (const std::exception& e) {
            index.skipped.push_back(meta_file.string() + ": " + e.what());
        }
    }
    if (index.entries.empty())
        throw data_error("index: every recording in '" + directory.string() + "' was unreadable");

    // Global electrode list: case-insensitive union, sorted; ids are 1-based
    // with 0 reserved for unknown names.
    std::vector<std::string> names;
    for (const auto& entry : index.entries)
        for (const auto& n : entry.electrode_names)
            names.push_back(CorpusIndex::canonical_electrode(n));
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());
    index.global_electrodes = names;
    for (std::size_t i = 0; i < names.size(); ++i)
        index.electrode_to_id[names[i]] = static_cast<int>(i) + 1;
    for (auto& entry : index.entries) {
        entry.electrode_ids.reserve(entry.electrode_names.size());
        for (const auto& n : entry.electrode_names) entry.electrode_ids.push_back(index.id_of(n));
    }
    return index;
}

namespace detail {

inline std::vector<int> divisors_of(int p) {
    std::vector<int> out;
    for (int d = 1; d <= p; ++d)
        if (p % d == 0) out.push_back(d);
    return out;
}

// Divisors d of P usable for this trial: d channels available and P/d windows
// of w samples fitting inside the trial.
inline std::vector<int> admissible_channel_counts(int p, int w, int channels, SampleIndex trial_len) {
    std::vector<int> out;
    const SampleIndex max_windows = trial_len / w;
    for (int d : divisors_of(p))
        if (d <= channels && static_cast<SampleIndex>(p / d) <= max_windows) out.push_back(d);
    return out;
}

inline void read_channel_window(const CorpusEntry& entry, std::ifstream& body, int channel,
                                SampleIndex start, SampleIndex len, float* out) {
    const auto offset =
        (static_cast<std::uint64_t>(channel) * static_cast<std::uint64_t>(entry.samples) +
         static_cast<std::uint64_t>(start)) * sizeof(float);
    body.seekg(static_cast<std::streamoff>(offset));
    body.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(len * sizeof(float)));
    if (!body) throw format_error("draw: short read from '" + entry.base_path + ".f32'");
}

}  // namespace detail

// Draws one P x w sample: uniform file, uniform trial, uniform admissible
// channel-subset size, channels without replacement, uniform window offset.
inline PatchSample draw_sample(const CorpusIndex& index, Rng& rng, int p = kDefaultPatches,
                               int w = kPatchLen) {
    if (p < 1 || w < 1) throw usage_error("draw: P and w must be positive");
    bool any_admissible = false;
    for (const auto& entry : index.entries) {
        if (entry.sample_rate != kCanonicalRate)
            throw data_error("draw: '" + entry.base_path + "' is at " +
                             std::to_string(entry.sample_rate) + " Hz, expected 200 Hz");
        for (const auto& [start, end] : entry.trials)
            if (!detail::admissible_channel_counts(p, w, entry.channels(), end - start).empty())
                any_admissible = true;
    }
    if (!any_admissible)
        throw data_error("draw: no (file, trial, channel-count) combination can host " +
                         std::to_string(p) + " patches of " + std::to_string(w) + " samples");

    for (int attempt = 0; attempt < 100000; ++attempt) {
        const int entry_idx = uniform_int(rng, 0, static_cast<int>(index.entries.size()) - 1);
        const CorpusEntry& entry = index.entries[entry_idx];
        if (entry.trials.empty()) continue;
        const int trial_idx = uniform_int(rng, 0, static_cast<int>(entry.trials.size()) - 1);
        const auto [t_start, t_end] = entry.trials[trial_idx];
        auto counts = detail::admissible_channel_counts(p, w, entry.channels(), t_end - t_start);
        if (counts.empty()) continue;  // rejection keeps file selection uniform over files

        const int n_channels = counts[uniform_int(rng, 0, static_cast<int>(counts.size()) - 1)];
        const int n_windows = p / n_channels;
        const SampleIndex span = static_cast<SampleIndex>(n_windows) * w;
        const SampleIndex start = t_start + uniform_i64(rng, 0, (t_end - t_start) - span);
        const std::vector<int> channels = sample_without_replacement(rng, entry.channels(), n_channels);

        PatchSample sample;
        sample.patches.resize(p, w);
        sample.electrode_ids.resize(static_cast<std::size_t>(p));
        sample.time_ids.resize(static_cast<std::size_t>(p));
        sample.n_channels = n_channels;
        sample.n_windows = n_windows;
        sample.entry_index = entry_idx;
        sample.trial_index = trial_idx;
        sample.window_start = start;

        std::ifstream body(body_path(entry.base_path), std::ios::binary);
        if (!body) throw data_error("draw: cannot open '" + entry.base_path + ".f32'");
        std::vector<float> buf(static_cast<std::size_t>(span));
        for (int c = 0; c < n_channels; ++c) {
            detail::read_channel_window(entry, body, channels[static_cast<std::size_t>(c)], start,
                                        span, buf.data());
            for (int win = 0; win < n_windows; ++win) {
                const int row = c * n_windows + win;
                for (int i = 0; i < w; ++i)
                    sample.patches(row, i) = static_cast<double>(buf[static_cast<std::size_t>(win) * w + i]);
                sample.electrode_ids[static_cast<std::size_t>(row)] =
                    entry.electrode_ids[static_cast<std::size_t>(channels[static_cast<std::size_t>(c)])];
                sample.time_ids[static_cast<std::size_t>(row)] = win + 1;
            }
        }
        return sample;
    }
    throw data_error("draw: rejection sampling failed to find an admissible trial");
}

}  // namespace neurotok
