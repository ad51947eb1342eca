#pragma once

// Slice manifests, scan-grouped splits, slice loading, and the procedural
// synthetic dataset used for desk-scale runs.

#include "maeanom/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace maeanom {

enum class Split { train, val, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);
std::string to_string(Label l);
Label parse_label(const std::string& s);

struct ManifestRecord {
    std::string sample_id;
    std::filesystem::path path;  // relative paths resolve against the manifest directory
    Label label = Label::normal;
    Split split = Split::train;
    std::string scan_id;
};

struct SliceManifest {
    std::string dataset;
    int height = 0;
    int width = 0;
    std::vector<ManifestRecord> records;
    std::filesystem::path base_dir;

    /// Unique ids, normal-only train split, each scan in exactly one split;
    /// optionally that every referenced file exists.
    void validate(bool check_files = false) const;

    const ManifestRecord& find(const std::string& sample_id) const;
    std::vector<ManifestRecord> split(Split s) const;
    std::filesystem::path resolve(const ManifestRecord& r) const;
};

/// Header: "# maeanom-manifest v1 dataset=<name> height=<h> width=<w>", then
/// one tab-separated record per line: sample_id, path, label, split, scan_id.
void write_manifest(const std::filesystem::path& path, const SliceManifest& manifest);
SliceManifest read_manifest(const std::filesystem::path& path);

struct SliceRecord {
    std::string sample_id;
    std::filesystem::path path;
    Label label = Label::normal;  // abnormal iff the slice contains an anomalous region
};

struct ScanRecord {
    std::string scan_id;
    std::vector<SliceRecord> slices;
};

struct SplitRatios {
    double test_fraction = 0.4;  // of scans
    double val_fraction = 0.2;   // of the training scans
};

/// Scan-level split: round(test_fraction * N) scans go to test (half-up),
/// ceil(val_fraction * n_train) of the rest to validation. Abnormal slices of
/// training scans are dropped.
SliceManifest build_splits(const std::vector<ScanRecord>& scans, const SplitRatios& ratios, std::uint64_t seed,
                           const std::string& dataset, int height, int width);

/// Per-slice min-max to [0, 1]; constant images map to zero.
Image normalize_min_max(const Matrix& values);

/// Loads and normalizes one slice, checking its dimensions against the manifest.
Image load_slice(const SliceManifest& manifest, const std::string& sample_id);

// ---------------------------------------------------------------------------
// Synthetic data

struct SynthSpec {
    int height = 64;
    int width = 64;
    std::uint64_t texture_seed = 0;
    int wave_count = 6;
    double min_cycles = 0.3;    // spatial frequency range, cycles per image
    double max_cycles_lo = 0.8;  // per-image upper frequency drawn from [lo, hi]
    double max_cycles_hi = 1.6;
    int blob_min = 1;
    int blob_max = 2;
    double radius_min = 5.0;
    double radius_max = 9.0;
    double delta_min = 0.6;
    double delta_max = 0.9;
};

struct SynthCounts {
    int train = 64;
    int val_normal = 16;
    int val_abnormal = 16;
    int test_normal = 32;
    int test_abnormal = 32;

    int total() const { return train + val_normal + val_abnormal + test_normal + test_abnormal; }
};

struct Blob {
    double cx = 0, cy = 0, radius = 0, delta = 0;  // delta is signed
};

/// Smooth normal texture spanning exactly [0, 1].
Image synth_texture(const SynthSpec& spec, std::uint64_t image_seed);

struct SynthAbnormal {
    Image image;
    std::vector<Blob> blobs;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> footprint;
};

/// synth_texture(spec, image_seed) with blobs added. Blobs avoid the
/// texture's extreme pixels, so min-max normalization leaves the image
/// unchanged outside the footprint.
SynthAbnormal synth_abnormal(const SynthSpec& spec, std::uint64_t image_seed);

/// Writes images/<id>.png and manifest.txt under out_dir.
SliceManifest generate_synth_dataset(const SynthSpec& spec, const SynthCounts& counts, std::uint64_t seed,
                                     const std::filesystem::path& out_dir);

}  // namespace maeanom
