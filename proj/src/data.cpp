#include "maeanom/data.hpp"

#include "maeanom/image_io.hpp"
#include "maeanom/random.hpp"
#include "maeanom/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace maeanom {

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw FormatError("unknown split '" + s + "'");
}

std::string to_string(Label l) { return l == Label::normal ? "normal" : "abnormal"; }

Label parse_label(const std::string& s) {
    if (s == "normal") return Label::normal;
    if (s == "abnormal") return Label::abnormal;
    throw FormatError("unknown label '" + s + "'");
}

// ---------------------------------------------------------------------------
// Manifest

void SliceManifest::validate(bool check_files) const {
    if (height <= 0 || width <= 0) throw FormatError("manifest: image dims must be positive");
    std::set<std::string> ids;
    std::map<std::string, Split> scan_split;
    for (const auto& r : records) {
        if (r.sample_id.empty()) throw FormatError("manifest: empty sample id");
        if (!ids.insert(r.sample_id).second) throw FormatError("manifest: duplicate sample id '" + r.sample_id + "'");
        if (r.split == Split::train && r.label != Label::normal) {
            throw DataContaminationError("manifest: abnormal slice '" + r.sample_id + "' assigned to the train split");
        }
        const std::string scan = r.scan_id.empty() ? r.sample_id : r.scan_id;
        auto [it, inserted] = scan_split.emplace(scan, r.split);
        if (!inserted && it->second != r.split) {
            throw DataContaminationError("manifest: scan '" + scan + "' appears in both " + to_string(it->second) +
                                         " and " + to_string(r.split));
        }
        if (check_files && !std::filesystem::exists(resolve(r))) {
            throw IoError("manifest: missing file " + resolve(r).string() + " for '" + r.sample_id + "'");
        }
    }
}

const ManifestRecord& SliceManifest::find(const std::string& sample_id) const {
    for (const auto& r : records) {
        if (r.sample_id == sample_id) return r;
    }
    throw InvalidArgument("manifest has no sample '" + sample_id + "'");
}

std::vector<ManifestRecord> SliceManifest::split(Split s) const {
    std::vector<ManifestRecord> out;
    for (const auto& r : records) {
        if (r.split == s) out.push_back(r);
    }
    return out;
}

std::filesystem::path SliceManifest::resolve(const ManifestRecord& r) const {
    return r.path.is_absolute() ? r.path : base_dir / r.path;
}

void write_manifest(const std::filesystem::path& path, const SliceManifest& manifest) {
    manifest.validate(false);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << "# maeanom-manifest v1 dataset=" << manifest.dataset << " height=" << manifest.height
        << " width=" << manifest.width << '\n';
    for (const auto& r : manifest.records) {
        out << r.sample_id << '\t' << r.path.generic_string() << '\t' << to_string(r.label) << '\t'
            << to_string(r.split) << '\t' << (r.scan_id.empty() ? r.sample_id : r.scan_id) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

SliceManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    SliceManifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("manifest: empty file " + path.string());
    const auto header = text::split_ws(line);
    if (header.size() < 3 || header[0] != "#" || header[1] != "maeanom-manifest") {
        throw FormatError("manifest: bad header in " + path.string());
    }
    for (std::size_t i = 3; i < header.size(); ++i) {
        const auto eq = header[i].find('=');
        if (eq == std::string::npos) throw FormatError("manifest: bad header field '" + header[i] + "'");
        const auto key = header[i].substr(0, eq);
        const auto value = header[i].substr(eq + 1);
        if (key == "dataset") m.dataset = value;
        else if (key == "height") m.height = static_cast<int>(text::parse_int(value, "height"));
        else if (key == "width") m.width = static_cast<int>(text::parse_int(value, "width"));
        else throw FormatError("manifest: unknown header field '" + key + "'");
    }
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        auto f = text::split(line, '\t');
        if (f.size() != 4 && f.size() != 5) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected 4 or 5 tab-separated fields");
        }
        ManifestRecord r;
        r.sample_id = f[0];
        r.path = f[1];
        r.label = parse_label(f[2]);
        r.split = parse_split(std::string(text::trim(f[3])));
        r.scan_id = f.size() == 5 ? std::string(text::trim(f[4])) : r.sample_id;
        m.records.push_back(std::move(r));
    }
    m.validate(true);
    return m;
}

// ---------------------------------------------------------------------------
// Splits

SliceManifest build_splits(const std::vector<ScanRecord>& scans, const SplitRatios& ratios, std::uint64_t seed,
                           const std::string& dataset, int height, int width) {
    if (scans.empty()) throw InvalidArgument("build_splits: empty scan list");
    std::set<std::string> scan_ids, sample_ids;
    for (const auto& s : scans) {
        if (!scan_ids.insert(s.scan_id).second) {
            throw InvalidArgument("build_splits: scan '" + s.scan_id + "' listed more than once");
        }
        for (const auto& sl : s.slices) {
            if (!sample_ids.insert(sl.sample_id).second) {
                throw InvalidArgument("build_splits: slice '" + sl.sample_id + "' listed more than once");
            }
        }
    }
    const auto n = static_cast<int>(scans.size());
    const int n_test = static_cast<int>(std::floor(ratios.test_fraction * n + 0.5));
    const int n_train_all = n - n_test;
    const int n_val = std::min(n_train_all, static_cast<int>(std::ceil(ratios.val_fraction * n_train_all - 1e-9)));

    std::vector<std::size_t> order(scans.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    SliceManifest m;
    m.dataset = dataset;
    m.height = height;
    m.width = width;
    for (int rank = 0; rank < n; ++rank) {
        const ScanRecord& scan = scans[order[static_cast<std::size_t>(rank)]];
        const Split split = rank < n_test ? Split::test : (rank < n_test + n_val ? Split::val : Split::train);
        for (const auto& sl : scan.slices) {
            if (split == Split::train && sl.label != Label::normal) continue;
            m.records.push_back({sl.sample_id, sl.path, sl.label, split, scan.scan_id});
        }
    }
    m.validate(false);
    return m;
}

// ---------------------------------------------------------------------------
// Loading

Image normalize_min_max(const Matrix& values) {
    const double lo = values.minCoeff();
    const double hi = values.maxCoeff();
    if (!(hi > lo)) return Image::Zero(values.rows(), values.cols());
    return ((values.array() - lo) / (hi - lo)).matrix();
}

Image load_slice(const SliceManifest& manifest, const std::string& sample_id) {
    const ManifestRecord& r = manifest.find(sample_id);
    const RawImage raw = read_png_gray(manifest.resolve(r));
    if (raw.values.rows() != manifest.height || raw.values.cols() != manifest.width) {
        throw DimensionError("slice '" + sample_id + "' is " + std::to_string(raw.values.rows()) + "x" +
                             std::to_string(raw.values.cols()) + ", manifest says " + std::to_string(manifest.height) +
                             "x" + std::to_string(manifest.width));
    }
    return normalize_min_max(raw.values);
}

// ---------------------------------------------------------------------------
// Synthetic data

Image synth_texture(const SynthSpec& spec, std::uint64_t image_seed) {
    Rng rng(derive_seed(spec.texture_seed, {image_seed}));
    const double max_cycles = rng.uniform(spec.max_cycles_lo, spec.max_cycles_hi);
    Image img = Image::Zero(spec.height, spec.width);
    for (int k = 0; k < spec.wave_count; ++k) {
        const double cycles = rng.uniform(spec.min_cycles, max_cycles);
        const double angle = rng.uniform(0.0, 2.0 * M_PI);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double amp = rng.uniform(0.3, 1.0);
        const double fx = 2.0 * M_PI * cycles * std::cos(angle) / spec.width;
        const double fy = 2.0 * M_PI * cycles * std::sin(angle) / spec.height;
        for (int r = 0; r < spec.height; ++r) {
            for (int c = 0; c < spec.width; ++c) img(r, c) += amp * std::cos(fx * c + fy * r + phase);
        }
    }
    return normalize_min_max(img);
}

SynthAbnormal synth_abnormal(const SynthSpec& spec, std::uint64_t image_seed) {
    SynthAbnormal out;
    const Image texture = synth_texture(spec, image_seed);
    out.image = texture;
    out.footprint.setConstant(spec.height, spec.width, false);

    Eigen::Index min_r, min_c, max_r, max_c;
    texture.minCoeff(&min_r, &min_c);
    texture.maxCoeff(&max_r, &max_c);

    Rng rng(derive_seed(spec.texture_seed, {image_seed, 0xb10bu}));
    const auto count = static_cast<int>(rng.uniform_int(spec.blob_min, spec.blob_max));
    for (int b = 0; b < count; ++b) {
        Blob blob;
        blob.radius = rng.uniform(spec.radius_min, spec.radius_max);
        const double magnitude = rng.uniform(spec.delta_min, spec.delta_max);
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            blob.cx = rng.uniform(blob.radius, spec.width - 1 - blob.radius);
            blob.cy = rng.uniform(blob.radius, spec.height - 1 - blob.radius);
            const double d_min = std::hypot(blob.cx - min_c, blob.cy - min_r);
            const double d_max = std::hypot(blob.cx - max_c, blob.cy - max_r);
            placed = d_min > blob.radius + 1.0 && d_max > blob.radius + 1.0;
        }
        if (!placed) continue;
        // Brighten dark regions and darken bright ones so the blob stays visible.
        const double base = texture(static_cast<Eigen::Index>(std::lround(blob.cy)), static_cast<Eigen::Index>(std::lround(blob.cx)));
        blob.delta = base < 0.5 ? magnitude : -magnitude;
        for (int r = 0; r < spec.height; ++r) {
            for (int c = 0; c < spec.width; ++c) {
                const double d = std::hypot(c - blob.cx, r - blob.cy);
                if (d >= blob.radius) continue;
                const double t = 1.0 - (d / blob.radius) * (d / blob.radius);
                out.image(r, c) += blob.delta * t * t;
                out.footprint(r, c) = true;
            }
        }
        out.blobs.push_back(blob);
    }
    out.image = out.image.cwiseMax(0.0).cwiseMin(1.0);
    return out;
}

SliceManifest generate_synth_dataset(const SynthSpec& spec, const SynthCounts& counts, std::uint64_t seed,
                                     const std::filesystem::path& out_dir) {
    if (counts.train < 1 || counts.test_normal < 1 || counts.test_abnormal < 1 || counts.val_normal < 0 ||
        counts.val_abnormal < 0) {
        throw InvalidArgument("synthetic dataset: train and both test classes need at least one image");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    if (ec) throw IoError("cannot create output directory " + (out_dir / "images").string() + ": " + ec.message());

    SliceManifest m;
    m.dataset = "synthetic";
    m.height = spec.height;
    m.width = spec.width;
    m.base_dir = out_dir;

    struct Group {
        const char* prefix;
        int count;
        Split split;
        Label label;
    };
    const Group groups[] = {
        {"train", counts.train, Split::train, Label::normal},
        {"val_normal", counts.val_normal, Split::val, Label::normal},
        {"val_abnormal", counts.val_abnormal, Split::val, Label::abnormal},
        {"test_normal", counts.test_normal, Split::test, Label::normal},
        {"test_abnormal", counts.test_abnormal, Split::test, Label::abnormal},
    };
    for (std::uint64_t g = 0; g < std::size(groups); ++g) {
        for (int i = 0; i < groups[g].count; ++i) {
            char id[64];
            std::snprintf(id, sizeof(id), "%s_%04d", groups[g].prefix, i);
            const std::uint64_t image_seed = derive_seed(seed, {g, static_cast<std::uint64_t>(i)});
            const Image img = groups[g].label == Label::normal ? synth_texture(spec, image_seed)
                                                               : synth_abnormal(spec, image_seed).image;
            const std::filesystem::path rel = std::filesystem::path("images") / (std::string(id) + ".png");
            write_png_unit(out_dir / rel, img);
            m.records.push_back({id, rel, groups[g].label, groups[g].split, id});
        }
    }
    write_manifest(out_dir / "manifest.txt", m);
    return m;
}

}  // namespace maeanom
