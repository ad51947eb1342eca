#include "maeanom/pseudoanom.hpp"

#include "maeanom/text.hpp"

#include <istream>
#include <ostream>

namespace maeanom {

Matrix per_pixel_betas(const PseudoAbnormalSpec& spec, std::size_t box_index) {
    const Box& b = spec.boxes.at(box_index);
    Rng rng(derive_seed(spec.seed, {0xbe7au, static_cast<std::uint64_t>(box_index)}));
    Matrix betas(b.h, b.w);
    for (Eigen::Index i = 0; i < betas.size(); ++i) betas.data()[i] = rng.uniform();
    return betas;
}

PseudoAbnormalSpec sample_spec(int height, int width, int k_min, int k_max, int size_min, int size_max,
                               std::uint64_t seed, bool per_pixel_beta) {
    if (k_min < 1 || k_max < k_min) {
        throw InvalidArgument("pseudo-abnormal: box count range (" + std::to_string(k_min) + ", " +
                              std::to_string(k_max) + ") is invalid");
    }
    if (size_min < 1 || size_max < size_min) throw InvalidArgument("pseudo-abnormal: box size range is invalid");
    if (size_max > height || size_max > width) {
        throw InvalidArgument("pseudo-abnormal: box size " + std::to_string(size_max) + " exceeds image " +
                              std::to_string(height) + "x" + std::to_string(width));
    }
    PseudoAbnormalSpec spec;
    spec.height = height;
    spec.width = width;
    spec.k_min = k_min;
    spec.k_max = k_max;
    spec.size_min = size_min;
    spec.size_max = size_max;
    spec.per_pixel_beta = per_pixel_beta;
    spec.seed = seed;

    Rng rng(seed);
    const auto k = static_cast<int>(rng.uniform_int(k_min, k_max));
    spec.boxes.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        Box b;
        b.w = static_cast<int>(rng.uniform_int(size_min, size_max));
        b.h = static_cast<int>(rng.uniform_int(size_min, size_max));
        b.x = static_cast<int>(rng.uniform_int(0, width - b.w));
        b.y = static_cast<int>(rng.uniform_int(0, height - b.h));
        b.beta = rng.uniform();
        spec.boxes.push_back(b);
    }
    return spec;
}

std::pair<int, int> default_box_size_range(int image_side) {
    if (image_side >= 224) return {10, 40};
    return {5, 12};
}

Image apply(const Image& recon, const PseudoAbnormalSpec& spec) {
    if ((spec.height > 0 && spec.height != recon.rows()) || (spec.width > 0 && spec.width != recon.cols())) {
        throw DimensionError("pseudo-abnormal: spec is for " + std::to_string(spec.height) + "x" +
                             std::to_string(spec.width) + " images");
    }
    Image out = recon;
    for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
        const Box& b = spec.boxes[i];
        if (b.x < 0 || b.y < 0 || b.w < 1 || b.h < 1 || b.x + b.w > recon.cols() || b.y + b.h > recon.rows()) {
            throw InvalidArgument("pseudo-abnormal: box " + std::to_string(i) + " lies outside the " +
                                  std::to_string(recon.rows()) + "x" + std::to_string(recon.cols()) + " image");
        }
        auto region = out.block(b.y, b.x, b.h, b.w);
        if (spec.per_pixel_beta) {
            region.array() *= per_pixel_betas(spec, i).array();
        } else {
            region *= b.beta;
        }
    }
    return out;
}

void write_spec(std::ostream& out, const PseudoAbnormalSpec& spec) {
    out << "pseudo_abnormal_spec height=" << spec.height << " width=" << spec.width << " k=" << spec.k()
        << " k_min=" << spec.k_min << " k_max=" << spec.k_max << " size_min=" << spec.size_min
        << " size_max=" << spec.size_max << " per_pixel_beta=" << (spec.per_pixel_beta ? 1 : 0)
        << " seed=" << spec.seed << '\n';
    for (const Box& b : spec.boxes) {
        out << b.x << ' ' << b.y << ' ' << b.w << ' ' << b.h << ' ' << text::format_double(b.beta) << '\n';
    }
}

PseudoAbnormalSpec read_spec(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("pseudo-abnormal spec: missing header");
    const auto fields = text::split_ws(line);
    if (fields.empty() || fields[0] != "pseudo_abnormal_spec") throw FormatError("pseudo-abnormal spec: bad header");
    PseudoAbnormalSpec spec;
    int k = -1;
    for (std::size_t i = 1; i < fields.size(); ++i) {
        const auto eq = fields[i].find('=');
        if (eq == std::string::npos) throw FormatError("pseudo-abnormal spec: bad header field " + fields[i]);
        const std::string key = fields[i].substr(0, eq);
        const std::string value = fields[i].substr(eq + 1);
        if (key == "seed") {
            spec.seed = std::stoull(value);
            continue;
        }
        const auto v = static_cast<int>(text::parse_int(value, key));
        if (key == "height") spec.height = v;
        else if (key == "width") spec.width = v;
        else if (key == "k") k = v;
        else if (key == "k_min") spec.k_min = v;
        else if (key == "k_max") spec.k_max = v;
        else if (key == "size_min") spec.size_min = v;
        else if (key == "size_max") spec.size_max = v;
        else if (key == "per_pixel_beta") spec.per_pixel_beta = v != 0;
        else throw FormatError("pseudo-abnormal spec: unknown header field " + key);
    }
    if (k < 0) throw FormatError("pseudo-abnormal spec: header lacks k");
    for (int i = 0; i < k; ++i) {
        if (!std::getline(in, line)) throw FormatError("pseudo-abnormal spec: expected " + std::to_string(k) + " boxes");
        const auto f = text::split_ws(line);
        if (f.size() != 5) throw FormatError("pseudo-abnormal spec: box line needs 5 fields");
        Box b;
        b.x = static_cast<int>(text::parse_int(f[0], "x"));
        b.y = static_cast<int>(text::parse_int(f[1], "y"));
        b.w = static_cast<int>(text::parse_int(f[2], "w"));
        b.h = static_cast<int>(text::parse_int(f[3], "h"));
        b.beta = text::parse_double(f[4], "beta");
        spec.boxes.push_back(b);
    }
    return spec;
}

}  // namespace maeanom
