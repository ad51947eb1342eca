#pragma once

// Pseudo-abnormal samples: k random axis-aligned boxes, each attenuating the
// pixels it covers by a multiplier beta ~ U[0, 1).

#include "maeanom/random.hpp"
#include "maeanom/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace maeanom {

struct Box {
    int x = 0;  // column of the top-left corner
    int y = 0;  // row of the top-left corner
    int w = 0;
    int h = 0;
    double beta = 1.0;
};

struct PseudoAbnormalSpec {
    int height = 0;
    int width = 0;
    int k_min = 1;
    int k_max = 10;
    int size_min = 5;
    int size_max = 12;
    bool per_pixel_beta = false;
    std::uint64_t seed = 0;
    std::vector<Box> boxes;

    int k() const { return static_cast<int>(boxes.size()); }
};

/// Per-box beta field used when per_pixel_beta is set; one U[0,1) value per
/// covered pixel, derived from the spec seed and box index.
Matrix per_pixel_betas(const PseudoAbnormalSpec& spec, std::size_t box_index);

PseudoAbnormalSpec sample_spec(int height, int width, int k_min, int k_max, int size_min, int size_max,
                               std::uint64_t seed, bool per_pixel_beta = false);

/// Default box size range for an image side length: 10-40 px at 224 and
/// above, 5-12 px below.
std::pair<int, int> default_box_size_range(int image_side);

/// Multiplies the pixels of each box by its beta, in list order. Pixels
/// outside every box are copied unchanged.
Image apply(const Image& recon, const PseudoAbnormalSpec& spec);

/// Line-delimited record: one header line followed by one line per box.
void write_spec(std::ostream& out, const PseudoAbnormalSpec& spec);
PseudoAbnormalSpec read_spec(std::istream& in);

}  // namespace maeanom
