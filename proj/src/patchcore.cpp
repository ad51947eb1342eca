#include "maeanom/patchcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maeanom {

bool MaskPlan::is_masked(int index) const {
    return std::binary_search(masked.begin(), masked.end(), index);
}

namespace {

// 1D sin-cos encoding of `coord` into `out` (length dim, dim even).
void encode_1d(double coord, int dim, double* out) {
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / half);
        out[i] = std::sin(coord * omega);
        out[half + i] = std::cos(coord * omega);
    }
}

}  // namespace

Matrix sincos_position_table(int grid_rows, int grid_cols, int embed_dim) {
    if (grid_rows <= 0 || grid_cols <= 0) throw InvalidArgument("position table: empty grid");
    if (embed_dim <= 0 || embed_dim % 4 != 0) {
        throw InvalidArgument("position table: embed dim " + std::to_string(embed_dim) + " is not divisible by 4");
    }
    Matrix pos(grid_rows * grid_cols, embed_dim);
    const int half = embed_dim / 2;
    for (int r = 0; r < grid_rows; ++r) {
        for (int c = 0; c < grid_cols; ++c) {
            double* row = pos.row(r * grid_cols + c).data();
            encode_1d(c, half, row);
            encode_1d(r, half, row + half);
        }
    }
    return pos;
}

TokenSequence embed(const PatchSequence& patches, const Matrix& weight, const RowVector& bias, const Matrix& pos) {
    if (weight.rows() != patches.patches.cols()) {
        throw DimensionError("embed: projection expects " + std::to_string(weight.rows()) +
                             " inputs, patches have " + std::to_string(patches.patches.cols()));
    }
    if (bias.size() != weight.cols() || pos.cols() != weight.cols() || pos.rows() != patches.patches.rows()) {
        throw DimensionError("embed: bias/position table shape does not match projection");
    }
    TokenSequence out;
    out.tokens = patches.patches * weight;
    out.tokens.rowwise() += bias;
    out.tokens += pos;
    out.pos = pos;
    return out;
}

int masked_count(int token_count, double mask_ratio) {
    if (!(mask_ratio >= 0.0 && mask_ratio < 1.0)) {
        throw InvalidArgument("mask ratio " + std::to_string(mask_ratio) + " outside [0, 1)");
    }
    // The epsilon absorbs representation error such as 0.7 * 10 = 6.99...
    return static_cast<int>(std::floor(mask_ratio * token_count + 1e-9));
}

MaskPlan make_mask_plan(int token_count, double mask_ratio, std::uint64_t seed) {
    if (token_count <= 0) throw InvalidArgument("mask: empty token sequence");
    const int n_masked = masked_count(token_count, mask_ratio);

    std::vector<int> order(token_count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    MaskPlan plan;
    plan.mask_ratio = mask_ratio;
    plan.token_count = token_count;
    plan.seed = seed;
    plan.masked.assign(order.begin(), order.begin() + n_masked);
    plan.visible.assign(order.begin() + n_masked, order.end());
    std::sort(plan.masked.begin(), plan.masked.end());
    std::sort(plan.visible.begin(), plan.visible.end());
    return plan;
}

MaskedTokens mask(const TokenSequence& tokens, double mask_ratio, std::uint64_t seed) {
    MaskedTokens out;
    out.plan = make_mask_plan(tokens.count(), mask_ratio, seed);
    out.visible = gather_rows(tokens.tokens, out.plan.visible);
    return out;
}

Matrix gather_rows(const Matrix& m, const std::vector<int>& indices) {
    Matrix out(static_cast<Eigen::Index>(indices.size()), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(indices[i]);
    return out;
}

}  // namespace maeanom
