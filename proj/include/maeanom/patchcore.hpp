#pragma once

// Image tokenization: patch extraction and its inverse, fixed 2D sin-cos
// positional tables, and random token masking.

#include "maeanom/random.hpp"
#include "maeanom/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace maeanom {

template <typename T>
struct PatchSequenceT {
    MatrixT<T> patches;  // n x p*p, row-major grid order
    int patch_size = 0;
    int grid_rows = 0;
    int grid_cols = 0;

    int count() const { return static_cast<int>(patches.rows()); }
};
using PatchSequence = PatchSequenceT<Scalar>;

struct TokenSequence {
    Matrix tokens;  // n x d
    Matrix pos;     // n x d, fixed

    int count() const { return static_cast<int>(tokens.rows()); }
    int embed_dim() const { return static_cast<int>(tokens.cols()); }
};

struct MaskPlan {
    double mask_ratio = 0.0;
    int token_count = 0;
    std::vector<int> masked;   // ascending
    std::vector<int> visible;  // ascending
    std::uint64_t seed = 0;

    bool is_masked(int index) const;
};

template <typename Derived>
PatchSequenceT<typename Derived::Scalar> patchify(const Eigen::MatrixBase<Derived>& image, int patch_size) {
    using T = typename Derived::Scalar;
    const auto h = static_cast<int>(image.rows());
    const auto w = static_cast<int>(image.cols());
    if (patch_size <= 0) throw InvalidArgument("patchify: patch size must be positive");
    if (h == 0 || w == 0 || h % patch_size != 0 || w % patch_size != 0) {
        throw DimensionError("patchify: image " + std::to_string(h) + "x" + std::to_string(w) +
                             " is not divisible by patch size " + std::to_string(patch_size));
    }
    PatchSequenceT<T> out;
    out.patch_size = patch_size;
    out.grid_rows = h / patch_size;
    out.grid_cols = w / patch_size;
    out.patches.resize(out.grid_rows * out.grid_cols, patch_size * patch_size);
    for (int gr = 0; gr < out.grid_rows; ++gr) {
        for (int gc = 0; gc < out.grid_cols; ++gc) {
            const int row = gr * out.grid_cols + gc;
            for (int i = 0; i < patch_size; ++i) {
                for (int j = 0; j < patch_size; ++j) {
                    out.patches(row, i * patch_size + j) = image(gr * patch_size + i, gc * patch_size + j);
                }
            }
        }
    }
    return out;
}

template <typename T>
MatrixT<T> unpatchify(const PatchSequenceT<T>& seq) {
    const int p = seq.patch_size;
    if (p <= 0 || seq.grid_rows <= 0 || seq.grid_cols <= 0) {
        throw DimensionError("unpatchify: empty patch grid");
    }
    if (seq.patches.rows() != seq.grid_rows * seq.grid_cols || seq.patches.cols() != p * p) {
        throw DimensionError("unpatchify: " + std::to_string(seq.patches.rows()) + "x" +
                             std::to_string(seq.patches.cols()) + " patch matrix does not match a " +
                             std::to_string(seq.grid_rows) + "x" + std::to_string(seq.grid_cols) +
                             " grid of " + std::to_string(p) + "px patches");
    }
    MatrixT<T> image(seq.grid_rows * p, seq.grid_cols * p);
    for (int gr = 0; gr < seq.grid_rows; ++gr) {
        for (int gc = 0; gc < seq.grid_cols; ++gc) {
            const int row = gr * seq.grid_cols + gc;
            for (int i = 0; i < p; ++i) {
                for (int j = 0; j < p; ++j) image(gr * p + i, gc * p + j) = seq.patches(row, i * p + j);
            }
        }
    }
    return image;
}

/// Fixed 2D sin-cos table for a grid_rows x grid_cols patch grid. The first
/// half of each row encodes the column coordinate and the second half the row
/// coordinate. embed_dim must be divisible by 4.
Matrix sincos_position_table(int grid_rows, int grid_cols, int embed_dim);

/// tokens = patches * weight + bias + pos. weight is (p*p) x d.
TokenSequence embed(const PatchSequence& patches, const Matrix& weight, const RowVector& bias, const Matrix& pos);

/// Number of masked tokens for a ratio: floor(ratio * n).
int masked_count(int token_count, double mask_ratio);

/// Uniform random partition of {0..n-1}; floor(ratio * n) indices masked.
MaskPlan make_mask_plan(int token_count, double mask_ratio, std::uint64_t seed);

struct MaskedTokens {
    Matrix visible;  // rows in ascending original order
    MaskPlan plan;
};

MaskedTokens mask(const TokenSequence& tokens, double mask_ratio, std::uint64_t seed);

/// Rows of `m` at `indices`, in the given order.
Matrix gather_rows(const Matrix& m, const std::vector<int>& indices);

}  // namespace maeanom
