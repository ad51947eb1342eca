#pragma once

// Minimal pre-norm transformer with hand-written backward passes. All layers
// operate on one sequence at a time (rows = tokens). Forward passes are const
// and optionally fill a cache; backward passes accumulate into Param::grad.

#include "maeanom/random.hpp"
#include "maeanom/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace maeanom::nn {

struct Param {
    Matrix value;
    Matrix grad;
    bool decay = false;  // subject to decoupled weight decay

    void init_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

using NamedParams = std::vector<std::pair<std::string, Param*>>;

void zero_grads(const NamedParams& params);
void scale_grads(const NamedParams& params, double factor);

class Linear {
public:
    Linear() = default;
    /// Xavier-uniform weights, zero bias.
    Linear(int in_features, int out_features, Rng& rng);

    int in_features() const { return static_cast<int>(weight.value.rows()); }
    int out_features() const { return static_cast<int>(weight.value.cols()); }

    Matrix forward(const Matrix& x) const;
    /// Returns dL/dx; `x` is the input seen by forward.
    Matrix backward(const Matrix& x, const Matrix& dy);
    void collect(const std::string& prefix, NamedParams& out);

    Param weight;  // in x out
    Param bias;    // 1 x out
};

class LayerNorm {
public:
    struct Cache {
        Matrix normalized;
        Vector inv_std;
    };

    LayerNorm() = default;
    explicit LayerNorm(int dim);

    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);
    void collect(const std::string& prefix, NamedParams& out);

    Param gamma;
    Param beta;
    double eps = 1e-6;
};

class MultiHeadAttention {
public:
    struct Cache {
        Matrix x, q, k, v;
        std::vector<Matrix> attn;  // per head, n x n
        Matrix context;            // n x d, heads concatenated
    };

    MultiHeadAttention() = default;
    MultiHeadAttention(int dim, int heads, Rng& rng);

    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);
    void collect(const std::string& prefix, NamedParams& out);

    int heads = 1;
    Linear query, key, value, proj;
};

/// tanh approximation of GELU.
double gelu(double x);
double gelu_derivative(double x);

class Mlp {
public:
    struct Cache {
        Matrix x, hidden_pre, hidden;
    };

    Mlp() = default;
    Mlp(int dim, int hidden_dim, Rng& rng);

    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);
    void collect(const std::string& prefix, NamedParams& out);

    Linear fc1, fc2;
};

/// x + attn(norm1(x)), then + mlp(norm2(.)).
class TransformerBlock {
public:
    struct Cache {
        LayerNorm::Cache norm1, norm2;
        MultiHeadAttention::Cache attn;
        Mlp::Cache mlp;
    };

    TransformerBlock() = default;
    TransformerBlock(int dim, int heads, double mlp_ratio, Rng& rng);

    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);
    void collect(const std::string& prefix, NamedParams& out);

    LayerNorm norm1, norm2;
    MultiHeadAttention attn;
    Mlp mlp;
};

/// Blocks followed by a final LayerNorm.
class TransformerStack {
public:
    struct Cache {
        std::vector<TransformerBlock::Cache> blocks;
        LayerNorm::Cache norm;
    };

    TransformerStack() = default;
    TransformerStack(int dim, int depth, int heads, double mlp_ratio, Rng& rng);

    Matrix forward(const Matrix& x, Cache* cache) const;
    Matrix backward(const Cache& cache, const Matrix& dy);
    void collect(const std::string& prefix, NamedParams& out);

    std::vector<TransformerBlock> blocks;
    LayerNorm norm;
};

struct AdamWSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
};

/// Adam with decoupled weight decay; decay applies to params flagged `decay`.
class AdamW {
public:
    AdamW() = default;
    AdamW(const NamedParams& params, AdamWSettings settings);

    void step(const NamedParams& params, double lr);

    std::int64_t steps() const { return steps_; }
    std::vector<Matrix>& first_moments() { return m_; }
    std::vector<Matrix>& second_moments() { return v_; }
    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }
    void set_steps(std::int64_t s) { steps_ = s; }

private:
    AdamWSettings settings_;
    std::vector<Matrix> m_, v_;
    std::int64_t steps_ = 0;
};

/// Linear warmup then cosine decay to zero, evaluated per epoch.
double cosine_lr(double base_lr, int epoch, int total_epochs, int warmup_epochs);

}  // namespace maeanom::nn
