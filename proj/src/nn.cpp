#include "maeanom/nn.hpp"

#include <cmath>

namespace maeanom::nn {

void zero_grads(const NamedParams& params) {
    for (auto& [name, p] : params) p->grad.setZero();
}

void scale_grads(const NamedParams& params, double factor) {
    for (auto& [name, p] : params) p->grad *= factor;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(int in_features, int out_features, Rng& rng) {
    const double bound = std::sqrt(6.0 / (in_features + out_features));
    weight.value.resize(in_features, out_features);
    for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value.data()[i] = rng.uniform(-bound, bound);
    weight.decay = true;
    bias.value = Matrix::Zero(1, out_features);
    weight.init_grad();
    bias.init_grad();
}

Matrix Linear::forward(const Matrix& x) const {
    Matrix y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad += dy.colwise().sum();
    return dy * weight.value.transpose();
}

void Linear::collect(const std::string& prefix, NamedParams& out) {
    out.emplace_back(prefix + ".weight", &weight);
    out.emplace_back(prefix + ".bias", &bias);
}

// ---------------------------------------------------------------------------
// LayerNorm

LayerNorm::LayerNorm(int dim) {
    gamma.value = Matrix::Ones(1, dim);
    beta.value = Matrix::Zero(1, dim);
    gamma.init_grad();
    beta.init_grad();
}

Matrix LayerNorm::forward(const Matrix& x, Cache* cache) const {
    const auto n = x.rows();
    const auto d = static_cast<double>(x.cols());
    Matrix normalized(n, x.cols());
    Vector inv_std(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mean = x.row(i).sum() / d;
        const double var = (x.row(i).array() - mean).square().sum() / d;
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        normalized.row(i) = (x.row(i).array() - mean) * inv_std(i);
    }
    Matrix y = normalized.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    if (cache) {
        cache->normalized = std::move(normalized);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

Matrix LayerNorm::backward(const Cache& cache, const Matrix& dy) {
    const Matrix& xhat = cache.normalized;
    gamma.grad += (dy.array() * xhat.array()).colwise().sum().matrix();
    beta.grad += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    const double d = static_cast<double>(dy.cols());
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const double mean_g = dxhat.row(i).sum() / d;
        const double mean_gx = dxhat.row(i).dot(xhat.row(i)) / d;
        dx.row(i) = cache.inv_std(i) * (dxhat.row(i).array() - mean_g - xhat.row(i).array() * mean_gx);
    }
    return dx;
}

void LayerNorm::collect(const std::string& prefix, NamedParams& out) {
    out.emplace_back(prefix + ".gamma", &gamma);
    out.emplace_back(prefix + ".beta", &beta);
}

// ---------------------------------------------------------------------------
// MultiHeadAttention

MultiHeadAttention::MultiHeadAttention(int dim, int heads_, Rng& rng)
    : heads(heads_), query(dim, dim, rng), key(dim, dim, rng), value(dim, dim, rng), proj(dim, dim, rng) {
    if (heads <= 0 || dim % heads != 0) {
        throw InvalidArgument("attention: width " + std::to_string(dim) + " not divisible by " +
                              std::to_string(heads) + " heads");
    }
}

Matrix MultiHeadAttention::forward(const Matrix& x, Cache* cache) const {
    const auto n = x.rows();
    const auto d = x.cols();
    const auto dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix q = query.forward(x);
    Matrix k = key.forward(x);
    Matrix v = value.forward(x);
    Matrix context(n, d);
    std::vector<Matrix> attn(static_cast<std::size_t>(heads));

    for (int h = 0; h < heads; ++h) {
        Matrix s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose()) * scale;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mx = s.row(i).maxCoeff();
            s.row(i) = (s.row(i).array() - mx).exp();
            s.row(i) /= s.row(i).sum();
        }
        context.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh);
        attn[static_cast<std::size_t>(h)] = std::move(s);
    }

    Matrix out = proj.forward(context);
    if (cache) {
        cache->x = x;
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->attn = std::move(attn);
        cache->context = std::move(context);
    }
    return out;
}

Matrix MultiHeadAttention::backward(const Cache& cache, const Matrix& dy) {
    const auto n = cache.x.rows();
    const auto d = cache.x.cols();
    const auto dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Matrix dcontext = proj.backward(cache.context, dy);
    Matrix dq(n, d), dk(n, d), dv(n, d);
    for (int h = 0; h < heads; ++h) {
        const Matrix& a = cache.attn[static_cast<std::size_t>(h)];
        const auto dctx = dcontext.middleCols(h * dh, dh);
        const Matrix da = dctx * cache.v.middleCols(h * dh, dh).transpose();
        dv.middleCols(h * dh, dh).noalias() = a.transpose() * dctx;
        // softmax backward, row by row
        const Vector row_dot = (da.array() * a.array()).rowwise().sum();
        const Matrix ds = (a.array() * (da.array().colwise() - row_dot.array())).matrix() * scale;
        dq.middleCols(h * dh, dh).noalias() = ds * cache.k.middleCols(h * dh, dh);
        dk.middleCols(h * dh, dh).noalias() = ds.transpose() * cache.q.middleCols(h * dh, dh);
    }
    Matrix dx = query.backward(cache.x, dq);
    dx += key.backward(cache.x, dk);
    dx += value.backward(cache.x, dv);
    return dx;
}

void MultiHeadAttention::collect(const std::string& prefix, NamedParams& out) {
    query.collect(prefix + ".query", out);
    key.collect(prefix + ".key", out);
    value.collect(prefix + ".value", out);
    proj.collect(prefix + ".proj", out);
}

// ---------------------------------------------------------------------------
// Mlp

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_derivative(double x) {
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

Mlp::Mlp(int dim, int hidden_dim, Rng& rng) : fc1(dim, hidden_dim, rng), fc2(hidden_dim, dim, rng) {}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
    Matrix pre = fc1.forward(x);
    Matrix act = pre.unaryExpr([](double v) { return gelu(v); });
    Matrix out = fc2.forward(act);
    if (cache) {
        cache->x = x;
        cache->hidden_pre = std::move(pre);
        cache->hidden = std::move(act);
    }
    return out;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& dy) {
    const Matrix dact = fc2.backward(cache.hidden, dy);
    const Matrix dpre = dact.array() * cache.hidden_pre.unaryExpr([](double v) { return gelu_derivative(v); }).array();
    return fc1.backward(cache.x, dpre);
}

void Mlp::collect(const std::string& prefix, NamedParams& out) {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
}

// ---------------------------------------------------------------------------
// TransformerBlock

TransformerBlock::TransformerBlock(int dim, int heads, double mlp_ratio, Rng& rng)
    : norm1(dim), norm2(dim), attn(dim, heads, rng),
      mlp(dim, static_cast<int>(std::lround(dim * mlp_ratio)), rng) {}

Matrix TransformerBlock::forward(const Matrix& x, Cache* cache) const {
    Matrix h = x + attn.forward(norm1.forward(x, cache ? &cache->norm1 : nullptr), cache ? &cache->attn : nullptr);
    h += mlp.forward(norm2.forward(h, cache ? &cache->norm2 : nullptr), cache ? &cache->mlp : nullptr);
    return h;
}

Matrix TransformerBlock::backward(const Cache& cache, const Matrix& dy) {
    Matrix dh = dy + norm2.backward(cache.norm2, mlp.backward(cache.mlp, dy));
    Matrix dx = dh + norm1.backward(cache.norm1, attn.backward(cache.attn, dh));
    return dx;
}

void TransformerBlock::collect(const std::string& prefix, NamedParams& out) {
    norm1.collect(prefix + ".norm1", out);
    attn.collect(prefix + ".attn", out);
    norm2.collect(prefix + ".norm2", out);
    mlp.collect(prefix + ".mlp", out);
}

// ---------------------------------------------------------------------------
// TransformerStack

TransformerStack::TransformerStack(int dim, int depth, int heads, double mlp_ratio, Rng& rng) : norm(dim) {
    blocks.reserve(static_cast<std::size_t>(depth));
    for (int i = 0; i < depth; ++i) blocks.emplace_back(dim, heads, mlp_ratio, rng);
}

Matrix TransformerStack::forward(const Matrix& x, Cache* cache) const {
    if (cache) cache->blocks.resize(blocks.size());
    Matrix h = x;
    for (std::size_t i = 0; i < blocks.size(); ++i) h = blocks[i].forward(h, cache ? &cache->blocks[i] : nullptr);
    return norm.forward(h, cache ? &cache->norm : nullptr);
}

Matrix TransformerStack::backward(const Cache& cache, const Matrix& dy) {
    Matrix dh = norm.backward(cache.norm, dy);
    for (std::size_t i = blocks.size(); i-- > 0;) dh = blocks[i].backward(cache.blocks[i], dh);
    return dh;
}

void TransformerStack::collect(const std::string& prefix, NamedParams& out) {
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".blocks." + std::to_string(i), out);
    norm.collect(prefix + ".norm", out);
}

// ---------------------------------------------------------------------------
// AdamW

AdamW::AdamW(const NamedParams& params, AdamWSettings settings) : settings_(settings) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& [name, p] : params) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void AdamW::step(const NamedParams& params, double lr) {
    if (params.size() != m_.size()) throw InvalidArgument("AdamW: parameter list changed since construction");
    ++steps_;
    const double bc1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i].second;
        m_[i] = settings_.beta1 * m_[i] + (1.0 - settings_.beta1) * p.grad;
        v_[i] = settings_.beta2 * v_[i] + (1.0 - settings_.beta2) * p.grad.cwiseProduct(p.grad);
        if (p.decay && settings_.weight_decay > 0.0) p.value *= (1.0 - lr * settings_.weight_decay);
        p.value.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + settings_.eps);
    }
}

double cosine_lr(double base_lr, int epoch, int total_epochs, int warmup_epochs) {
    if (epoch < warmup_epochs) return base_lr * (epoch + 1) / warmup_epochs;
    const int span = total_epochs - warmup_epochs;
    if (span <= 0) return base_lr;
    const double progress = static_cast<double>(epoch - warmup_epochs) / span;
    return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

}  // namespace maeanom::nn
