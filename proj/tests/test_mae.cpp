#include "doctest.h"

#include "maeanom/mae.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace maeanom;

namespace {

MaeArchitecture tiny_arch() {
    MaeArchitecture a;
    a.image_height = 8;
    a.image_width = 8;
    a.patch_size = 4;  // 4 tokens of 16 pixels
    a.enc_dim = 8;
    a.enc_depth = 1;
    a.enc_heads = 2;
    a.dec_dim = 8;
    a.dec_depth = 1;
    a.dec_heads = 2;
    a.mlp_ratio = 2.0;
    return a;
}

Image random_image(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Image img(h, w);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = rng.uniform();
    return img;
}

MaskPlan plan_with(int n, std::vector<int> masked) {
    MaskPlan p;
    p.token_count = n;
    p.masked = masked;
    for (int i = 0; i < n; ++i) {
        if (!std::binary_search(masked.begin(), masked.end(), i)) p.visible.push_back(i);
    }
    p.mask_ratio = static_cast<double>(masked.size()) / n;
    return p;
}

// ---- Independent scalar reference of the forward pass ---------------------

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Matrix& m) {
    Rows r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
    return r;
}

Rows ref_linear(const Rows& x, const nn::Linear& l) {
    Rows y(x.size(), std::vector<double>(static_cast<std::size_t>(l.out_features())));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (int o = 0; o < l.out_features(); ++o) {
            double s = l.bias.value(0, o);
            for (int k = 0; k < l.in_features(); ++k) s += x[i][k] * l.weight.value(k, o);
            y[i][o] = s;
        }
    return y;
}

Rows ref_layernorm(const Rows& x, const nn::LayerNorm& ln) {
    Rows y = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double mean = 0, var = 0;
        for (double v : x[i]) mean += v;
        mean /= x[i].size();
        for (double v : x[i]) var += (v - mean) * (v - mean);
        var /= x[i].size();
        for (std::size_t j = 0; j < x[i].size(); ++j)
            y[i][j] = (x[i][j] - mean) / std::sqrt(var + ln.eps) * ln.gamma.value(0, j) + ln.beta.value(0, j);
    }
    return y;
}

Rows ref_attention(const Rows& x, const nn::MultiHeadAttention& a) {
    const Rows q = ref_linear(x, a.query), k = ref_linear(x, a.key), v = ref_linear(x, a.value);
    const std::size_t n = x.size(), d = x[0].size(), dh = d / a.heads;
    Rows ctx(n, std::vector<double>(d, 0.0));
    for (int h = 0; h < a.heads; ++h) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> w(n);
            double mx = -1e300;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0;
                for (std::size_t c = 0; c < dh; ++c) s += q[i][h * dh + c] * k[j][h * dh + c];
                w[j] = s / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, w[j]);
            }
            double z = 0;
            for (auto& wj : w) z += (wj = std::exp(wj - mx));
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t c = 0; c < dh; ++c) ctx[i][h * dh + c] += w[j] / z * v[j][h * dh + c];
        }
    }
    return ref_linear(ctx, a.proj);
}

Rows add(const Rows& a, const Rows& b) {
    Rows c = a;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) c[i][j] += b[i][j];
    return c;
}

Rows ref_block(const Rows& x, const nn::TransformerBlock& b) {
    const Rows h = add(x, ref_attention(ref_layernorm(x, b.norm1), b.attn));
    Rows hidden = ref_linear(ref_layernorm(h, b.norm2), b.mlp.fc1);
    for (auto& row : hidden)
        for (auto& v : row) v = 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v)));
    return add(h, ref_linear(hidden, b.mlp.fc2));
}

Rows ref_stack(Rows x, const nn::TransformerStack& s) {
    for (const auto& b : s.blocks) x = ref_block(x, b);
    return ref_layernorm(x, s.norm);
}

Rows ref_mae_forward(const MaeModel& m, const Matrix& patches, const MaskPlan& plan) {
    Rows tokens = ref_linear(to_rows(patches), m.patch_embed);
    tokens = add(tokens, to_rows(m.pos_encoder));
    Rows visible;
    for (int v : plan.visible) visible.push_back(tokens[v]);
    const Rows enc = ref_linear(ref_stack(visible, m.encoder), m.decoder_embed);
    Rows z(static_cast<std::size_t>(plan.token_count));
    for (std::size_t i = 0; i < plan.visible.size(); ++i) z[plan.visible[i]] = enc[i];
    for (int idx : plan.masked) z[idx] = to_rows(m.mask_token.value)[0];
    z = add(z, to_rows(m.pos_decoder));
    return ref_linear(ref_stack(z, m.decoder), m.head);
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("forward with no masking encodes every token") {
    MaeModel m(tiny_arch(), 1);
    const auto patches = patchify(random_image(8, 8, 2), 4);
    const auto plan = make_mask_plan(4, 0.0, 0);
    MaeModel::Cache cache;
    const Matrix pred = m.forward(patches, plan, &cache);
    CHECK(pred.rows() == 4);
    CHECK(pred.cols() == 16);
    CHECK(cache.encoded.rows() == 4);
    CHECK(cache.plan.masked.empty());
}

TEST_CASE("decoder input uses the mask token at masked rows") {
    MaeModel m(tiny_arch(), 1);
    const auto plan = make_mask_plan(4, 0.5, 9);
    const Matrix encoded = Matrix::Random(2, 8);
    const Matrix z = m.decoder_input(encoded, plan);
    for (int idx : plan.masked) {
        CHECK((z.row(idx) - (m.mask_token.value.row(0) + m.pos_decoder.row(idx))).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("forward matches an independent scalar reference") {
    MaeModel m(tiny_arch(), 3);
    const auto patches = patchify(random_image(8, 8, 4), 4);
    const auto plan = plan_with(4, {1, 2});
    const Matrix pred = m.forward(patches, plan);
    const Rows ref = ref_mae_forward(m, patches.patches, plan);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 16; ++j) CHECK(pred(i, j) == doctest::Approx(ref[i][j]).epsilon(1e-10));
}

TEST_CASE("forward rejects inconsistent plans") {
    MaeModel m(tiny_arch(), 1);
    const auto patches = patchify(random_image(8, 8, 2), 4);
    CHECK_THROWS_AS(m.forward(patches, make_mask_plan(5, 0.4, 0)), DimensionError);
}

TEST_CASE("masked loss values") {
    const Matrix target = Matrix::Random(4, 16);
    const auto plan = plan_with(4, {1, 3});
    CHECK(masked_loss(target, target, plan) == 0.0);

    Matrix pred = target;
    pred.row(0).array() += 5.0;  // visible position
    CHECK(masked_loss(pred, target, plan) == 0.0);

    // explicit summation oracle
    Rng rng(8);
    Matrix p2 = target;
    for (Eigen::Index i = 0; i < p2.size(); ++i) p2.data()[i] += rng.normal();
    double sum = 0;
    for (int i : {1, 3})
        for (int j = 0; j < 16; ++j) sum += (target(i, j) - p2(i, j)) * (target(i, j) - p2(i, j)) / 16.0;
    CHECK(masked_loss(p2, target, plan) == doctest::Approx(sum / 2.0).epsilon(1e-14));

    Matrix unit = target;
    unit.row(1).array() += 1.0;
    unit.row(3).array() -= 1.0;
    CHECK(masked_loss(unit, target, plan) == doctest::Approx(1.0));

    CHECK_THROWS_AS(masked_loss(target, target, plan_with(4, {})), InvalidArgument);
}

TEST_CASE("masked loss gradient") {
    Rng rng(12);
    Matrix target(6, 9), pred(6, 9);
    for (Eigen::Index i = 0; i < target.size(); ++i) {
        target.data()[i] = rng.uniform();
        pred.data()[i] = rng.uniform();
    }
    const auto plan = plan_with(6, {0, 2, 5});
    const Matrix g = masked_loss_gradient(pred, target, plan);
    for (int v : plan.visible) CHECK(g.row(v).isZero(0.0));
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
        Matrix up = pred, down = pred;
        up.data()[i] += h;
        down.data()[i] -= h;
        const double fd = (masked_loss(up, target, plan) - masked_loss(down, target, plan)) / (2 * h);
        CHECK(fd == doctest::Approx(g.data()[i]).epsilon(1e-4).scale(1e-9));
    }
}

TEST_CASE("all-token loss differs exactly when a visible prediction is off") {
    const Matrix target = Matrix::Random(4, 16);
    const auto plan = plan_with(4, {1, 3});
    Matrix pred = target;
    pred.row(1).array() += 0.5;
    CHECK(masked_loss(pred, target, plan, LossScope::all_tokens) != masked_loss(pred, target, plan));
    CHECK(masked_loss(pred, target, plan, LossScope::all_tokens) * 4 == doctest::Approx(masked_loss(pred, target, plan) * 2));
    pred.row(1) = target.row(1);
    pred.row(3).array() += 0.5;
    Matrix off_visible = pred;
    off_visible.row(0).array() += 0.1;
    CHECK(masked_loss(off_visible, target, plan) == masked_loss(pred, target, plan));
    CHECK(masked_loss(off_visible, target, plan, LossScope::all_tokens) != masked_loss(pred, target, plan, LossScope::all_tokens));
}

TEST_CASE("model parameter gradients match finite differences") {
    MaeModel m(tiny_arch(), 5);
    const auto patches = patchify(random_image(8, 8, 6), 4);
    const auto plan = plan_with(4, {0, 3});
    auto params = m.parameters();
    nn::zero_grads(params);
    MaeModel::Cache cache;
    const Matrix pred = m.forward(patches, plan, &cache);
    m.backward(cache, masked_loss_gradient(pred, patches.patches, plan));

    auto loss = [&] { return masked_loss(m.forward(patches, plan), patches.patches, plan); };
    const double h = 1e-6;
    int checked = 0;
    for (auto& [name, p] : params) {
        // a few entries per tensor keep the test fast
        for (Eigen::Index i = 0; i < p->value.size(); i += std::max<Eigen::Index>(1, p->value.size() / 5)) {
            const double saved = p->value.data()[i];
            p->value.data()[i] = saved + h;
            const double up = loss();
            p->value.data()[i] = saved - h;
            const double down = loss();
            p->value.data()[i] = saved;
            INFO(name << "[" << i << "]");
            const double fd = (up - down) / (2 * h);
            const double an = p->grad.data()[i];
            CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(fd), std::abs(an)) + 1e-8);
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("training") {
    MaeArchitecture arch = tiny_arch();
    arch.image_height = arch.image_width = 16;
    std::vector<TrainingSample> samples;
    const Image img = random_image(16, 16, 21);
    for (int i = 0; i < 10; ++i) samples.push_back({"s" + std::to_string(i), img, Label::normal});

    MaeTrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 5;
    cfg.lr = 3e-3;
    cfg.warmup_epochs = 5;
    cfg.mask_ratio = 0.75;
    cfg.seed = 4;

    SUBCASE("loss decreases on memorizable data") {
        MaeModel m(arch, 1);
        const auto state = train_mae(m, samples, cfg);
        REQUIRE(state.loss_history.size() == 200);
        CHECK(state.loss_history.back() < 0.5 * state.loss_history.front());
        CHECK(m.trained_epochs == 200);
    }
    SUBCASE("seeded runs are identical") {
        cfg.epochs = 5;
        MaeModel a(arch, 1), b(arch, 1);
        CHECK(train_mae(a, samples, cfg).loss_history == train_mae(b, samples, cfg).loss_history);
        CHECK(a.head.weight.value == b.head.weight.value);
    }
    SUBCASE("abnormal samples are refused") {
        samples[3].label = Label::abnormal;
        MaeModel m(arch, 1);
        CHECK_THROWS_AS(train_mae(m, samples, cfg), DataContaminationError);
    }
    SUBCASE("zero masking requires the all-token loss") {
        cfg.mask_ratio = 0.0;
        cfg.epochs = 1;
        MaeModel m(arch, 1);
        CHECK_THROWS_AS(train_mae(m, samples, cfg), InvalidArgument);
        cfg.loss_scope = LossScope::all_tokens;
        CHECK_NOTHROW(train_mae(m, samples, cfg));
    }
}

TEST_CASE("checkpoints") {
    const auto dir = std::filesystem::temp_directory_path() / "maeanom_test_mae_ckpt";
    std::filesystem::remove_all(dir);
    MaeArchitecture arch = tiny_arch();
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 4; ++i) samples.push_back({"s" + std::to_string(i), random_image(8, 8, 30 + i), Label::normal});
    MaeTrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 2;
    cfg.mask_ratio = 0.75;
    cfg.seed = 2;

    SUBCASE("metadata and bit-identical round trip") {
        MaeModel m(arch, 7);
        const auto state = train_mae(m, samples, cfg);
        make_mae_checkpoint(m, cfg, state, nullptr).save(dir / "a.ckpt");
        const Archive loaded = Archive::load(dir / "a.ckpt");
        CHECK(loaded.get("train.mask_ratio") == "0.75");
        loaded.save(dir / "b.ckpt");
        CHECK(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"));
        const MaeModel back = load_mae(Archive::load(dir / "b.ckpt"));
        CHECK(back.head.weight.value == m.head.weight.value);
        CHECK(back.trained_epochs == 6);
    }
    SUBCASE("resume continues to the same result") {
        MaeModel straight(arch, 7);
        const auto full = train_mae(straight, samples, cfg);

        MaeModel first(arch, 7);
        MaeTrainConfig partial = cfg;
        partial.checkpoint_interval = 3;
        partial.checkpoint_path = dir / "last.ckpt";
        partial.on_epoch = [](int epoch, double) {
            if (epoch == 3) throw std::runtime_error("interrupted");
        };
        CHECK_THROWS(train_mae(first, samples, partial));

        const Archive resume = Archive::load(dir / "last.ckpt");
        MaeModel resumed = load_mae(resume);
        const auto state = train_mae(resumed, samples, cfg, &resume);
        CHECK(state.loss_history == full.loss_history);
        CHECK(resumed.head.weight.value == straight.head.weight.value);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("reconstruction") {
    MaeModel m(tiny_arch(), 11);
    const Image x = random_image(8, 8, 12);

    SUBCASE("no masking with replacement returns the input") {
        const auto r = reconstruct(m, x, {.num_passes = 1, .replace_visible = true, .mask_ratio = 0.0, .seed = 1});
        CHECK(r.image == x);
    }
    SUBCASE("visible patches are exact in a single pass") {
        const auto r = reconstruct(m, x, {.num_passes = 1, .replace_visible = true, .mask_ratio = 0.5, .seed = 3});
        const auto plan = make_mask_plan(4, 0.5, derive_seed(3, {0}));
        const auto rp = patchify(r.image, 4);
        const auto xp = patchify(x, 4);
        for (int v : plan.visible) CHECK(rp.patches.row(v) == xp.patches.row(v));
        CHECK(r.image.minCoeff() >= 0.0);
        CHECK(r.image.maxCoeff() <= 1.0);
    }
    SUBCASE("multi-pass output is the mean of the passes") {
        const auto r = reconstruct(m, x, {.num_passes = 2, .replace_visible = true, .mask_ratio = 0.5, .seed = 5});
        REQUIRE(r.passes.size() == 2);
        CHECK(((r.passes[0] + r.passes[1]) / 2.0 - r.image).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("defaults") {
        ReconstructOptions defaults;
        CHECK(defaults.num_passes == 4);
        CHECK(defaults.mask_ratio == 0.75);
        CHECK(reconstruct(m, x).passes.size() == 4);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(reconstruct(m, x, {.num_passes = 0}), InvalidArgument);
        CHECK_THROWS_AS(reconstruct(m, Image::Zero(12, 12)), DimensionError);
    }
}
