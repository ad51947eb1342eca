#include "doctest.h"

#include "maeanom/config.hpp"

#include <filesystem>

using namespace maeanom;

TEST_CASE("defaults follow the reference training settings") {
    const ExperimentConfig c;
    CHECK(c.mask_ratio == 0.75);
    CHECK(c.mae_epochs == 1600);
    CHECK(c.num_passes == 4);
    CHECK(c.k_min == 1);
    CHECK(c.k_max == 10);
    CHECK(c.cls_epochs == 100);
    CHECK(c.cls_lr == 0.001);
    CHECK(c.cls_weight_decay == 0.05);
    CHECK(c.mae_weight_decay == 0.05);
    CHECK(c.input_mode == InputMode::abs_diff);
    CHECK(c.effective_box_sizes() == std::pair{5, 12});
    CHECK_NOTHROW(c.validate());

    ExperimentConfig big = c;
    big.image_height = big.image_width = 224;
    big.patch_size = 16;
    CHECK(big.effective_box_sizes() == std::pair{10, 40});
}

TEST_CASE("serialize and parse round trip") {
    ExperimentConfig c;
    c.mask_ratio = 0.6;
    c.mae_lr = 1.0 / 3.0;
    c.input_mode = InputMode::squared_diff;
    c.per_pixel_beta = true;
    c.manifest = "some/dir/manifest.txt";
    c.score_method = ScoreMethod::ssim;
    c.mae_seed = 12345678901234ULL;
    const ExperimentConfig back = parse_config(serialize(c));
    CHECK(config_diff(c, back).empty());
    CHECK(serialize(back) == serialize(c));
    CHECK(serialize(c).rfind("schema_version = 1\n", 0) == 0);
}

TEST_CASE("unknown keys and bad values are errors") {
    CHECK_THROWS_AS(parse_config("schema_version = 1\nmae.mask_raito = 0.5\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("schema_version = 1\nmae.epochs = many\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("schema_version = 1\nmae.epochs = 2.5\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("schema_version = 1\npseudo.per_pixel_beta = maybe\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("schema_version = 1\nclassifier.input_mode = l2\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("schema_version = 1\nmae.seed = -1\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("schema_version = 1\njust text\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("mae.epochs = 3\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config("schema_version = 2\n"), InvalidArgument);
}

TEST_CASE("comments, blank lines and overrides") {
    ExperimentConfig c = parse_config("# desk run\nschema_version = 1\n\nmae.epochs = 200  # short\n");
    CHECK(c.mae_epochs == 200);
    apply_override(c, "classifier.epochs=50");
    apply_override(c, " mae.mask_ratio = 0.5 ");
    CHECK(c.cls_epochs == 50);
    CHECK(c.mask_ratio == 0.5);
    CHECK_THROWS_AS(apply_override(c, "classifier.epochs"), InvalidArgument);
    CHECK_THROWS_AS(apply_override(c, "nope=1"), InvalidArgument);
    CHECK(get_value(c, "mae.epochs") == "200");
    CHECK(config_diff(c, ExperimentConfig{}) ==
          std::vector<std::string>{"mae.mask_ratio", "mae.epochs", "classifier.epochs"});
}

TEST_CASE("switch semantics") {
    ExperimentConfig c;
    c.ae_mode = true;
    CHECK(c.effective_mask_ratio() == 0.0);
    CHECK(c.mae_train_config().mask_ratio == 0.0);
    CHECK(c.mae_train_config().loss_scope == LossScope::all_tokens);
    CHECK(c.reconstruct_options().mask_ratio == 0.0);
    CHECK_FALSE(c.reconstruct_options().replace_visible);
    CHECK(c.classifier_train_config().recon.mask_ratio == 0.0);

    ExperimentConfig all;
    all.loss_on_all_tokens = true;
    CHECK(all.mae_train_config().loss_scope == LossScope::all_tokens);
    CHECK(all.mae_train_config().mask_ratio == 0.75);

    ExperimentConfig raw;
    raw.no_mae = true;
    CHECK_THROWS_AS(raw.validate(), InvalidArgument);  // needs raw_recon inputs
    raw.input_mode = InputMode::raw_recon;
    CHECK_NOTHROW(raw.validate());
    CHECK(raw.classifier_train_config().no_mae);

    ExperimentConfig zero;
    zero.mask_ratio = 0.0;
    CHECK_THROWS_AS(zero.validate(), InvalidArgument);
    zero.ae_mode = true;
    CHECK_NOTHROW(zero.validate());

    ExperimentConfig bad;
    bad.patch_size = 7;
    CHECK_THROWS_AS(bad.validate(), DimensionError);
    bad = ExperimentConfig{};
    bad.box_size_min = 5;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    bad.box_size_max = 100;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("derived module settings") {
    ExperimentConfig c;
    c.image_height = 32;
    c.image_width = 48;
    c.patch_size = 8;
    c.enc_dim = 32;
    CHECK(c.mae_architecture().image_width == 48);
    CHECK(c.mae_architecture().enc_dim == 32);
    CHECK(c.classifier_architecture().patch_size == 8);
    CHECK(c.synth_spec().height == 32);
    const auto t = c.classifier_train_config();
    CHECK(t.k_min == 1);
    CHECK(t.k_max == 10);
    CHECK(t.size_min == 5);
    CHECK(t.size_max == 12);
    CHECK(t.recon.num_passes == 4);
}

TEST_CASE("file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "maeanom_test_config.cfg";
    ExperimentConfig c;
    c.cls_epochs = 7;
    save_config(path, c);
    CHECK(config_diff(load_config(path), c).empty());
    CHECK_THROWS_AS(load_config(path.string() + ".missing"), IoError);
}
