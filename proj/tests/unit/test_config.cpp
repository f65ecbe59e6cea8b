#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dbfuse/config.hpp"
#include "dbfuse/errors.hpp"

namespace fs = std::filesystem;
using namespace dbfuse;

TEST_SUITE("config") {

TEST_CASE("defaults reproduce the reference protocol") {
    RunConfig cfg = default_run_config();
    CHECK(cfg.seed == 42);
    CHECK(cfg.data.train_fraction == doctest::Approx(0.8));
    CHECK(cfg.data.side == 128);
    CHECK(cfg.data.class_names == kDefaultClassNames);
    CHECK(cfg.model.backbone_a.family == BackboneFamily::convnext);
    CHECK(cfg.model.backbone_a.variant == "tiny");
    CHECK(cfg.model.backbone_b.family == BackboneFamily::efficientnet);
    CHECK(cfg.model.backbone_b.variant == "b0");
    CHECK(!cfg.model.backbone_a.pretrained);
    CHECK(cfg.train.epochs == 50);
    CHECK(cfg.train.batch_size == 5);
    CHECK(cfg.train.learning_rate == doctest::Approx(1e-3));
    CHECK(cfg.train.optimizer == OptimizerKind::adam);
    CHECK(cfg.train.freeze_backbones);
    CHECK(!cfg.data.flip_augment);
}

TEST_CASE("protocol summary carries the headline numbers") {
    auto protocol = run_summary_protocol(default_run_config(), 3);
    CHECK(protocol.at("train_fraction").get<double>() == doctest::Approx(0.8));
    CHECK(protocol.at("test_fraction").get<double>() == doctest::Approx(0.2));
    CHECK(protocol.at("input_side").get<int>() == 128);
    CHECK(protocol.at("num_classes").get<int>() == 3);
    CHECK(protocol.at("epochs").get<int>() == 50);
    CHECK(protocol.at("batch_size").get<int>() == 5);
}

TEST_CASE("json round trip and field parsing") {
    nlohmann::json j = {
        {"seed", 7},
        {"data", {{"root", "/tmp/x"}, {"side", 32}, {"train_fraction", 0.75}}},
        {"model",
         {{"backbone_a", {{"family", "tiny_test"}, {"variant", "w8"}}},
          {"backbone_b", {{"family", "tiny_test"}, {"variant", "w16"}}}}},
        {"train", {{"epochs", 3}, {"batch_size", 2}, {"learning_rate", 0.01}}},
        {"output", {{"dir", "out"}}},
    };
    RunConfig cfg = run_config_from_json(j);
    CHECK(cfg.seed == 7);
    CHECK(cfg.data.root == "/tmp/x");
    CHECK(cfg.data.side == 32);
    CHECK(cfg.model.backbone_a.variant == "w8");
    CHECK(cfg.model.backbone_a.input_side == 32);  // side propagates
    CHECK(cfg.model.backbone_b.input_side == 32);
    CHECK(cfg.train.epochs == 3);
    CHECK(cfg.output.dir == "out");

    auto back = run_config_from_json(to_json(cfg));
    CHECK(back.seed == cfg.seed);
    CHECK(back.data.side == cfg.data.side);
    CHECK(back.train.epochs == cfg.train.epochs);
    CHECK(back.model.backbone_b.variant == cfg.model.backbone_b.variant);
}

TEST_CASE("flat overrides rewrite nested keys") {
    nlohmann::json j = nlohmann::json::object();
    RunConfig cfg = run_config_from_json(
        j, {"train.epochs=9", "data.side=48", "train.learning_rate=0.05", "output.dir=elsewhere"});
    CHECK(cfg.train.epochs == 9);
    CHECK(cfg.data.side == 48);
    CHECK(cfg.train.learning_rate == doctest::Approx(0.05));
    CHECK(cfg.output.dir == "elsewhere");
    CHECK(cfg.model.backbone_a.input_side == 48);

    CHECK_THROWS_AS(run_config_from_json(j, {"no_equals_sign"}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(j, {"=5"}), ConfigError);
}

TEST_CASE("validation rejects out-of-range settings") {
    nlohmann::json j = nlohmann::json::object();
    CHECK_THROWS_AS(run_config_from_json(j, {"data.train_fraction=1.5"}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(j, {"train.epochs=0"}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(j, {"train.learning_rate=-0.1"}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(j, {"model.dropout=1.0"}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(j, {"data.side=0"}), ConfigError);
}

TEST_CASE("config file loading and parse errors") {
    fs::path dir = fs::temp_directory_path() / "dbfuse_cfg_test";
    fs::create_directories(dir);
    fs::path good = dir / "good.json";
    {
        std::ofstream f(good);
        f << R"({"seed": 3, "train": {"epochs": 2, "batch_size": 1, "learning_rate": 0.1}})";
    }
    RunConfig cfg = load_run_config(good.string());
    CHECK(cfg.seed == 3);
    CHECK(cfg.train.epochs == 2);

    fs::path bad = dir / "bad.json";
    {
        std::ofstream f(bad);
        f << "{ not json";
    }
    CHECK_THROWS_AS(load_run_config(bad.string()), ConfigError);
    CHECK_THROWS_AS(load_run_config((dir / "missing.json").string()), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("weights path resolution honors the environment") {
    CHECK(resolve_weights_path("") == "");
    CHECK(resolve_weights_path("/abs/path.bin") == "/abs/path.bin");

    fs::path dir = fs::temp_directory_path() / "dbfuse_weights_env";
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "w.bin");
        f << "x";
    }
    setenv("DBFUSE_WEIGHTS_DIR", dir.string().c_str(), 1);
    CHECK(resolve_weights_path("w.bin") == (dir / "w.bin").string());
    CHECK(resolve_weights_path("not_there.bin") == "not_there.bin");
    unsetenv("DBFUSE_WEIGHTS_DIR");
    fs::remove_all(dir);
}

}  // TEST_SUITE
