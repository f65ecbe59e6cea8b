#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dbfuse/errors.hpp"
#include "dbfuse/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dbfuse;

namespace {

RunConfig small_config(const fs::path& out_dir) {
    RunConfig cfg = run_config_from_json(nlohmann::json::object());
    cfg.seed = 5;
    cfg.train.seed = 5;
    cfg.data.side = 16;
    cfg.model.backbone_a = {BackboneFamily::tiny_test, "w8", false, 16, ""};
    cfg.model.backbone_b = {BackboneFamily::tiny_test, "w16", false, 16, ""};
    cfg.train.epochs = 8;
    cfg.train.batch_size = 5;
    cfg.train.learning_rate = 1e-2;
    cfg.output.dir = out_dir.string();
    return cfg;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("dbfuse_pipe_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("run_training writes the full artifact set") {
    TempDir tmp("train");
    RunConfig cfg = small_config(tmp.path / "out");
    auto ds = generate_synthetic_dataset(15, 16, 5, 0.1);
    TrainRun run = run_training(cfg, ds);

    CHECK(run.result.history.records.size() == 8);
    CHECK(fs::exists(tmp.path / "out" / "history.csv"));
    CHECK(fs::exists(tmp.path / "out" / "run_summary.json"));
    CHECK(fs::exists(tmp.path / "out" / "loss_vs_epoch.png"));
    CHECK(fs::exists(tmp.path / "out" / "accuracy_vs_epoch.png"));
    CHECK(fs::exists(tmp.path / "out" / "checkpoint_final" / "weights.bin"));
    CHECK(fs::exists(tmp.path / "out" / "checkpoint_best" / "weights.bin"));

    nlohmann::json summary;
    std::ifstream(tmp.path / "out" / "run_summary.json") >> summary;
    CHECK(summary.at("protocol").at("train_fraction").get<double>() == doctest::Approx(0.8));
    CHECK(summary.at("protocol").at("input_side").get<int>() == 16);
    CHECK(summary.at("dataset").at("train_count").get<int>() == 36);
    CHECK(summary.at("dataset").at("test_count").get<int>() == 9);
    CHECK(summary.at("model").at("fused_dim").get<int>() == 24);
    CHECK(summary.at("class_names").get<std::vector<std::string>>() == kDefaultClassNames);
}

TEST_CASE("evaluate_model rejects mismatched class lists naming both") {
    TempDir tmp("eval");
    RunConfig cfg = small_config("");
    cfg.output.dir = "";
    auto ds = generate_synthetic_dataset(6, 16, 5, 0.1);
    auto model = build_model_from_config(cfg, {"X", "Y", "Z"});
    try {
        evaluate_model(*model, ds, 5, "m");
        FAIL("expected a class-name mismatch error");
    } catch (const EvalError& e) {
        std::string msg = e.what();
        CHECK(msg.find("X") != std::string::npos);
        CHECK(msg.find("Normal") != std::string::npos);
    }
}

TEST_CASE("evaluation outputs include json, csv, heatmap and roc artifacts") {
    TempDir tmp("emit");
    RunConfig cfg = small_config("");
    cfg.output.dir = "";
    auto ds = generate_synthetic_dataset(8, 16, 9, 0.1);
    auto model = build_model_from_config(cfg, ds.class_names);
    MetricsReport rep = evaluate_model(*model, ds, 6, "model");
    emit_evaluation_outputs({rep}, tmp.path.string(), {"png", "svg"});
    CHECK(fs::exists(tmp.path / "metrics.json"));
    CHECK(fs::exists(tmp.path / "metrics.csv"));
    CHECK(fs::exists(tmp.path / "confusion_matrix.json"));
    CHECK(fs::exists(tmp.path / "confusion_matrix.png"));
    CHECK(fs::exists(tmp.path / "confusion_matrix.svg"));
    CHECK(fs::exists(tmp.path / "roc.png"));
    CHECK(fs::exists(tmp.path / "roc.svg"));

    nlohmann::json arr;
    std::ifstream(tmp.path / "metrics.json") >> arr;
    REQUIRE(arr.is_array());
    REQUIRE(arr.size() == 1);
    CHECK(arr[0].at("model").get<std::string>() == "model");
    CHECK(arr[0].at("per_class").size() == 3);
}

TEST_CASE("ablation produces three comparable blocks on one split") {
    TempDir tmp("abl");
    RunConfig cfg = small_config(tmp.path / "out");
    auto ds = generate_synthetic_dataset(15, 16, 3, 0.1);
    AblationRun run = run_ablation(cfg, ds);

    REQUIRE(run.reports.size() == 3);
    CHECK(run.reports[0].model_name == "tiny_test-w8");
    CHECK(run.reports[1].model_name == "tiny_test-w16");
    CHECK(run.reports[2].model_name == "Concatenated");
    // identical split: every block evaluated the same number of samples
    for (const auto& rep : run.reports) {
        CHECK(rep.cm.total() == 9);
    }
    CHECK(fs::exists(tmp.path / "out" / "ablation_metrics.csv"));
    CHECK(fs::exists(tmp.path / "out" / "ablation_metrics.json"));
    CHECK(fs::exists(tmp.path / "out" / "ablation_a" / "history.csv"));
    CHECK(fs::exists(tmp.path / "out" / "ablation_b" / "history.csv"));
}

}  // TEST_SUITE
