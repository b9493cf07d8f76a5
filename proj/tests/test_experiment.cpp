#include <doctest.h>

#include "conntra/errors.hpp"
#include "conntra/experiment.hpp"

using namespace conntra;

TEST_SUITE("experiment") {

TEST_CASE("config json round-trip") {
    auto cfg = default_experiment(ModelKind::mlp, DatasetKind::iris);
    cfg.seed = 12;
    cfg.omega = {-2, 0, 2};
    cfg.search_loss = SearchLoss::euclidean;
    cfg.data_dir = "/tmp/x";
    const auto j = to_json(cfg);
    ExperimentConfig back;
    apply_json(back, j);
    CHECK(to_json(back) == j);
    CHECK(back.omega == cfg.omega);
    CHECK(back.model == ModelKind::mlp);
}

TEST_CASE("partial json overrides only named keys") {
    auto cfg = default_experiment(ModelKind::mlp, DatasetKind::iris);
    const auto epochs = cfg.epochs;
    apply_json(cfg, nlohmann::json{{"seed", 3}, {"iterations_T", 2}});
    CHECK(cfg.seed == 3);
    CHECK(cfg.iterations_T == 2);
    CHECK(cfg.epochs == epochs);
    CHECK_THROWS_AS(apply_json(cfg, nlohmann::json{{"seeds", 3}}), InvalidArgument);
    CHECK_THROWS_AS(apply_json(cfg, nlohmann::json{{"seed", "three"}}), InvalidArgument);
    CHECK_THROWS_AS(apply_json(cfg, nlohmann::json::array()), InvalidArgument);
}

TEST_CASE("presets validate and reject odd pairs") {
    for (auto m : {ModelKind::logistic_regression, ModelKind::mlp, ModelKind::cnn_lenet})
        CHECK_NOTHROW(default_experiment(m, DatasetKind::mnist).validate());
    CHECK_THROWS_AS(default_experiment(ModelKind::cnn_lenet, DatasetKind::iris), InvalidArgument);
    const auto cnn = default_experiment(ModelKind::cnn_lenet, DatasetKind::mnist);
    CHECK(cnn.train_subset == 2000);
    CHECK(cnn.iterations_T == 1);
    auto bad = cnn;
    bad.omega = {0, 0};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("seed streams") {
    const auto cfg = default_experiment(ModelKind::mlp, DatasetKind::iris);
    CHECK(cfg.pretrain_config().seed == cfg.seed);
    CHECK(cfg.conntra_config().seed == conntra_seed(cfg.seed));
    CHECK(conntra_seed(1) != conntra_seed(2));
    CHECK(conntra_seed(0) != 0);
}

TEST_CASE("iris experiment end to end") {
    auto cfg = default_experiment(ModelKind::mlp, DatasetKind::iris);
    cfg.data_dir = CONNTRA_TEST_DATA_DIR;
    cfg.epochs = 20;
    const auto data = load_experiment_data(cfg);
    CHECK(data.train.size() == 120);
    CHECK(data.validation.size() == 30);
    const auto spec = experiment_model(cfg, data.train);
    CHECK(param_count(spec) == 235);
    const auto res = run_experiment(cfg, data);
    CHECK(res.conntra.optimal_loss <= res.conntra.discretized_loss);
    CHECK(res.conntra.report.loss_evaluations == 235u * 3u);
}

TEST_CASE("missing MNIST files name the fetch script") {
    auto cfg = default_experiment(ModelKind::logistic_regression, DatasetKind::mnist);
    cfg.data_dir = "/nonexistent";
    try {
        load_experiment_data(cfg);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("fetch_mnist.sh") != std::string::npos);
    }
}

} // TEST_SUITE
