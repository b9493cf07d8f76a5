#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "conntra/data_io.hpp"
#include "conntra/errors.hpp"
#include "conntra/losses.hpp"
#include "conntra/pretrain.hpp"

using namespace conntra;

TEST_SUITE("pretrain") {

TEST_CASE("separable blobs reach zero training error") {
    const auto data = synthetic_blobs(400, 6, 4, 9);
    PretrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 20;
    cfg.seed = 1;
    const auto res = pretrain(ModelSpec::logistic(6, 4), data, cfg);
    REQUIRE(res.report.curve.size() == 10);
    CHECK(res.report.curve.back().training_error_pct == 0.0);
    CHECK(res.report.total_epochs == 10);
}

TEST_CASE("same seed gives identical weights") {
    const auto data = synthetic_blobs(200, 4, 3, 2);
    PretrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 77;
    const auto spec = ModelSpec::mlp({4, 10, 13, 3});
    const auto a = pretrain(spec, data, cfg);
    const auto b = pretrain(spec, data, cfg);
    CHECK(std::equal(a.params.values().begin(), a.params.values().end(), b.params.values().begin()));
    cfg.seed = 78;
    const auto c = pretrain(spec, data, cfg);
    CHECK_FALSE(std::equal(a.params.values().begin(), a.params.values().end(), c.params.values().begin()));
}

TEST_CASE("zero epochs returns the initialization") {
    const auto data = synthetic_blobs(50, 4, 2, 2);
    PretrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 5;
    const auto spec = ModelSpec::logistic(4, 2);
    const auto res = pretrain(spec, data, cfg);
    const auto init = initialize_params(spec, cfg);
    CHECK(std::equal(res.params.values().begin(), res.params.values().end(), init.values().begin()));
    CHECK(res.report.curve.empty());
    // biases start at zero
    CHECK(init[8] == 0.0);
    CHECK(init[9] == 0.0);
}

TEST_CASE("divergence names the epoch") {
    const auto data = synthetic_blobs(50, 4, 2, 2);
    PretrainConfig cfg;
    cfg.learning_rate = 1e300;
    cfg.epochs = 5;
    cfg.batch_size = 10;
    try {
        pretrain(ModelSpec::mlp({4, 10, 2}), data, cfg);
        FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
        CHECK(std::string(e.what()).find("at epoch ") != std::string::npos);
    }
}

TEST_CASE("invalid configs") {
    PretrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.rescale_target = -1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    const auto data = synthetic_blobs(50, 4, 2, 2);
    CHECK_THROWS_AS(pretrain(ModelSpec::logistic(5, 2), data, PretrainConfig{}), InvalidArgument);
}

TEST_CASE("layer rescaling keeps every prediction") {
    const auto data = synthetic_blobs(120, 4, 3, 4);
    PretrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 10;
    for (const auto& spec : {ModelSpec::logistic(4, 3), ModelSpec::mlp({4, 10, 13, 3})}) {
        auto res = pretrain(spec, data, cfg);
        const Network net(spec);
        const auto before = forward_logits(net, res.params.values(), data);
        std::vector<double> w(res.params.values().begin(), res.params.values().end());
        const double scale = rescale_layers(net, w, 0.7);
        const auto after = forward_logits(net, w, data);
        for (std::size_t i = 0; i < before.size(); ++i) {
            CHECK(after[i] == doctest::Approx(before[i] * scale).epsilon(1e-9));
        }
        for (const auto& block : net.layout()) {
            if (block.bias) continue;
            double mean = 0.0;
            for (std::size_t i = 0; i < block.count; ++i) mean += std::abs(w[block.offset + i]);
            CHECK(mean / block.count == doctest::Approx(0.7));
        }
    }
}

TEST_CASE("lenet rescaling keeps predictions") {
    const auto spec = ModelSpec::lenet(12, 12, 1, 3);
    const Network net(spec);
    PretrainConfig cfg;
    cfg.seed = 3;
    auto w0 = initialize_params(spec, cfg);
    std::vector<double> w(w0.values().begin(), w0.values().end());
    for (std::size_t i = 0; i < w.size(); i += 7) w[i] += 0.01; // non-zero biases too
    std::vector<double> x(144 * 4);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>((i * 37) % 11) / 10.0;
    const LabeledDataset data("img", {12, 12, 1}, x, {0, 1, 2, 0}, 3);
    const auto before = forward(net, w, data).predicted_class;
    rescale_layers(net, w, 0.7);
    CHECK(forward(net, w, data).predicted_class == before);
}

TEST_CASE("weights file round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "conntra_pretrain_test";
    std::filesystem::create_directories(dir);
    const std::vector<double> w{0.25, -1e-300, 3.5, -0.0};
    save_weights(dir / "w.wts", w);
    const auto back = load_weights(dir / "w.wts");
    REQUIRE(back.size() == w.size());
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::signbit(back[i]) == std::signbit(w[i]));
    CHECK(back == w);
    std::filesystem::resize_file(dir / "w.wts", 20);
    CHECK_THROWS_AS(load_weights(dir / "w.wts"), FormatError);
}

} // TEST_SUITE
