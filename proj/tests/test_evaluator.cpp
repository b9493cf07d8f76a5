#include <doctest.h>

#include <cmath>

#include "conntra/errors.hpp"
#include "conntra/evaluator.hpp"
#include "conntra/losses.hpp"
#include "conntra/rng.hpp"

using namespace conntra;

namespace {

LabeledDataset random_dataset(std::vector<std::size_t> shape, std::size_t n, std::size_t k,
                           std::uint64_t seed, double sparsity) {
    SplitMix64 rng(seed);
    std::size_t d = 1;
    for (auto s : shape) d *= s;
    std::vector<double> x(n * d);
    for (double& v : x) v = rng.uniform() < sparsity ? 0.0 : rng.uniform();
    std::vector<std::uint32_t> y(n);
    for (auto& c : y) c = static_cast<std::uint32_t>(rng.below(k));
    return LabeledDataset("random", std::move(shape), std::move(x), std::move(y), k);
}

std::vector<double> ternary_params(std::size_t count, SplitMix64& rng) {
    std::vector<double> w(count);
    for (double& v : w) v = static_cast<double>(rng.below(3)) - 1.0;
    return w;
}

/// Random candidates and commits; both evaluators must agree throughout.
void agree(const ModelSpec& spec, const LabeledDataset& data, SearchLoss loss, std::uint64_t seed,
           int steps) {
    const Network net(spec);
    SplitMix64 rng(seed);
    const auto w = ternary_params(net.param_count(), rng);
    FullEvaluator full(net, data, w, loss);
    IncrementalEvaluator inc(net, data, w, loss);
    CHECK(inc.current_loss() == doctest::Approx(full.current_loss()).epsilon(1e-12));
    double worst = 0.0;
    for (int s = 0; s < steps; ++s) {
        const std::size_t i = rng.below(net.param_count());
        const double v = static_cast<double>(rng.below(3)) - 1.0;
        const double a = full.loss_with(i, v);
        const double b = inc.loss_with(i, v);
        worst = std::max(worst, std::abs(a - b));
        if (rng.below(2)) {
            full.commit(i, v);
            inc.commit(i, v);
            REQUIRE(inc.current_loss() == b);
            REQUIRE(full.current_loss() == a);
        }
    }
    CHECK(worst <= 1e-9);
    CHECK(inc.checksum() == full.checksum());
    CHECK(inc.training_error() == full.training_error());
    // After many commits the cached state still matches a fresh pass.
    const double fresh = dataset_loss(net, inc.params(), data, loss);
    CHECK(std::abs(inc.current_loss() - fresh) <= 1e-9);
}

} // namespace

TEST_SUITE("evaluator") {

TEST_CASE("full and incremental evaluation agree within 1e-9") {
    SUBCASE("logistic, sparse inputs") {
        agree(ModelSpec::logistic(20, 4), random_dataset({20}, 50, 4, 1, 0.7), SearchLoss::cross_entropy, 2, 400);
    }
    SUBCASE("logistic, euclidean") {
        agree(ModelSpec::logistic(20, 4), random_dataset({20}, 50, 4, 3, 0.5), SearchLoss::euclidean, 4, 400);
    }
    SUBCASE("mlp") {
        agree(ModelSpec::mlp({4, 10, 13, 3}), random_dataset({4}, 60, 3, 5, 0.1), SearchLoss::cross_entropy, 6, 400);
    }
    SUBCASE("mlp, euclidean") {
        agree(ModelSpec::mlp({6, 8, 3}), random_dataset({6}, 40, 3, 7, 0.3), SearchLoss::euclidean, 8, 400);
    }
    SUBCASE("lenet") {
        agree(ModelSpec::lenet(12, 12, 1, 3), random_dataset({12, 12, 1}, 6, 3, 9, 0.5), SearchLoss::cross_entropy,
              10, 300);
    }
}

TEST_CASE("evaluations are counted and params untouched by loss_with") {
    const auto spec = ModelSpec::logistic(5, 3);
    const Network net(spec);
    const auto data = random_dataset({5}, 10, 3, 2, 0.0);
    SplitMix64 rng(1);
    const auto w = ternary_params(net.param_count(), rng);
    auto ev = make_evaluator(EvalMode::incremental, net, data, w, SearchLoss::cross_entropy);
    const double before = ev->current_loss();
    ev->loss_with(0, 1.0);
    ev->loss_with(0, -1.0);
    CHECK(ev->evaluations() == 2);
    CHECK(ev->current_loss() == before);
    CHECK(std::equal(w.begin(), w.end(), ev->params().begin()));
    CHECK_THROWS_AS(ev->loss_with(99, 0.0), InvalidArgument);
}

TEST_CASE("stale caches are detected") {
    const auto spec = ModelSpec::mlp({4, 10, 3});
    const Network net(spec);
    const auto data = random_dataset({4}, 10, 3, 2, 0.0);
    SplitMix64 rng(2);
    auto w = ternary_params(net.param_count(), rng);
    IncrementalEvaluator ev(net, data, w, SearchLoss::cross_entropy);
    CHECK(incremental_eval(ev, w, 3, 1.0) == ev.loss_with(3, 1.0));

    w[5] = w[5] == 1.0 ? 0.0 : 1.0; // caller's vector drifted from the cache
    CHECK_THROWS_AS(incremental_eval(ev, w, 3, 1.0), InvalidState);
    ev.commit(5, w[5]);
    CHECK_NOTHROW(incremental_eval(ev, w, 3, 1.0));
    w.pop_back();
    CHECK_THROWS_AS(incremental_eval(ev, w, 3, 1.0), InvalidState);
}

TEST_CASE("checksum is order sensitive and additive") {
    const std::vector<double> a{1, 0, -1};
    const std::vector<double> b{-1, 0, 1};
    CHECK(param_checksum(a) != param_checksum(b));
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += param_checksum_term(i, a[i]);
    CHECK(sum == param_checksum(a));
}

TEST_CASE("resync rebuilds caches") {
    const auto spec = ModelSpec::mlp({4, 6, 3});
    const Network net(spec);
    const auto data = random_dataset({4}, 12, 3, 4, 0.2);
    SplitMix64 rng(4);
    const auto w = ternary_params(net.param_count(), rng);
    IncrementalEvaluator ev(net, data, w, SearchLoss::cross_entropy);
    for (int s = 0; s < 50; ++s) {
        const std::size_t i = rng.below(net.param_count());
        ev.commit(i, static_cast<double>(rng.below(3)) - 1.0);
    }
    const double before = ev.current_loss();
    ev.resync();
    CHECK(ev.current_loss() == doctest::Approx(before).epsilon(1e-12));
    CHECK(parse_eval_mode("full") == EvalMode::full);
    CHECK_THROWS_AS(parse_eval_mode("lazy"), InvalidArgument);
}

} // TEST_SUITE
