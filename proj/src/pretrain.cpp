#include "conntra/pretrain.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "conntra/errors.hpp"
#include "conntra/losses.hpp"
#include "conntra/rng.hpp"

namespace conntra {

void PretrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw InvalidArgument("learning rate must be positive");
    }
    if (batch_size < 1) {
        throw InvalidArgument("batch size must be at least 1");
    }
    if (!std::isfinite(init_scale)) {
        throw InvalidArgument("init scale must be finite");
    }
    if (!std::isfinite(rescale_target) || rescale_target < 0.0) {
        throw InvalidArgument("rescale target must be finite and non-negative");
    }
}

namespace {

/// Accumulates the summed (not averaged) gradient of rows [first, last) of `order`.
void accumulate_gradient(const Network& net, std::span<const double> params,
                         const LabeledDataset& data, std::span<const std::size_t> rows,
                         double scale, std::span<double> grad, Activations& act,
                         Activations& scratch, std::vector<double>& dlogits) {
    const std::size_t k = net.class_count();
    for (std::size_t n : rows) {
        const auto logits = net.forward_sample(params, data.row(n), act);
        softmax(logits.first(k), dlogits);
        dlogits[data.label(n)] -= 1.0;
        for (double& d : dlogits) {
            d *= scale;
        }
        net.backward_sample(params, data.row(n), act, dlogits, grad, scratch);
    }
}

void check_shapes(const Network& net, std::span<const double> params, const LabeledDataset& data) {
    if (params.size() != net.param_count()) {
        throw InvalidArgument("parameter vector does not match model");
    }
    if (data.feature_dim() != net.input_size() || data.class_count() != net.class_count()) {
        throw InvalidArgument("dataset shape does not match model");
    }
}

} // namespace

std::vector<double> backprop_gradient(const Network& net, std::span<const double> params,
                                      const LabeledDataset& batch) {
    check_shapes(net, params, batch);
    std::vector<double> grad(params.size(), 0.0);
    std::vector<std::size_t> rows(batch.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    Activations act = net.make_activations();
    Activations scratch = net.make_activations();
    std::vector<double> dlogits(net.class_count());
    accumulate_gradient(net, params, batch, rows, 1.0 / static_cast<double>(batch.size()), grad,
                        act, scratch, dlogits);
    return grad;
}

std::vector<double> backprop_gradient(const ModelSpec& spec, const ParamVector& params,
                                      const LabeledDataset& batch) {
    if (!(params.spec() == spec)) {
        throw InvalidArgument("parameter vector was built for a different model");
    }
    return backprop_gradient(Network(spec), params.values(), batch);
}

double rescale_layers(const Network& net, std::span<double> params, double target) {
    if (!(target > 0.0) || !std::isfinite(target)) {
        throw InvalidArgument("rescale target must be positive");
    }
    if (params.size() != net.param_count()) {
        throw InvalidArgument("parameter vector does not match model");
    }
    double cumulative = 1.0;
    for (const ParamBlock& block : net.layout()) {
        auto values = params.subspan(block.offset, block.count);
        if (block.bias) {
            for (double& v : values) v *= cumulative;
            continue;
        }
        double mean_abs = 0.0;
        for (double v : values) mean_abs += std::abs(v);
        mean_abs /= static_cast<double>(values.size());
        if (!(mean_abs > 0.0)) {
            throw DomainError("cannot rescale " + block.name + ": all weights are zero");
        }
        const double factor = target / mean_abs;
        for (double& v : values) v *= factor;
        cumulative *= factor;
    }
    return cumulative;
}

ParamVector initialize_params(const ModelSpec& spec, const PretrainConfig& cfg) {
    const Network net(spec);
    const auto limits = net.init_limits();
    SplitMix64 rng(cfg.seed);
    std::vector<double> values(net.param_count(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (limits[i] > 0.0) {
            const double limit = cfg.init_scale > 0.0 ? cfg.init_scale : limits[i];
            values[i] = rng.uniform(-limit, limit);
        }
    }
    return ParamVector(spec, std::move(values));
}

PretrainResult pretrain(const ModelSpec& spec, const LabeledDataset& train,
                        const PretrainConfig& cfg, const LabeledDataset* validation,
                        const EpochCallback& on_epoch) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const Network net(spec);
    ParamVector params = initialize_params(spec, cfg);
    check_shapes(net, params.values(), train);
    if (validation) {
        check_shapes(net, params.values(), *validation);
    }

    // Separate stream from the initializer so changing epochs never perturbs the init.
    SplitMix64 rng(cfg.seed ^ 0x5bd1e9955bd1e995ULL);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    Activations act = net.make_activations();
    Activations scratch = net.make_activations();
    std::vector<double> dlogits(net.class_count());
    std::vector<double> grad(params.size());

    TrainReport report;
    report.seed = cfg.seed;
    report.total_epochs = cfg.epochs;
    report.memory = memory_account(static_cast<std::int64_t>(params.size()), 64);

    for (std::uint64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - first);
            std::fill(grad.begin(), grad.end(), 0.0);
            accumulate_gradient(net, params.values(), train,
                                std::span<const std::size_t>(order).subspan(first, count),
                                1.0 / static_cast<double>(count), grad, act, scratch, dlogits);
            auto w = params.values();
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] -= cfg.learning_rate * grad[i];
            }
        }

        const Prediction pred = forward(net, params.values(), train);
        const double loss = cross_entropy(pred, train.labels_onehot());
        if (!std::isfinite(loss)) {
            throw TrainingDiverged("pretraining diverged at epoch " + std::to_string(epoch));
        }
        for (double v : params.values()) {
            if (!std::isfinite(v)) {
                throw TrainingDiverged("pretraining diverged at epoch " + std::to_string(epoch));
            }
        }
        CurvePoint point;
        point.epoch = epoch;
        point.training_error_pct = classification_error(pred, train.labels());
        if (validation) {
            point.validation_error_pct =
                classification_error(forward(net, params.values(), *validation), validation->labels());
        }
        point.optimal_loss = loss;
        report.curve.push_back(point);
        if (on_epoch) {
            on_epoch(point);
        }
    }

    if (cfg.rescale_target > 0.0) {
        rescale_layers(net, params.values(), cfg.rescale_target);
    }
    report.final_params.assign(params.values().begin(), params.values().end());
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(params), std::move(report)};
}

} // namespace conntra
