#include "conntra/trainer.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "conntra/errors.hpp"
#include "conntra/rng.hpp"

namespace conntra {

void ConntraConfig::validate() const {
    if (iterations_T < 1) {
        throw InvalidArgument("iterations_T must be at least 1");
    }
    if (record_every < 1) {
        throw InvalidArgument("record_every must be at least 1");
    }
}

ConntraResult conntra_train(const ModelSpec& spec, const LabeledDataset& data,
                            const ParamVector& w_pre, const DiscreteSet& omega,
                            const ConntraConfig& cfg, const LabeledDataset* validation,
                            const RecordCallback& on_record) {
    cfg.validate();
    if (!(w_pre.spec() == spec)) {
        throw InvalidArgument("pretrained weights were built for a different model");
    }
    const auto start = std::chrono::steady_clock::now();
    const Network net(spec);

    // Phase 1
    std::vector<double> w = discretize(w_pre.values(), omega);

    // Phase 2
    auto evaluator = make_evaluator(cfg.eval_mode, net, data, std::move(w), cfg.search_loss);
    double eps_opt = evaluator->current_loss();
    if (!std::isfinite(eps_opt)) {
        throw TrainingDiverged("initial loss is not finite");
    }

    const std::size_t n_params = evaluator->params().size();
    TrainReport report;
    report.seed = cfg.seed;
    report.total_epochs = cfg.iterations_T * n_params;
    report.memory = memory_account(static_cast<std::int64_t>(n_params), omega.bits_per_code());

    auto record = [&](std::uint64_t epoch) {
        CurvePoint point;
        point.epoch = epoch;
        point.training_error_pct = evaluator->training_error();
        if (validation) {
            point.validation_error_pct = classification_error(
                forward(net, evaluator->params(), *validation), validation->labels());
        }
        point.optimal_loss = eps_opt;
        report.curve.push_back(point);
        if (on_record) {
            on_record(point);
        }
    };
    record(0);
    const double discretized_loss = eps_opt;
    const double discretized_error = report.curve.front().training_error_pct;

    // Phase 3
    SplitMix64 rng(cfg.seed);
    const std::uint64_t evaluations_before = evaluator->evaluations();
    std::uint64_t epoch = 0;
    for (std::uint64_t t = 0; t < cfg.iterations_T; ++t) {
        for (std::size_t e = 0; e < n_params; ++e) {
            const auto i = static_cast<std::size_t>(rng.below(n_params));
            double best = evaluator->params()[i];
            for (double candidate : omega.values()) {
                const double eps = evaluator->loss_with(i, candidate);
                if (!std::isfinite(eps)) {
                    throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1));
                }
                if (eps <= eps_opt) {
                    eps_opt = eps;
                    best = candidate;
                }
            }
            if (best != evaluator->params()[i]) {
                evaluator->commit(i, best);
                if (evaluator->current_loss() != eps_opt) {
                    throw InvalidState("evaluator loss diverged from accepted optimum");
                }
            }
            ++epoch;
            if (epoch % cfg.record_every == 0 || epoch == report.total_epochs) {
                record(epoch);
            }
        }
    }

    report.loss_evaluations = evaluator->evaluations() - evaluations_before;
    report.final_params.assign(evaluator->params().begin(), evaluator->params().end());
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    ParamVector result(spec, report.final_params);
    return ConntraResult{std::move(result), eps_opt, std::move(report), discretized_loss,
                         discretized_error};
}

DiscreteGradients discrete_gradients(const ModelSpec& spec, const ParamVector& params,
                                     const LabeledDataset& data, const DiscreteSet& omega,
                                     std::size_t index, SearchLoss loss) {
    if (!(params.spec() == spec)) {
        throw InvalidArgument("parameter vector was built for a different model");
    }
    if (index >= params.size()) {
        throw InvalidArgument("parameter index " + std::to_string(index) + " out of range");
    }
    const std::size_t j = omega.index_of(params[index]);
    if (j == omega.size()) {
        throw DomainError("parameter " + std::to_string(index) + " is not a member of omega");
    }
    const Network net(spec);
    std::vector<double> w(params.values().begin(), params.values().end());
    auto loss_at = [&](double value) {
        w[index] = value;
        return dataset_loss(net, w, data, loss);
    };
    const double here = loss_at(omega[j]);
    DiscreteGradients g;
    if (j > 0) {
        g.left = (here - loss_at(omega[j - 1])) / (omega[j] - omega[j - 1]);
    }
    if (j + 1 < omega.size()) {
        g.right = (loss_at(omega[j + 1]) - here) / (omega[j + 1] - omega[j]);
    }
    return g;
}

} // namespace conntra
