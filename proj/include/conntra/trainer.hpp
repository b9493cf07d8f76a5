#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>

#include "conntra/dataset.hpp"
#include "conntra/discrete.hpp"
#include "conntra/evaluator.hpp"
#include "conntra/losses.hpp"
#include "conntra/model.hpp"
#include "conntra/report.hpp"

namespace conntra {

struct ConntraConfig {
    std::uint64_t iterations_T = 1;
    std::uint64_t seed = 0;
    SearchLoss search_loss = SearchLoss::cross_entropy;
    EvalMode eval_mode = EvalMode::incremental;
    std::uint64_t record_every = 100; ///< epochs between curve samples

    void validate() const;
};

struct ConntraResult {
    ParamVector params;  ///< W_opt, every entry a member of omega
    double optimal_loss; ///< epsilon_opt
    TrainReport report;
    double discretized_loss = 0.0;           ///< loss after phase 1
    double discretized_training_error = 0.0; ///< % after phase 1
};

using RecordCallback = std::function<void(const CurvePoint&)>;

/// Coordinate global search over a finite value set.
///
///  1. W = discretize(w_pre, omega)
///  2. eps_opt = e(g(X, W), Y)
///  3. T * |W| epochs: draw i uniformly from [0, |W|) with replacement, try
///     every omega value for W[i] in ascending order, and keep the last
///     one whose loss is <= eps_opt.
///
/// Phase 3 makes exactly T * |W| * |omega| loss evaluations. The curve is
/// sampled at epoch 0, every `record_every` epochs, and at the end.
ConntraResult conntra_train(const ModelSpec& spec, const LabeledDataset& data,
                            const ParamVector& w_pre, const DiscreteSet& omega,
                            const ConntraConfig& cfg, const LabeledDataset* validation = nullptr,
                            const RecordCallback& on_record = {});

struct DiscreteGradients {
    std::optional<double> left;
    std::optional<double> right;
};

/// Slopes of the loss between params[index] = omega_j and its neighbours
/// omega_{j-1} (left) and omega_{j+1} (right). Undefined at the ends of omega.
DiscreteGradients discrete_gradients(const ModelSpec& spec, const ParamVector& params,
                                     const LabeledDataset& data, const DiscreteSet& omega,
                                     std::size_t index, SearchLoss loss);

} // namespace conntra
