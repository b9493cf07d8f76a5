#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "conntra/dataset.hpp"
#include "conntra/model.hpp"
#include "conntra/report.hpp"

namespace conntra {

/// Plain minibatch SGD on mean cross-entropy. `init_scale` <= 0 selects
/// Glorot-uniform limits per layer; biases start at zero either way.
struct PretrainConfig {
    double learning_rate = 0.1;
    std::uint64_t epochs = 50;
    std::size_t batch_size = 100;
    std::uint64_t seed = 0;
    double init_scale = 0.0;
    /// > 0 applies rescale_layers(target = rescale_target) after the last epoch.
    double rescale_target = 0.0;

    void validate() const;
};

/// Gradient of mean cross-entropy over `batch` w.r.t. every parameter,
/// in ParamVector layout.
std::vector<double> backprop_gradient(const ModelSpec& spec, const ParamVector& params,
                                      const LabeledDataset& batch);
std::vector<double> backprop_gradient(const Network& net, std::span<const double> params,
                                      const LabeledDataset& batch);

/// Multiplies layer l's weights by a_l = target / mean|w_l| and its biases
/// by a_1 * ... * a_l. ReLU, identity and max pooling commute with positive
/// scaling, so every logit is multiplied by the same a_1 * ... * a_L and
/// predictions are unchanged. Returns that product.
double rescale_layers(const Network& net, std::span<double> params, double target);

ParamVector initialize_params(const ModelSpec& spec, const PretrainConfig& cfg);

struct PretrainResult {
    ParamVector params;
    TrainReport report;
};

using EpochCallback = std::function<void(const CurvePoint&)>;

/// Throws TrainingDiverged naming the epoch when the training loss stops being finite.
PretrainResult pretrain(const ModelSpec& spec, const LabeledDataset& train,
                        const PretrainConfig& cfg, const LabeledDataset* validation = nullptr,
                        const EpochCallback& on_epoch = {});

// CNTRAWTS file format: magic, u64 length, f64 values, all little-endian.
void save_weights(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> load_weights(const std::filesystem::path& path);

} // namespace conntra
