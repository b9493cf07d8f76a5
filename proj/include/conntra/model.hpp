#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "conntra/dataset.hpp"

namespace conntra {

enum class ModelKind { logistic_regression, mlp, cnn_lenet };
enum class Activation { identity, relu };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view text);

/// Architecture description. `layer_sizes` is the full width list
/// {d, h1, ..., k} and is only meaningful for MLPs; `input_shape` is {d}
/// for vector models and {H, W, C} for the CNN.
struct ModelSpec {
    ModelKind kind = ModelKind::logistic_regression;
    std::vector<std::size_t> input_shape;
    std::vector<std::size_t> layer_sizes;
    std::size_t class_count = 0;
    Activation hidden_activation = Activation::relu;

    static ModelSpec logistic(std::size_t input_dim, std::size_t classes);
    static ModelSpec mlp(std::vector<std::size_t> layer_sizes);
    /// LeNet-5: conv 6@5x5 (pad 2) -> pool 2 -> conv 16@5x5 -> pool 2 -> 120 -> 84 -> k.
    static ModelSpec lenet(std::size_t height, std::size_t width, std::size_t channels,
                           std::size_t classes);

    std::size_t input_dim() const noexcept;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct DenseLayer {
    std::size_t in = 0, out = 0;
    Activation activation = Activation::identity;
    std::size_t weight_offset = 0, bias_offset = 0;

    std::size_t weight(std::size_t i, std::size_t j) const noexcept { return weight_offset + i * out + j; }
};

/// Stride-1 convolution. Output is channel-major (C, H, W).
struct ConvLayer {
    std::size_t in_c = 0, in_h = 0, in_w = 0;
    std::size_t out_c = 0, kernel = 0, pad = 0, out_h = 0, out_w = 0;
    bool input_hwc = false; ///< true when reading the raw (H, W, C) sample
    Activation activation = Activation::identity;
    std::size_t weight_offset = 0, bias_offset = 0;

    std::size_t input_index(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return input_hwc ? (y * in_w + x) * in_c + c : (c * in_h + y) * in_w + x;
    }
    std::size_t output_index(std::size_t o, std::size_t y, std::size_t x) const noexcept {
        return (o * out_h + y) * out_w + x;
    }
    std::size_t weight(std::size_t o, std::size_t c, std::size_t ky, std::size_t kx) const noexcept {
        return weight_offset + ((o * in_c + c) * kernel + ky) * kernel + kx;
    }
};

/// Non-overlapping max pooling on (C, H, W); ties pick the first maximum.
struct PoolLayer {
    std::size_t channels = 0, in_h = 0, in_w = 0, size = 2, out_h = 0, out_w = 0;
};

using Layer = std::variant<DenseLayer, ConvLayer, PoolLayer>;

std::size_t layer_input_size(const Layer& layer) noexcept;
std::size_t layer_output_size(const Layer& layer) noexcept;
bool layer_has_params(const Layer& layer) noexcept;

/// One contiguous run of the flat parameter vector.
struct ParamBlock {
    std::string name;   ///< e.g. "dense2.weight"
    std::size_t layer = 0;
    bool bias = false;
    std::size_t offset = 0;
    std::size_t count = 0;
    std::vector<std::size_t> shape;
};

struct ParamLocation {
    std::size_t layer = 0;
    bool bias = false;
    std::size_t local = 0; ///< index inside the block
};

/// Per-sample activations. `pre[l]` holds layer l's pre-activation (empty
/// for pooling layers), `post[l]` its output.
struct Activations {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
};

/// Compiled layer stack for a ModelSpec. The last layer is always a
/// dense layer with identity activation producing the logits.
class Network {
public:
    explicit Network(const ModelSpec& spec);

    const ModelSpec& spec() const noexcept { return spec_; }
    std::span<const Layer> layers() const noexcept { return layers_; }
    std::span<const ParamBlock> layout() const noexcept { return layout_; }
    std::size_t param_count() const noexcept { return param_count_; }
    std::size_t input_size() const noexcept { return spec_.input_dim(); }
    std::size_t class_count() const noexcept { return spec_.class_count; }

    ParamLocation locate(std::size_t flat_index) const;
    std::size_t flat_index(const ParamLocation& loc) const;

    Activations make_activations() const;
    /// Forward pass for one sample; returns the logits (a view into `act`).
    std::span<const double> forward_sample(std::span<const double> params,
                                           std::span<const double> x, Activations& act) const;

    /// Adds d(loss)/d(params) for one sample into `grad`, given d(loss)/d(logits).
    /// `act` must hold this sample's forward pass; it is used as scratch.
    void backward_sample(std::span<const double> params, std::span<const double> x,
                         const Activations& act, std::span<const double> dlogits,
                         std::span<double> grad, Activations& scratch) const;

    /// Glorot-uniform limits sqrt(6 / (fan_in + fan_out)) per parameter block
    /// (0 for biases).
    std::vector<double> init_limits() const;

private:
    ModelSpec spec_;
    std::vector<Layer> layers_;
    std::vector<ParamBlock> layout_;
    std::size_t param_count_ = 0;
};

std::size_t param_count(const ModelSpec& spec);

/// The flat learning-parameter vector W for a given spec, with its layout.
class ParamVector {
public:
    explicit ParamVector(ModelSpec spec);
    ParamVector(ModelSpec spec, std::vector<double> values);

    const ModelSpec& spec() const noexcept { return spec_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }

    std::vector<ParamBlock> layout() const;

private:
    ModelSpec spec_;
    std::vector<double> values_;
};

struct Prediction {
    std::size_t rows = 0;
    std::size_t classes = 0;
    std::vector<double> probabilities; ///< rows x classes, row-stochastic
    std::vector<std::uint32_t> predicted_class;

    std::span<const double> row(std::size_t n) const noexcept {
        return {probabilities.data() + n * classes, classes};
    }
};

/// Numerically stable softmax. `out` may alias `logits`.
void softmax(std::span<const double> logits, std::span<double> out) noexcept;

/// Index of the largest entry, lowest index on ties.
std::uint32_t argmax(std::span<const double> values) noexcept;

Prediction forward(const ModelSpec& spec, const ParamVector& params, const LabeledDataset& data);
Prediction forward(const Network& net, std::span<const double> params, const LabeledDataset& data);

/// Raw logits, N x k row-major.
std::vector<double> forward_logits(const Network& net, std::span<const double> params,
                                   const LabeledDataset& data);

} // namespace conntra
