#include "conntra/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "conntra/errors.hpp"

namespace conntra {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double activate(Activation a, double x) noexcept {
    return a == Activation::relu ? (x > 0.0 ? x : 0.0) : x;
}

void dense_forward(const DenseLayer& L, const double* p, const double* in, double* pre,
                   double* post) {
    const double* W = p + L.weight_offset;
    std::copy_n(p + L.bias_offset, L.out, pre);
    for (std::size_t i = 0; i < L.in; ++i) {
        const double a = in[i];
        if (a == 0.0) {
            continue;
        }
        const double* row = W + i * L.out;
        for (std::size_t j = 0; j < L.out; ++j) {
            pre[j] += a * row[j];
        }
    }
    for (std::size_t j = 0; j < L.out; ++j) {
        post[j] = activate(L.activation, pre[j]);
    }
}

void conv_forward(const ConvLayer& L, const double* p, const double* in, double* pre,
                  double* post) {
    const std::size_t plane = L.out_h * L.out_w;
    for (std::size_t o = 0; o < L.out_c; ++o) {
        double* out = pre + o * plane;
        std::fill_n(out, plane, p[L.bias_offset + o]);
        for (std::size_t c = 0; c < L.in_c; ++c) {
            for (std::size_t ky = 0; ky < L.kernel; ++ky) {
                for (std::size_t kx = 0; kx < L.kernel; ++kx) {
                    const double w = p[L.weight(o, c, ky, kx)];
                    if (w == 0.0) {
                        continue;
                    }
                    for (std::size_t y = 0; y < L.out_h; ++y) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) -
                                                  static_cast<std::ptrdiff_t>(L.pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(L.in_h)) {
                            continue;
                        }
                        for (std::size_t x = 0; x < L.out_w; ++x) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) -
                                                      static_cast<std::ptrdiff_t>(L.pad);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(L.in_w)) {
                                continue;
                            }
                            out[y * L.out_w + x] +=
                                w * in[L.input_index(c, static_cast<std::size_t>(iy),
                                                     static_cast<std::size_t>(ix))];
                        }
                    }
                }
            }
        }
    }
    const std::size_t n = L.out_c * plane;
    for (std::size_t i = 0; i < n; ++i) {
        post[i] = activate(L.activation, pre[i]);
    }
}

void pool_forward(const PoolLayer& L, const double* in, double* out) {
    for (std::size_t c = 0; c < L.channels; ++c) {
        for (std::size_t y = 0; y < L.out_h; ++y) {
            for (std::size_t x = 0; x < L.out_w; ++x) {
                double best = in[(c * L.in_h + y * L.size) * L.in_w + x * L.size];
                for (std::size_t dy = 0; dy < L.size; ++dy) {
                    for (std::size_t dx = 0; dx < L.size; ++dx) {
                        best = std::max(
                            best, in[(c * L.in_h + y * L.size + dy) * L.in_w + x * L.size + dx]);
                    }
                }
                out[(c * L.out_h + y) * L.out_w + x] = best;
            }
        }
    }
}

} // namespace

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
    case ModelKind::logistic_regression: return "logistic_regression";
    case ModelKind::mlp: return "mlp";
    case ModelKind::cnn_lenet: return "cnn_lenet";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
    if (text == "logreg" || text == "logistic_regression") return ModelKind::logistic_regression;
    if (text == "mlp") return ModelKind::mlp;
    if (text == "cnn" || text == "cnn_lenet") return ModelKind::cnn_lenet;
    throw InvalidArgument("unknown model kind '" + std::string(text) + "'");
}

ModelSpec ModelSpec::logistic(std::size_t input_dim, std::size_t classes) {
    ModelSpec s;
    s.kind = ModelKind::logistic_regression;
    s.input_shape = {input_dim};
    s.class_count = classes;
    return s;
}

ModelSpec ModelSpec::mlp(std::vector<std::size_t> layer_sizes) {
    if (layer_sizes.size() < 2) {
        throw InvalidArgument("mlp needs at least input and output widths");
    }
    ModelSpec s;
    s.kind = ModelKind::mlp;
    s.input_shape = {layer_sizes.front()};
    s.class_count = layer_sizes.back();
    s.layer_sizes = std::move(layer_sizes);
    return s;
}

ModelSpec ModelSpec::lenet(std::size_t height, std::size_t width, std::size_t channels,
                           std::size_t classes) {
    ModelSpec s;
    s.kind = ModelKind::cnn_lenet;
    s.input_shape = {height, width, channels};
    s.class_count = classes;
    return s;
}

std::size_t ModelSpec::input_dim() const noexcept {
    return std::accumulate(input_shape.begin(), input_shape.end(), std::size_t{1},
                           std::multiplies<>());
}

std::size_t layer_input_size(const Layer& layer) noexcept {
    return std::visit(overloaded{
                          [](const DenseLayer& l) { return l.in; },
                          [](const ConvLayer& l) { return l.in_c * l.in_h * l.in_w; },
                          [](const PoolLayer& l) { return l.channels * l.in_h * l.in_w; },
                      },
                      layer);
}

std::size_t layer_output_size(const Layer& layer) noexcept {
    return std::visit(overloaded{
                          [](const DenseLayer& l) { return l.out; },
                          [](const ConvLayer& l) { return l.out_c * l.out_h * l.out_w; },
                          [](const PoolLayer& l) { return l.channels * l.out_h * l.out_w; },
                      },
                      layer);
}

bool layer_has_params(const Layer& layer) noexcept {
    return !std::holds_alternative<PoolLayer>(layer);
}

Network::Network(const ModelSpec& spec) : spec_(spec) {
    if (spec_.class_count < 2) {
        throw InvalidArgument("model needs at least two classes");
    }
    if (spec_.input_shape.empty() || spec_.input_dim() == 0) {
        throw InvalidArgument("model input shape is empty");
    }
    std::size_t offset = 0;
    auto add_dense = [&](std::size_t in, std::size_t out, Activation act) {
        if (in == 0 || out == 0) {
            throw InvalidArgument("dense layer with zero width");
        }
        DenseLayer d{in, out, act, offset, offset + in * out};
        const std::size_t idx = layers_.size();
        const std::string base = "layer" + std::to_string(idx);
        layout_.push_back({base + ".weight", idx, false, offset, in * out, {in, out}});
        layout_.push_back({base + ".bias", idx, true, offset + in * out, out, {out}});
        offset += in * out + out;
        layers_.emplace_back(d);
    };

    switch (spec_.kind) {
    case ModelKind::logistic_regression:
        if (spec_.input_shape.size() != 1) {
            throw InvalidArgument("logistic regression expects a flat input shape");
        }
        add_dense(spec_.input_shape[0], spec_.class_count, Activation::identity);
        break;
    case ModelKind::mlp: {
        const auto& sizes = spec_.layer_sizes;
        if (sizes.size() < 2 || sizes.front() != spec_.input_dim() ||
            sizes.back() != spec_.class_count) {
            throw InvalidArgument("mlp layer sizes inconsistent with input/class count");
        }
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const bool last = l + 2 == sizes.size();
            add_dense(sizes[l], sizes[l + 1], last ? Activation::identity : spec_.hidden_activation);
        }
        break;
    }
    case ModelKind::cnn_lenet: {
        if (spec_.input_shape.size() != 3) {
            throw InvalidArgument("lenet expects an (H, W, C) input shape");
        }
        std::size_t h = spec_.input_shape[0], w = spec_.input_shape[1], c = spec_.input_shape[2];
        bool hwc = true;
        auto add_conv = [&](std::size_t out_c, std::size_t k, std::size_t pad) {
            if (h + 2 * pad < k || w + 2 * pad < k) {
                throw InvalidArgument("input too small for lenet convolution");
            }
            ConvLayer L;
            L.in_c = c;
            L.in_h = h;
            L.in_w = w;
            L.out_c = out_c;
            L.kernel = k;
            L.pad = pad;
            L.out_h = h + 2 * pad - k + 1;
            L.out_w = w + 2 * pad - k + 1;
            L.input_hwc = hwc;
            L.activation = spec_.hidden_activation;
            L.weight_offset = offset;
            L.bias_offset = offset + out_c * c * k * k;
            const std::size_t idx = layers_.size();
            const std::string base = "layer" + std::to_string(idx);
            layout_.push_back({base + ".weight", idx, false, offset, out_c * c * k * k,
                               {out_c, c, k, k}});
            layout_.push_back({base + ".bias", idx, true, L.bias_offset, out_c, {out_c}});
            offset = L.bias_offset + out_c;
            layers_.emplace_back(L);
            h = L.out_h;
            w = L.out_w;
            c = out_c;
            hwc = false;
        };
        auto add_pool = [&](std::size_t size) {
            if (h < size || w < size) {
                throw InvalidArgument("input too small for lenet pooling");
            }
            PoolLayer P{c, h, w, size, h / size, w / size};
            layers_.emplace_back(P);
            h = P.out_h;
            w = P.out_w;
        };
        add_conv(6, 5, 2);
        add_pool(2);
        add_conv(16, 5, 0);
        add_pool(2);
        add_dense(c * h * w, 120, spec_.hidden_activation);
        add_dense(120, 84, spec_.hidden_activation);
        add_dense(84, spec_.class_count, Activation::identity);
        break;
    }
    }
    param_count_ = offset;
}

ParamLocation Network::locate(std::size_t flat_index) const {
    for (const auto& block : layout_) {
        if (flat_index >= block.offset && flat_index < block.offset + block.count) {
            return {block.layer, block.bias, flat_index - block.offset};
        }
    }
    throw InvalidArgument("parameter index " + std::to_string(flat_index) + " out of range");
}

std::size_t Network::flat_index(const ParamLocation& loc) const {
    for (const auto& block : layout_) {
        if (block.layer == loc.layer && block.bias == loc.bias) {
            if (loc.local >= block.count) {
                break;
            }
            return block.offset + loc.local;
        }
    }
    throw InvalidArgument("parameter location out of range");
}

Activations Network::make_activations() const {
    Activations act;
    act.pre.resize(layers_.size());
    act.post.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::size_t n = layer_output_size(layers_[l]);
        if (layer_has_params(layers_[l])) {
            act.pre[l].assign(n, 0.0);
        }
        act.post[l].assign(n, 0.0);
    }
    return act;
}

std::span<const double> Network::forward_sample(std::span<const double> params,
                                                std::span<const double> x,
                                                Activations& act) const {
    const double* p = params.data();
    const double* in = x.data();
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        double* pre = act.pre[l].data();
        double* post = act.post[l].data();
        std::visit(overloaded{
                       [&](const DenseLayer& L) { dense_forward(L, p, in, pre, post); },
                       [&](const ConvLayer& L) { conv_forward(L, p, in, pre, post); },
                       [&](const PoolLayer& L) { pool_forward(L, in, post); },
                   },
                   layers_[l]);
        in = post;
    }
    return act.post.back();
}

void Network::backward_sample(std::span<const double> params, std::span<const double> x,
                              const Activations& act, std::span<const double> dlogits,
                              std::span<double> grad, Activations& scratch) const {
    const double* p = params.data();
    double* g = grad.data();
    // scratch.pre[l] = dL/dpre, scratch.post[l] = dL/dpost
    const std::size_t last = layers_.size() - 1;
    std::copy(dlogits.begin(), dlogits.end(), scratch.pre[last].begin());

    for (std::size_t l = layers_.size(); l-- > 0;) {
        const double* in = l == 0 ? x.data() : act.post[l - 1].data();
        double* din = l == 0 ? nullptr : scratch.post[l - 1].data();
        const std::size_t in_size = layer_input_size(layers_[l]);
        if (din) {
            std::fill_n(din, in_size, 0.0);
        }

        if (const auto* D = std::get_if<DenseLayer>(&layers_[l])) {
            double* delta = scratch.pre[l].data();
            if (l != last) {
                for (std::size_t j = 0; j < D->out; ++j) {
                    delta[j] = D->activation == Activation::relu && act.pre[l][j] <= 0.0
                                   ? 0.0
                                   : scratch.post[l][j];
                }
            }
            for (std::size_t j = 0; j < D->out; ++j) {
                g[D->bias_offset + j] += delta[j];
            }
            for (std::size_t i = 0; i < D->in; ++i) {
                const double a = in[i];
                const double* row = p + D->weight_offset + i * D->out;
                double* grow = g + D->weight_offset + i * D->out;
                double acc = 0.0;
                for (std::size_t j = 0; j < D->out; ++j) {
                    grow[j] += a * delta[j];
                    acc += row[j] * delta[j];
                }
                if (din) {
                    din[i] = acc;
                }
            }
        } else if (const auto* C = std::get_if<ConvLayer>(&layers_[l])) {
            double* delta = scratch.pre[l].data();
            const std::size_t n = C->out_c * C->out_h * C->out_w;
            for (std::size_t i = 0; i < n; ++i) {
                delta[i] = C->activation == Activation::relu && act.pre[l][i] <= 0.0
                               ? 0.0
                               : scratch.post[l][i];
            }
            for (std::size_t o = 0; o < C->out_c; ++o) {
                double bsum = 0.0;
                for (std::size_t y = 0; y < C->out_h; ++y) {
                    for (std::size_t x2 = 0; x2 < C->out_w; ++x2) {
                        bsum += delta[C->output_index(o, y, x2)];
                    }
                }
                g[C->bias_offset + o] += bsum;
                for (std::size_t c = 0; c < C->in_c; ++c) {
                    for (std::size_t ky = 0; ky < C->kernel; ++ky) {
                        for (std::size_t kx = 0; kx < C->kernel; ++kx) {
                            const std::size_t widx = C->weight(o, c, ky, kx);
                            const double w = p[widx];
                            double wsum = 0.0;
                            for (std::size_t y = 0; y < C->out_h; ++y) {
                                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) -
                                                          static_cast<std::ptrdiff_t>(C->pad);
                                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(C->in_h)) {
                                    continue;
                                }
                                for (std::size_t x2 = 0; x2 < C->out_w; ++x2) {
                                    const std::ptrdiff_t ix =
                                        static_cast<std::ptrdiff_t>(x2 + kx) -
                                        static_cast<std::ptrdiff_t>(C->pad);
                                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(C->in_w)) {
                                        continue;
                                    }
                                    const std::size_t ii =
                                        C->input_index(c, static_cast<std::size_t>(iy),
                                                       static_cast<std::size_t>(ix));
                                    const double d = delta[C->output_index(o, y, x2)];
                                    wsum += in[ii] * d;
                                    if (din) {
                                        din[ii] += w * d;
                                    }
                                }
                            }
                            g[widx] += wsum;
                        }
                    }
                }
            }
        } else {
            const auto& P = std::get<PoolLayer>(layers_[l]);
            const double* dout = scratch.post[l].data();
            for (std::size_t c = 0; c < P.channels; ++c) {
                for (std::size_t y = 0; y < P.out_h; ++y) {
                    for (std::size_t x2 = 0; x2 < P.out_w; ++x2) {
                        std::size_t best = (c * P.in_h + y * P.size) * P.in_w + x2 * P.size;
                        for (std::size_t dy = 0; dy < P.size; ++dy) {
                            for (std::size_t dx = 0; dx < P.size; ++dx) {
                                const std::size_t idx =
                                    (c * P.in_h + y * P.size + dy) * P.in_w + x2 * P.size + dx;
                                if (in[idx] > in[best]) {
                                    best = idx;
                                }
                            }
                        }
                        din[best] += dout[(c * P.out_h + y) * P.out_w + x2];
                    }
                }
            }
        }
    }
}

std::vector<double> Network::init_limits() const {
    std::vector<double> limits(param_count_, 0.0);
    for (const auto& layer : layers_) {
        double limit = 0.0;
        std::size_t offset = 0, count = 0;
        if (const auto* D = std::get_if<DenseLayer>(&layer)) {
            limit = std::sqrt(6.0 / static_cast<double>(D->in + D->out));
            offset = D->weight_offset;
            count = D->in * D->out;
        } else if (const auto* C = std::get_if<ConvLayer>(&layer)) {
            const std::size_t k2 = C->kernel * C->kernel;
            limit = std::sqrt(6.0 / static_cast<double>((C->in_c + C->out_c) * k2));
            offset = C->weight_offset;
            count = C->out_c * C->in_c * k2;
        }
        std::fill_n(limits.begin() + static_cast<std::ptrdiff_t>(offset), count, limit);
    }
    return limits;
}

std::size_t param_count(const ModelSpec& spec) { return Network(spec).param_count(); }

ParamVector::ParamVector(ModelSpec spec)
    : spec_(std::move(spec)), values_(param_count(spec_), 0.0) {}

ParamVector::ParamVector(ModelSpec spec, std::vector<double> values)
    : spec_(std::move(spec)), values_(std::move(values)) {
    if (values_.size() != param_count(spec_)) {
        throw InvalidArgument("parameter vector has " + std::to_string(values_.size()) +
                              " entries, model needs " + std::to_string(param_count(spec_)));
    }
}

std::vector<ParamBlock> ParamVector::layout() const {
    const Network net(spec_);
    return {net.layout().begin(), net.layout().end()};
}

void softmax(std::span<const double> logits, std::span<double> out) noexcept {
    double m = logits[0];
    for (double z : logits) {
        m = std::max(m, z);
    }
    double s = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        out[c] = std::exp(logits[c] - m);
        s += out[c];
    }
    for (double& v : out) {
        v /= s;
    }
}

std::uint32_t argmax(std::span<const double> values) noexcept {
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < values.size(); ++c) {
        if (values[c] > values[best]) {
            best = c;
        }
    }
    return best;
}

namespace {

void check_shapes(const Network& net, std::span<const double> params,
                  const LabeledDataset& data) {
    if (params.size() != net.param_count()) {
        throw InvalidArgument("parameter vector does not match model");
    }
    if (data.feature_dim() != net.input_size()) {
        throw InvalidArgument("dataset feature dimension " + std::to_string(data.feature_dim()) +
                              " does not match model input " + std::to_string(net.input_size()));
    }
    if (data.class_count() != net.class_count()) {
        throw InvalidArgument("dataset class count does not match model");
    }
}

} // namespace

std::vector<double> forward_logits(const Network& net, std::span<const double> params,
                                   const LabeledDataset& data) {
    check_shapes(net, params, data);
    const std::size_t k = net.class_count();
    std::vector<double> logits(data.size() * k);
    Activations act = net.make_activations();
    for (std::size_t n = 0; n < data.size(); ++n) {
        const auto z = net.forward_sample(params, data.row(n), act);
        std::copy(z.begin(), z.end(), logits.begin() + static_cast<std::ptrdiff_t>(n * k));
    }
    return logits;
}

Prediction forward(const Network& net, std::span<const double> params,
                   const LabeledDataset& data) {
    Prediction pred;
    pred.rows = data.size();
    pred.classes = net.class_count();
    pred.probabilities = forward_logits(net, params, data);
    pred.predicted_class.resize(pred.rows);
    for (std::size_t n = 0; n < pred.rows; ++n) {
        std::span<double> row(pred.probabilities.data() + n * pred.classes, pred.classes);
        softmax(row, row);
        pred.predicted_class[n] = argmax(row);
    }
    return pred;
}

Prediction forward(const ModelSpec& spec, const ParamVector& params, const LabeledDataset& data) {
    if (!(params.spec() == spec)) {
        throw InvalidArgument("parameter vector was built for a different model");
    }
    return forward(Network(spec), params.values(), data);
}

} // namespace conntra
