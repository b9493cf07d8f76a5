#include "conntra/evaluator.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "conntra/errors.hpp"

namespace conntra {

namespace {

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double activate(Activation a, double x) noexcept {
    return a == Activation::relu ? (x > 0.0 ? x : 0.0) : x;
}

Activation layer_activation(const Layer& layer) noexcept {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->activation;
    if (const auto* c = std::get_if<ConvLayer>(&layer)) return c->activation;
    return Activation::identity;
}

} // namespace

std::string_view to_string(EvalMode mode) noexcept {
    return mode == EvalMode::full ? "full" : "incremental";
}

EvalMode parse_eval_mode(std::string_view text) {
    if (text == "full") return EvalMode::full;
    if (text == "incremental") return EvalMode::incremental;
    throw InvalidArgument("unknown eval mode '" + std::string(text) + "'");
}

std::uint64_t param_checksum_term(std::size_t index, double value) noexcept {
    return mix64(std::bit_cast<std::uint64_t>(value) ^
                 ((static_cast<std::uint64_t>(index) + 1) * 0x9e3779b97f4a7c15ULL));
}

std::uint64_t param_checksum(std::span<const double> params) noexcept {
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        sum += param_checksum_term(i, params[i]);
    }
    return sum;
}

CandidateEvaluator::CandidateEvaluator(const Network& net, const LabeledDataset& data,
                                       std::vector<double> params, SearchLoss loss)
    : net_(net), data_(data), params_(std::move(params)), loss_(loss) {
    if (params_.size() != net_.param_count()) {
        throw InvalidArgument("parameter vector does not match model");
    }
    if (data_.feature_dim() != net_.input_size() || data_.class_count() != net_.class_count()) {
        throw InvalidArgument("dataset shape does not match model");
    }
    checksum_ = param_checksum(params_);
}

double CandidateEvaluator::loss_with(std::size_t index, double value) {
    if (index >= params_.size()) {
        throw InvalidArgument("parameter index " + std::to_string(index) + " out of range");
    }
    ++evaluations_;
    return evaluate_candidate(index, value);
}

void CandidateEvaluator::commit(std::size_t index, double value) {
    if (index >= params_.size()) {
        throw InvalidArgument("parameter index " + std::to_string(index) + " out of range");
    }
    checksum_ += param_checksum_term(index, value) - param_checksum_term(index, params_[index]);
    apply(index, value);
    params_[index] = value;
}

FullEvaluator::FullEvaluator(const Network& net, const LabeledDataset& data,
                             std::vector<double> params, SearchLoss loss)
    : CandidateEvaluator(net, data, std::move(params), loss) {
    current_loss_ = dataset_loss(net_, params_, data_, loss_);
}

double FullEvaluator::evaluate_candidate(std::size_t index, double value) {
    const double old = params_[index];
    params_[index] = value;
    const double loss = dataset_loss(net_, params_, data_, loss_);
    params_[index] = old;
    return loss;
}

void FullEvaluator::apply(std::size_t index, double value) {
    params_[index] = value;
    current_loss_ = dataset_loss(net_, params_, data_, loss_);
}

double FullEvaluator::training_error() const {
    return classification_error(forward(net_, params_, data_), data_.labels());
}

IncrementalEvaluator::IncrementalEvaluator(const Network& net, const LabeledDataset& data,
                                           std::vector<double> params, SearchLoss loss)
    : CandidateEvaluator(net, data, std::move(params), loss) {
    const auto layers = net_.layers();
    const std::size_t N = data_.size();
    width_.resize(layers.size());
    pre_cache_.resize(layers.size());
    post_cache_.resize(layers.size());
    overlay_.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        width_[l] = layer_output_size(layers[l]);
        if (layer_has_params(layers[l])) {
            pre_cache_[l].assign(N * width_[l], 0.0);
            overlay_[l].pre.assign(width_[l], 0.0);
            overlay_[l].pre_stamp.assign(width_[l], 0);
        }
        post_cache_[l].assign(N * width_[l], 0.0);
        overlay_[l].post.assign(width_[l], 0.0);
        overlay_[l].post_stamp.assign(width_[l], 0);
    }
    row_loss_.assign(N, 0.0);
    logit_scratch_.assign(net_.class_count(), 0.0);
    prob_scratch_.assign(net_.class_count(), 0.0);

    if (std::holds_alternative<DenseLayer>(layers[0])) {
        const std::size_t d = data_.feature_dim();
        col_start_.assign(d + 1, 0);
        for (std::size_t n = 0; n < N; ++n) {
            const auto x = data_.row(n);
            for (std::size_t i = 0; i < d; ++i) {
                if (x[i] != 0.0) ++col_start_[i + 1];
            }
        }
        for (std::size_t i = 0; i < d; ++i) col_start_[i + 1] += col_start_[i];
        col_rows_.resize(col_start_[d]);
        std::vector<std::size_t> fill(col_start_.begin(), col_start_.end() - 1);
        for (std::size_t n = 0; n < N; ++n) {
            const auto x = data_.row(n);
            for (std::size_t i = 0; i < d; ++i) {
                if (x[i] != 0.0) col_rows_[fill[i]++] = static_cast<std::uint32_t>(n);
            }
        }
    }
    resync();
}

void IncrementalEvaluator::resync() {
    const std::size_t N = data_.size();
    const std::size_t k = net_.class_count();
    Activations act = net_.make_activations();
    loss_sum_ = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const auto logits = net_.forward_sample(params_, data_.row(n), act);
        for (std::size_t l = 0; l < width_.size(); ++l) {
            if (!pre_cache_[l].empty()) {
                std::copy(act.pre[l].begin(), act.pre[l].end(),
                          pre_cache_[l].begin() + static_cast<std::ptrdiff_t>(n * width_[l]));
            }
            std::copy(act.post[l].begin(), act.post[l].end(),
                      post_cache_[l].begin() + static_cast<std::ptrdiff_t>(n * width_[l]));
        }
        row_loss_[n] = row_loss(logits.first(k), data_.label(n), loss_, prob_scratch_);
        loss_sum_ += row_loss_[n];
    }
    current_loss_ = loss_sum_ / static_cast<double>(N);
}

std::span<const double> IncrementalEvaluator::logits(std::size_t n) const noexcept {
    const std::size_t k = net_.class_count();
    return {post_cache_.back().data() + n * k, k};
}

double IncrementalEvaluator::training_error() const {
    std::size_t wrong = 0;
    std::vector<double> probs(net_.class_count());
    for (std::size_t n = 0; n < data_.size(); ++n) {
        softmax(logits(n), probs);
        if (argmax(probs) != data_.label(n)) ++wrong;
    }
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(data_.size());
}

double IncrementalEvaluator::evaluate_candidate(std::size_t index, double value) {
    const double dv = value - params_[index];
    if (dv == 0.0) {
        return current_loss_;
    }
    const double delta = sweep(net_.locate(index), dv, false);
    return (loss_sum_ + delta) / static_cast<double>(data_.size());
}

void IncrementalEvaluator::apply(std::size_t index, double value) {
    const double dv = value - params_[index];
    if (dv == 0.0) {
        return;
    }
    const double delta = sweep(net_.locate(index), dv, true);
    loss_sum_ = loss_sum_ + delta;
    current_loss_ = loss_sum_ / static_cast<double>(data_.size());
}

double IncrementalEvaluator::sweep(const ParamLocation& loc, double dv, bool commit) {
    double delta = 0.0;
    auto visit = [&](std::size_t n) {
        double r = 0.0;
        const bool reaches_output = propagate(n, loc, dv, r);
        if (reaches_output) delta += r - row_loss_[n];
        if (commit) {
            // Pre-activations can change even when a ReLU hides it downstream.
            write_back(n, loc.layer);
            if (reaches_output) row_loss_[n] = r;
        }
    };
    const auto& layer = net_.layers()[loc.layer];
    if (loc.layer == 0 && !loc.bias && std::holds_alternative<DenseLayer>(layer)) {
        const std::size_t i = loc.local / std::get<DenseLayer>(layer).out;
        for (std::size_t p = col_start_[i]; p < col_start_[i + 1]; ++p) {
            visit(col_rows_[p]);
        }
    } else {
        for (std::size_t n = 0; n < data_.size(); ++n) {
            visit(n);
        }
    }
    return delta;
}

void IncrementalEvaluator::next_stamp() {
    if (++stamp_ == 0) {
        for (auto& ov : overlay_) {
            std::fill(ov.pre_stamp.begin(), ov.pre_stamp.end(), 0);
            std::fill(ov.post_stamp.begin(), ov.post_stamp.end(), 0);
        }
        stamp_ = 1;
    }
}

const double* IncrementalEvaluator::layer_input(std::size_t layer, std::size_t n) const noexcept {
    return layer == 0 ? data_.row(n).data() : post_cache_[layer - 1].data() + n * width_[layer - 1];
}

double IncrementalEvaluator::post_value(std::size_t layer, std::size_t n,
                                        std::size_t i) const noexcept {
    const Overlay& ov = overlay_[layer];
    return ov.post_stamp[i] == stamp_ ? ov.post[i] : post_cache_[layer][n * width_[layer] + i];
}

void IncrementalEvaluator::add_pre(std::size_t layer, std::size_t n, std::size_t i,
                                   double delta) {
    Overlay& ov = overlay_[layer];
    if (ov.pre_stamp[i] != stamp_) {
        ov.pre_stamp[i] = stamp_;
        ov.pre[i] = pre_cache_[layer][n * width_[layer] + i];
        ov.pre_touched.push_back(static_cast<std::uint32_t>(i));
    }
    ov.pre[i] += delta;
}

void IncrementalEvaluator::finish_layer(std::size_t layer, std::size_t n) {
    Overlay& ov = overlay_[layer];
    const Activation act = layer_activation(net_.layers()[layer]);
    const double* cached = post_cache_[layer].data() + n * width_[layer];
    for (std::uint32_t t : ov.pre_touched) {
        const double post = activate(act, ov.pre[t]);
        if (post != cached[t]) {
            ov.post_stamp[t] = stamp_;
            ov.post[t] = post;
            ov.post_touched.push_back(t);
            ov.changes.emplace_back(t, post - cached[t]);
        }
    }
}

bool IncrementalEvaluator::propagate(std::size_t n, const ParamLocation& loc, double dv,
                                     double& new_row_loss) {
    next_stamp();
    const auto layers = net_.layers();
    const double* p = params_.data();
    auto reset = [&](std::size_t l) {
        overlay_[l].pre_touched.clear();
        overlay_[l].post_touched.clear();
        overlay_[l].changes.clear();
    };

    // Seed the changed parameter's own layer.
    const std::size_t L = loc.layer;
    for (std::size_t l = L; l < layers.size(); ++l) reset(l);
    if (const auto* D = std::get_if<DenseLayer>(&layers[L])) {
        if (loc.bias) {
            add_pre(L, n, loc.local, dv);
        } else {
            const std::size_t i = loc.local / D->out;
            const std::size_t j = loc.local % D->out;
            const double a = layer_input(L, n)[i];
            if (a == 0.0) return false;
            add_pre(L, n, j, dv * a);
        }
    } else {
        const auto& C = std::get<ConvLayer>(layers[L]);
        if (loc.bias) {
            for (std::size_t y = 0; y < C.out_h; ++y)
                for (std::size_t x = 0; x < C.out_w; ++x)
                    add_pre(L, n, C.output_index(loc.local, y, x), dv);
        } else {
            const std::size_t kk = C.kernel * C.kernel;
            const std::size_t o = loc.local / (C.in_c * kk);
            const std::size_t c = (loc.local / kk) % C.in_c;
            const std::size_t ky = (loc.local % kk) / C.kernel;
            const std::size_t kx = loc.local % C.kernel;
            const double* in = layer_input(L, n);
            for (std::size_t y = 0; y < C.out_h; ++y) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) -
                                          static_cast<std::ptrdiff_t>(C.pad);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(C.in_h)) continue;
                for (std::size_t x = 0; x < C.out_w; ++x) {
                    const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) -
                                              static_cast<std::ptrdiff_t>(C.pad);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(C.in_w)) continue;
                    const double a = in[C.input_index(c, static_cast<std::size_t>(iy),
                                                      static_cast<std::size_t>(ix))];
                    if (a != 0.0) add_pre(L, n, C.output_index(o, y, x), dv * a);
                }
            }
        }
    }
    finish_layer(L, n);

    for (std::size_t l = L + 1; l < layers.size(); ++l) {
        const auto& changes = overlay_[l - 1].changes;
        if (changes.empty()) return false;
        Overlay& ov = overlay_[l];
        if (const auto* P = std::get_if<PoolLayer>(&layers[l])) {
            const std::size_t plane = P->in_h * P->in_w;
            for (const auto& [t, d] : changes) {
                const std::size_t c = t / plane;
                const std::size_t oy = (t % plane) / P->in_w / P->size;
                const std::size_t ox = (t % P->in_w) / P->size;
                if (oy >= P->out_h || ox >= P->out_w) continue;
                const std::size_t w = (c * P->out_h + oy) * P->out_w + ox;
                if (ov.post_stamp[w] != stamp_) {
                    ov.post_stamp[w] = stamp_;
                    ov.post_touched.push_back(static_cast<std::uint32_t>(w));
                }
            }
            const double* cached = post_cache_[l].data() + n * width_[l];
            for (std::uint32_t w : ov.post_touched) {
                const std::size_t c = w / (P->out_h * P->out_w);
                const std::size_t oy = (w / P->out_w) % P->out_h;
                const std::size_t ox = w % P->out_w;
                double best = post_value(l - 1, n, (c * P->in_h + oy * P->size) * P->in_w + ox * P->size);
                for (std::size_t dy = 0; dy < P->size; ++dy) {
                    for (std::size_t dx = 0; dx < P->size; ++dx) {
                        best = std::max(best, post_value(l - 1, n,
                                                         (c * P->in_h + oy * P->size + dy) * P->in_w +
                                                             ox * P->size + dx));
                    }
                }
                ov.post[w] = best;
                if (best != cached[w]) ov.changes.emplace_back(w, best - cached[w]);
            }
        } else if (const auto* D = std::get_if<DenseLayer>(&layers[l])) {
            for (const auto& [i, d] : changes) {
                const double* row = p + D->weight_offset + static_cast<std::size_t>(i) * D->out;
                for (std::size_t j = 0; j < D->out; ++j) {
                    add_pre(l, n, j, d * row[j]);
                }
            }
            finish_layer(l, n);
        } else {
            const auto& C = std::get<ConvLayer>(layers[l]);
            const std::size_t plane = C.in_h * C.in_w;
            for (const auto& [t, d] : changes) {
                const std::size_t c = t / plane;
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>((t % plane) / C.in_w);
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(t % C.in_w);
                for (std::size_t ky = 0; ky < C.kernel; ++ky) {
                    const std::ptrdiff_t oy = iy + static_cast<std::ptrdiff_t>(C.pad) -
                                              static_cast<std::ptrdiff_t>(ky);
                    if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(C.out_h)) continue;
                    for (std::size_t kx = 0; kx < C.kernel; ++kx) {
                        const std::ptrdiff_t ox = ix + static_cast<std::ptrdiff_t>(C.pad) -
                                                  static_cast<std::ptrdiff_t>(kx);
                        if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(C.out_w)) continue;
                        for (std::size_t o = 0; o < C.out_c; ++o) {
                            add_pre(l, n,
                                    C.output_index(o, static_cast<std::size_t>(oy),
                                                   static_cast<std::size_t>(ox)),
                                    d * p[C.weight(o, c, ky, kx)]);
                        }
                    }
                }
            }
            finish_layer(l, n);
        }
    }

    const std::size_t last = layers.size() - 1;
    if (overlay_[last].changes.empty()) return false;
    for (std::size_t c = 0; c < logit_scratch_.size(); ++c) {
        logit_scratch_[c] = post_value(last, n, c);
    }
    new_row_loss = row_loss(logit_scratch_, data_.label(n), loss_, prob_scratch_);
    return true;
}

void IncrementalEvaluator::write_back(std::size_t n, std::size_t first_layer) {
    for (std::size_t l = first_layer; l < overlay_.size(); ++l) {
        const Overlay& ov = overlay_[l];
        const std::size_t base = n * width_[l];
        for (std::uint32_t t : ov.pre_touched) pre_cache_[l][base + t] = ov.pre[t];
        for (std::uint32_t t : ov.post_touched) post_cache_[l][base + t] = ov.post[t];
    }
}

std::unique_ptr<CandidateEvaluator> make_evaluator(EvalMode mode, const Network& net,
                                                   const LabeledDataset& data,
                                                   std::vector<double> params, SearchLoss loss) {
    if (mode == EvalMode::full) {
        return std::make_unique<FullEvaluator>(net, data, std::move(params), loss);
    }
    return std::make_unique<IncrementalEvaluator>(net, data, std::move(params), loss);
}

double incremental_eval(CandidateEvaluator& cache, std::span<const double> params,
                        std::size_t index, double value) {
    if (params.size() != cache.params().size() || param_checksum(params) != cache.checksum()) {
        throw InvalidState("evaluation cache is stale: parameter checksum mismatch");
    }
    return cache.loss_with(index, value);
}

} // namespace conntra
