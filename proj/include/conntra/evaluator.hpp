#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "conntra/dataset.hpp"
#include "conntra/losses.hpp"
#include "conntra/model.hpp"

namespace conntra {

enum class EvalMode { full, incremental };

std::string_view to_string(EvalMode mode) noexcept;
EvalMode parse_eval_mode(std::string_view text);

/// Order-sensitive fingerprint of a parameter vector. Additive over
/// entries, so a single-entry change can be applied in O(1).
std::uint64_t param_checksum(std::span<const double> params) noexcept;
std::uint64_t param_checksum_term(std::size_t index, double value) noexcept;

/// Evaluates e(g(X, W), Y) for single-coordinate substitutions of the
/// parameter vector it owns. The dataset must outlive the evaluator.
class CandidateEvaluator {
public:
    virtual ~CandidateEvaluator() = default;

    /// Loss of the current parameters.
    double current_loss() const noexcept { return current_loss_; }

    /// Loss with params[index] replaced by `value`; params are left unchanged.
    double loss_with(std::size_t index, double value);

    /// Sets params[index] = value. Afterwards current_loss() equals what
    /// loss_with(index, value) returned, bit for bit.
    void commit(std::size_t index, double value);

    /// Classification error (%) of the current parameters on the training set.
    virtual double training_error() const = 0;

    std::span<const double> params() const noexcept { return params_; }
    std::uint64_t checksum() const noexcept { return checksum_; }
    std::uint64_t evaluations() const noexcept { return evaluations_; }

protected:
    CandidateEvaluator(const Network& net, const LabeledDataset& data, std::vector<double> params,
                       SearchLoss loss);

    virtual double evaluate_candidate(std::size_t index, double value) = 0;
    virtual void apply(std::size_t index, double value) = 0;

    const Network& net_;
    const LabeledDataset& data_;
    std::vector<double> params_;
    SearchLoss loss_;
    double current_loss_ = 0.0;

private:
    std::uint64_t checksum_ = 0;
    std::uint64_t evaluations_ = 0;
};

/// Recomputes the full forward pass for every candidate.
class FullEvaluator final : public CandidateEvaluator {
public:
    FullEvaluator(const Network& net, const LabeledDataset& data, std::vector<double> params,
                  SearchLoss loss);

    double training_error() const override;

private:
    double evaluate_candidate(std::size_t index, double value) override;
    void apply(std::size_t index, double value) override;
};

/// Caches every layer's activations for every sample and propagates a
/// single-parameter change forward as a sparse delta. For logistic
/// regression this touches only the affected logit column of the samples
/// whose feature is non-zero. Losses agree with FullEvaluator to ~1e-12.
class IncrementalEvaluator final : public CandidateEvaluator {
public:
    IncrementalEvaluator(const Network& net, const LabeledDataset& data,
                         std::vector<double> params, SearchLoss loss);

    double training_error() const override;

    /// Cached logits of sample n.
    std::span<const double> logits(std::size_t n) const noexcept;

    /// Rebuilds every cache from the current parameters with a full forward pass.
    void resync();

private:
    struct Overlay {
        std::vector<double> pre, post;
        std::vector<std::uint32_t> pre_stamp, post_stamp;
        std::vector<std::uint32_t> pre_touched, post_touched;
        std::vector<std::pair<std::uint32_t, double>> changes; ///< (index, post delta)
    };

    double evaluate_candidate(std::size_t index, double value) override;
    void apply(std::size_t index, double value) override;

    /// Delta summed over affected samples; writes caches when `commit`.
    double sweep(const ParamLocation& loc, double dv, bool commit);
    bool propagate(std::size_t n, const ParamLocation& loc, double dv, double& new_row_loss);
    void write_back(std::size_t n, std::size_t first_layer);
    void next_stamp();

    const double* layer_input(std::size_t layer, std::size_t n) const noexcept;
    double post_value(std::size_t layer, std::size_t n, std::size_t i) const noexcept;
    void add_pre(std::size_t layer, std::size_t n, std::size_t i, double delta);
    void finish_layer(std::size_t layer, std::size_t n);

    std::vector<std::size_t> width_;
    std::vector<std::vector<double>> pre_cache_, post_cache_; ///< [layer][n * width + i]
    std::vector<double> row_loss_;
    double loss_sum_ = 0.0;
    std::vector<Overlay> overlay_;
    std::uint32_t stamp_ = 0;
    std::vector<double> logit_scratch_, prob_scratch_;

    // Column-compressed copy of X for first-layer dense weights.
    std::vector<std::size_t> col_start_;
    std::vector<std::uint32_t> col_rows_;
};

std::unique_ptr<CandidateEvaluator> make_evaluator(EvalMode mode, const Network& net,
                                                   const LabeledDataset& data,
                                                   std::vector<double> params, SearchLoss loss);

/// Loss with params[index] = value using the evaluator's caches. Throws
/// InvalidState when `params` is not the vector the caches were built for.
double incremental_eval(CandidateEvaluator& cache, std::span<const double> params,
                        std::size_t index, double value);

} // namespace conntra
