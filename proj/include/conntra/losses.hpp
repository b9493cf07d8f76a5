#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "conntra/dataset.hpp"
#include "conntra/model.hpp"

namespace conntra {

/// Probabilities below this are clamped before taking the log; discrete
/// weights can drive a class probability to exactly zero.
inline constexpr double kProbabilityFloor = 1e-12;

enum class SearchLoss { cross_entropy, euclidean };

std::string_view to_string(SearchLoss loss) noexcept;
SearchLoss parse_search_loss(std::string_view text);

/// Mean over rows of -log(max(p_true, floor)).
double cross_entropy(const Prediction& pred, std::span<const std::uint8_t> onehot);

/// Percentage of rows whose argmax (lowest index on ties) is not the true class.
double classification_error(const Prediction& pred, std::span<const std::uint8_t> onehot);
double classification_error(const Prediction& pred, std::span<const std::uint32_t> classes);

/// (1/n) * ||pred - truth||^2
double euclidean_error(std::span<const double> pred, std::span<const double> truth, std::size_t n);

/// Loss contribution of one row given its logits. `probs` is scratch of size k.
double row_loss(std::span<const double> logits, std::uint32_t label, SearchLoss loss,
                std::span<double> probs) noexcept;

/// e(g(X, W), Y): full forward pass and mean row loss.
double dataset_loss(const Network& net, std::span<const double> params,
                    const LabeledDataset& data, SearchLoss loss);

} // namespace conntra
