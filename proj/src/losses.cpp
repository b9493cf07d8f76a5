#include "conntra/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "conntra/errors.hpp"

namespace conntra {

std::string_view to_string(SearchLoss loss) noexcept {
    return loss == SearchLoss::cross_entropy ? "cross_entropy" : "euclidean";
}

SearchLoss parse_search_loss(std::string_view text) {
    if (text == "xent" || text == "cross_entropy") return SearchLoss::cross_entropy;
    if (text == "euclid" || text == "euclidean") return SearchLoss::euclidean;
    throw InvalidArgument("unknown search loss '" + std::string(text) + "'");
}

namespace {

void check_labels(const Prediction& pred, std::span<const std::uint8_t> onehot) {
    if (onehot.size() != pred.rows * pred.classes) {
        throw InvalidArgument("label matrix shape does not match predictions");
    }
}

// NaN passes through so that a diverged forward pass is never hidden by the floor.
double clamped_nll(double p) noexcept {
    return std::isnan(p) ? p : -std::log(p > kProbabilityFloor ? p : kProbabilityFloor);
}

} // namespace

double cross_entropy(const Prediction& pred, std::span<const std::uint8_t> onehot) {
    check_labels(pred, onehot);
    if (pred.rows == 0) {
        throw InvalidArgument("cross entropy of an empty prediction");
    }
    const auto classes = classes_from_onehot(onehot, pred.classes);
    double sum = 0.0;
    for (std::size_t n = 0; n < pred.rows; ++n) {
        sum += clamped_nll(pred.probabilities[n * pred.classes + classes[n]]);
    }
    return sum / static_cast<double>(pred.rows);
}

double classification_error(const Prediction& pred, std::span<const std::uint32_t> classes) {
    if (pred.rows == 0) {
        throw InvalidArgument("classification error of an empty prediction");
    }
    if (classes.size() != pred.rows) {
        throw InvalidArgument("label count does not match predictions");
    }
    std::size_t wrong = 0;
    for (std::size_t n = 0; n < pred.rows; ++n) {
        if (argmax(pred.row(n)) != classes[n]) {
            ++wrong;
        }
    }
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(pred.rows);
}

double classification_error(const Prediction& pred, std::span<const std::uint8_t> onehot) {
    check_labels(pred, onehot);
    if (pred.rows == 0) {
        throw InvalidArgument("classification error of an empty prediction");
    }
    return classification_error(pred, classes_from_onehot(onehot, pred.classes));
}

double euclidean_error(std::span<const double> pred, std::span<const double> truth,
                       std::size_t n) {
    if (pred.size() != truth.size()) {
        throw InvalidArgument("euclidean error of vectors with different lengths");
    }
    if (n == 0) {
        throw InvalidArgument("euclidean error with N = 0");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        sum += d * d;
    }
    return sum / static_cast<double>(n);
}

double row_loss(std::span<const double> logits, std::uint32_t label, SearchLoss loss,
                std::span<double> probs) noexcept {
    softmax(logits, probs);
    if (loss == SearchLoss::cross_entropy) {
        return clamped_nll(probs[label]);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        const double d = probs[c] - (c == label ? 1.0 : 0.0);
        sum += d * d;
    }
    return sum;
}

double dataset_loss(const Network& net, std::span<const double> params,
                    const LabeledDataset& data, SearchLoss loss) {
    const auto logits = forward_logits(net, params, data);
    const std::size_t k = net.class_count();
    std::vector<double> probs(k);
    double sum = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) {
        sum += row_loss({logits.data() + n * k, k}, data.label(n), loss, probs);
    }
    return sum / static_cast<double>(data.size());
}

} // namespace conntra
