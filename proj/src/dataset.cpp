#include "conntra/dataset.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "conntra/errors.hpp"

namespace conntra {

LabeledDataset::LabeledDataset(std::string name, std::vector<std::size_t> sample_shape,
                               std::vector<double> features,
                               std::vector<std::uint32_t> classes, std::size_t class_count)
    : name_(std::move(name)),
      shape_(std::move(sample_shape)),
      features_(std::move(features)),
      classes_(std::move(classes)),
      class_count_(class_count) {
    if (shape_.empty()) {
        throw InvalidArgument("dataset sample shape is empty");
    }
    dim_ = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                           std::multiplies<>());
    if (classes_.empty()) {
        throw InvalidArgument("dataset has no samples");
    }
    if (class_count_ < 2) {
        throw InvalidArgument("dataset needs at least two classes");
    }
    if (features_.size() != classes_.size() * dim_) {
        throw InvalidArgument("feature buffer size does not match N x d");
    }
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (!std::isfinite(features_[i])) {
            throw InvalidArgument("non-finite feature in sample " + std::to_string(i / dim_));
        }
    }
    for (std::size_t n = 0; n < classes_.size(); ++n) {
        if (classes_[n] >= class_count_) {
            throw InvalidArgument("label out of range in sample " + std::to_string(n));
        }
    }
}

std::vector<std::uint8_t> LabeledDataset::labels_onehot() const {
    std::vector<std::uint8_t> out(size() * class_count_, 0);
    for (std::size_t n = 0; n < size(); ++n) {
        out[n * class_count_ + classes_[n]] = 1;
    }
    return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<double> features;
    features.reserve(indices.size() * dim_);
    std::vector<std::uint32_t> classes;
    classes.reserve(indices.size());
    for (std::size_t idx : indices) {
        if (idx >= size()) {
            throw InvalidArgument("subset index out of range");
        }
        const auto r = row(idx);
        features.insert(features.end(), r.begin(), r.end());
        classes.push_back(classes_[idx]);
    }
    return LabeledDataset(name_, shape_, std::move(features), std::move(classes),
                          class_count_);
}

LabeledDataset LabeledDataset::with_shape(std::vector<std::size_t> sample_shape) const {
    return LabeledDataset(name_, std::move(sample_shape), features_, classes_, class_count_);
}

std::vector<std::uint32_t> classes_from_onehot(std::span<const std::uint8_t> onehot,
                                               std::size_t class_count) {
    if (class_count == 0 || onehot.size() % class_count != 0) {
        throw InvalidArgument("one-hot buffer is not N x k");
    }
    const std::size_t n = onehot.size() / class_count;
    std::vector<std::uint32_t> classes(n);
    for (std::size_t i = 0; i < n; ++i) {
        int ones = 0;
        for (std::size_t c = 0; c < class_count; ++c) {
            const auto v = onehot[i * class_count + c];
            if (v == 1) {
                ++ones;
                classes[i] = static_cast<std::uint32_t>(c);
            } else if (v != 0) {
                throw InvalidArgument("one-hot row " + std::to_string(i) + " is not binary");
            }
        }
        if (ones != 1) {
            throw InvalidArgument("one-hot row " + std::to_string(i) +
                                  " does not contain exactly one 1");
        }
    }
    return classes;
}

} // namespace conntra
