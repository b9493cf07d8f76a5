#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace conntra {

/// Features plus one-hot labels. Features are stored row-major, one row
/// per sample; `sample_shape` is {d} for vectors or {H, W, C} for images
/// (row layout H-major, then W, then C).
class LabeledDataset {
public:
    LabeledDataset() = default;

    /// Validates shapes, finiteness and label range.
    LabeledDataset(std::string name, std::vector<std::size_t> sample_shape,
                   std::vector<double> features, std::vector<std::uint32_t> classes,
                   std::size_t class_count);

    const std::string& name() const noexcept { return name_; }
    std::size_t size() const noexcept { return classes_.size(); }
    std::size_t feature_dim() const noexcept { return dim_; }
    std::size_t class_count() const noexcept { return class_count_; }
    const std::vector<std::size_t>& sample_shape() const noexcept { return shape_; }

    std::span<const double> features() const noexcept { return features_; }
    std::span<const double> row(std::size_t n) const noexcept {
        return {features_.data() + n * dim_, dim_};
    }
    std::uint32_t label(std::size_t n) const noexcept { return classes_[n]; }
    std::span<const std::uint32_t> labels() const noexcept { return classes_; }

    /// N x k one-hot matrix, row-major.
    std::vector<std::uint8_t> labels_onehot() const;

    LabeledDataset subset(std::span<const std::size_t> indices) const;
    LabeledDataset with_shape(std::vector<std::size_t> sample_shape) const;

private:
    std::string name_;
    std::vector<std::size_t> shape_;
    std::size_t dim_ = 0;
    std::vector<double> features_;
    std::vector<std::uint32_t> classes_;
    std::size_t class_count_ = 0;
};

/// Recovers class indices from an N x k one-hot matrix; rejects rows that
/// do not contain exactly one 1.
std::vector<std::uint32_t> classes_from_onehot(std::span<const std::uint8_t> onehot,
                                               std::size_t class_count);

} // namespace conntra
