#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "conntra/dataset.hpp"

namespace conntra {

enum class ImageLayout {
    flat,  ///< sample_shape {H*W}
    image, ///< sample_shape {H, W, 1}
};

/// Reads an IDX image/label pair (big-endian, magic 0x803 / 0x801). Files
/// ending in .gz are decompressed transparently. Pixels are scaled by 1/255.
LabeledDataset load_mnist_idx(const std::filesystem::path& images,
                              const std::filesystem::path& labels,
                              ImageLayout layout = ImageLayout::flat);

/// Writes an IDX pair; a .gz suffix selects gzip compression.
void write_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                     std::size_t rows, std::size_t cols, std::span<const std::uint8_t> pixels,
                     std::span<const std::uint8_t> classes);

/// Four numeric columns and a species name. Header lines (repeated or not)
/// and blank lines are skipped; species indices follow first appearance.
/// Each feature column is min-max scaled to [0, 1].
LabeledDataset load_iris_csv(const std::filesystem::path& path);

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool stratified = true;

    void validate() const;
};

/// Row indices of the training and validation parts, each sorted ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(const LabeledDataset& data, const SplitSpec& spec);

/// Training part gets round(f * N) rows, clamped to [1, N-1]. A stratified
/// split allocates per class by largest remainder.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, const SplitSpec& spec);

/// `count` rows drawn with per-class proportions preserved.
LabeledDataset stratified_subset(const LabeledDataset& data, std::size_t count,
                                 std::uint64_t seed);

/// k clusters in d dimensions centred at +-8 e_axis with unit noise
/// truncated to |z| <= 2, so clusters stay linearly separable. Needs
/// 2 <= k <= 2d.
LabeledDataset synthetic_blobs(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed);

} // namespace conntra
