#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "conntra/dataset.hpp"
#include "conntra/discrete.hpp"
#include "conntra/model.hpp"
#include "conntra/pretrain.hpp"
#include "conntra/trainer.hpp"

namespace conntra {

enum class DatasetKind { mnist, iris, synthetic };

std::string_view to_string(DatasetKind kind) noexcept;
DatasetKind parse_dataset_kind(std::string_view text);

/// Everything a benchmark run depends on. Echoed verbatim into reports.
struct ExperimentConfig {
    ModelKind model = ModelKind::logistic_regression;
    DatasetKind dataset = DatasetKind::mnist;
    std::vector<double> omega{-1.0, 0.0, 1.0};
    std::uint64_t seed = 0;

    // Pretraining. Its seed is always `seed`.
    double learning_rate = 0.1;
    std::uint64_t epochs = 50;
    std::size_t batch_size = 100;
    double init_scale = 0.0;
    double rescale_target = 0.0;

    // Coordinate search. Its seed is derived from `seed`.
    std::uint64_t iterations_T = 1;
    SearchLoss search_loss = SearchLoss::cross_entropy;
    EvalMode eval_mode = EvalMode::incremental;
    std::uint64_t record_every = 100;

    // Data selection. Splits and subsets are pinned by their own seeds so
    // that changing `seed` only changes training.
    std::size_t train_subset = 0;      ///< 0 keeps the full training set
    std::size_t validation_subset = 0; ///< 0 keeps the full validation set
    std::uint64_t subset_seed = 0;
    double split_fraction = 0.8;       ///< iris and synthetic only
    std::uint64_t split_seed = 0;
    std::size_t synthetic_n = 600, synthetic_d = 8, synthetic_k = 4;

    std::filesystem::path data_dir;

    PretrainConfig pretrain_config() const;
    ConntraConfig conntra_config() const;
    void validate() const;
};

/// Tuned defaults for a model and dataset pair. Throws InvalidArgument for
/// pairs that do not fit (e.g. cnn on iris).
ExperimentConfig default_experiment(ModelKind model, DatasetKind dataset);

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Overwrites the fields present in `j`. Unknown keys raise InvalidArgument.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);

struct ExperimentData {
    LabeledDataset train;
    LabeledDataset validation;
    std::string source; ///< where the samples came from
};

/// Loads and splits the configured dataset. MNIST is read from
/// data_dir/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]; Iris
/// from data_dir/iris.csv.
ExperimentData load_experiment_data(const ExperimentConfig& cfg);

ModelSpec experiment_model(const ExperimentConfig& cfg, const LabeledDataset& train);

struct ExperimentResult {
    ModelSpec spec;
    PretrainResult pretrain;
    ConntraResult conntra;
    double pretrain_validation_error = 0.0;
};

/// Pretrain (or start from `w_pre` when given) followed by the coordinate search.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                const std::vector<double>* w_pre = nullptr,
                                const RecordCallback& on_record = {});

/// Seed of the coordinate-search stream for a run seed.
std::uint64_t conntra_seed(std::uint64_t seed) noexcept;

} // namespace conntra
