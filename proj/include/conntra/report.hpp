#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <json.hpp>

#include "conntra/discrete.hpp"

namespace conntra {

struct CurvePoint {
    std::uint64_t epoch = 0;
    double training_error_pct = 0.0;
    std::optional<double> validation_error_pct;
    double optimal_loss = 0.0;
};

/// Outcome of a training run (pretraining or CoNNTrA). For CoNNTrA,
/// `optimal_loss` along the curve is non-increasing.
struct TrainReport {
    std::vector<CurvePoint> curve;
    std::vector<double> final_params;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    MemoryAccount memory;
    std::uint64_t total_epochs = 0;
    std::uint64_t loss_evaluations = 0; ///< CoNNTrA phase 3 only
};

/// Memory for both stored representations of `param_count` parameters:
/// 64-bit floats and packed codes of `packed_bits` bits.
nlohmann::json memory_json(std::uint64_t param_count, unsigned packed_bits);

nlohmann::json curve_json(const std::vector<CurvePoint>& curve);

/// Columns: percent_training_complete, training_error_pct, validation_error_pct.
void write_curve_csv(std::ostream& out, const TrainReport& report);

} // namespace conntra
