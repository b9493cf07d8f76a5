#include "conntra/report.hpp"

#include <cstdio>
#include <ostream>

namespace conntra {

nlohmann::json memory_json(std::uint64_t param_count, unsigned packed_bits) {
    const auto wide = memory_account(static_cast<std::int64_t>(param_count), 64);
    const auto packed = memory_account(static_cast<std::int64_t>(param_count), packed_bits);
    return {
        {"param_count", param_count},
        {"float64", {{"bits_per_param", 64}, {"kilobytes", wide.kilobytes},
                     {"kilobytes_rounded", rounded_kilobytes(wide)}}},
        {"packed", {{"bits_per_param", packed_bits}, {"kilobytes", packed.kilobytes},
                    {"kilobytes_rounded", rounded_kilobytes(packed)}}},
        {"ratio", wide.kilobytes / packed.kilobytes},
    };
}

nlohmann::json curve_json(const std::vector<CurvePoint>& curve) {
    auto arr = nlohmann::json::array();
    for (const auto& p : curve) {
        arr.push_back({
            {"epoch", p.epoch},
            {"training_error_pct", p.training_error_pct},
            {"validation_error_pct",
             p.validation_error_pct ? nlohmann::json(*p.validation_error_pct) : nlohmann::json()},
            {"optimal_loss", p.optimal_loss},
        });
    }
    return arr;
}

void write_curve_csv(std::ostream& out, const TrainReport& report) {
    out << "percent_training_complete,training_error_pct,validation_error_pct\n";
    const double total = report.total_epochs ? static_cast<double>(report.total_epochs) : 1.0;
    char buf[128];
    for (const auto& p : report.curve) {
        const double pct = 100.0 * static_cast<double>(p.epoch) / total;
        if (p.validation_error_pct) {
            std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f\n", pct, p.training_error_pct,
                          *p.validation_error_pct);
        } else {
            std::snprintf(buf, sizeof buf, "%.4f,%.4f,\n", pct, p.training_error_pct);
        }
        out << buf;
    }
}

} // namespace conntra
