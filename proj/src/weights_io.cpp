#include <fstream>

#include "conntra/detail/binary_io.hpp"
#include "conntra/errors.hpp"
#include "conntra/pretrain.hpp"

namespace conntra {

namespace {
constexpr char kWeightsMagic[9] = "CNTRAWTS";
}

void save_weights(const std::filesystem::path& path, std::span<const double> values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(kWeightsMagic, 8);
    detail::write_le<std::uint64_t>(out, values.size());
    for (double v : values) {
        detail::write_le<double>(out, v);
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::vector<double> load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::uint64_t offset = 0;
    detail::expect_magic(in, kWeightsMagic, offset);
    const auto n = detail::read_le<std::uint64_t>(in, offset, "weight count");
    if (n > (std::uint64_t{1} << 32)) {
        throw FormatError("implausible weight count at byte offset 8");
    }
    std::vector<double> values(n);
    for (auto& v : values) {
        v = detail::read_le<double>(in, offset, "weight value");
    }
    return values;
}

} // namespace conntra
