#include "conntra/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "conntra/detail/binary_io.hpp"
#include "conntra/errors.hpp"

namespace conntra {

namespace {

constexpr char kPackedMagic[9] = "CNTRAPK1";

unsigned ceil_log2(std::size_t n) {
    unsigned bits = 0;
    while ((std::size_t{1} << bits) < n) {
        ++bits;
    }
    return bits;
}

} // namespace

DiscreteSet::DiscreteSet(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw InvalidArgument("discrete set is empty");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("discrete set contains a non-finite value");
        }
    }
    std::sort(values_.begin(), values_.end());
    if (std::adjacent_find(values_.begin(), values_.end()) != values_.end()) {
        throw InvalidArgument("discrete set contains duplicate values");
    }
    if (values_.size() < 2) {
        throw InvalidArgument("discrete set needs at least two values");
    }
    bits_ = ceil_log2(values_.size());
}

DiscreteSet DiscreteSet::ternary() { return DiscreteSet({-1.0, 0.0, 1.0}); }

std::size_t DiscreteSet::index_of(double value) const noexcept {
    const auto it = std::lower_bound(values_.begin(), values_.end(), value);
    if (it != values_.end() && *it == value) {
        return static_cast<std::size_t>(it - values_.begin());
    }
    return values_.size();
}

double discretize_one(double w, const DiscreteSet& omega) {
    if (!std::isfinite(w)) {
        throw DomainError("cannot discretize a non-finite weight");
    }
    const std::size_t last = omega.size() - 1;
    for (std::size_t j = 0; j < last; ++j) {
        if (w <= 0.5 * (omega[j] + omega[j + 1])) {
            return omega[j];
        }
    }
    return omega[last];
}

std::vector<double> discretize(std::span<const double> pretrained, const DiscreteSet& omega) {
    std::vector<double> out(pretrained.size());
    for (std::size_t i = 0; i < pretrained.size(); ++i) {
        out[i] = discretize_one(pretrained[i], omega);
    }
    return out;
}

PackedCodes::PackedCodes(std::shared_ptr<const DiscreteSet> domain, std::size_t length,
                         std::vector<std::uint8_t> bytes)
    : domain_(std::move(domain)), length_(length), bytes_(std::move(bytes)) {
    if (!domain_) {
        throw InvalidArgument("packed codes need a domain");
    }
    if (bytes_.size() != byte_size(length_, domain_->bits_per_code())) {
        throw FormatError("packed buffer holds " + std::to_string(bytes_.size()) +
                          " bytes, expected " +
                          std::to_string(byte_size(length_, domain_->bits_per_code())));
    }
}

std::uint32_t PackedCodes::code(std::size_t i) const noexcept {
    const unsigned bits = domain_->bits_per_code();
    std::uint32_t value = 0;
    std::size_t bit = i * bits;
    for (unsigned k = 0; k < bits; ++k, ++bit) {
        value |= static_cast<std::uint32_t>((bytes_[bit / 8] >> (bit % 8)) & 1u) << k;
    }
    return value;
}

PackedCodes pack(std::span<const double> values, const DiscreteSet& omega) {
    const unsigned bits = omega.bits_per_code();
    std::vector<std::uint8_t> bytes(PackedCodes::byte_size(values.size(), bits), 0);
    std::size_t bit = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t code = omega.index_of(values[i]);
        if (code == omega.size()) {
            throw DomainError("value at index " + std::to_string(i) +
                              " is not a member of the discrete set");
        }
        for (unsigned k = 0; k < bits; ++k, ++bit) {
            if ((code >> k) & 1u) {
                bytes[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
            }
        }
    }
    return PackedCodes(std::make_shared<const DiscreteSet>(omega), values.size(),
                       std::move(bytes));
}

std::vector<double> unpack(const PackedCodes& codes) {
    const DiscreteSet& omega = codes.domain();
    std::vector<double> out(codes.length());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint32_t c = codes.code(i);
        if (c >= omega.size()) {
            throw FormatError("corrupt code " + std::to_string(c) + " at index " +
                              std::to_string(i));
        }
        out[i] = omega[c];
    }
    return out;
}

void write_packed(std::ostream& out, const PackedCodes& codes) {
    out.write(kPackedMagic, 8);
    const DiscreteSet& omega = codes.domain();
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(omega.size()));
    for (double v : omega.values()) {
        detail::write_le<double>(out, v);
    }
    detail::write_le<std::uint64_t>(out, codes.length());
    out.write(reinterpret_cast<const char*>(codes.bytes().data()),
              static_cast<std::streamsize>(codes.bytes().size()));
}

PackedCodes read_packed(std::istream& in) {
    std::uint64_t offset = 0;
    detail::expect_magic(in, kPackedMagic, offset);
    const auto count = detail::read_le<std::uint32_t>(in, offset, "omega size");
    if (count < 2 || count > (1u << 16)) {
        throw FormatError("implausible omega size " + std::to_string(count) +
                          " at byte offset 8");
    }
    std::vector<double> omega(count);
    for (auto& v : omega) {
        v = detail::read_le<double>(in, offset, "omega value");
    }
    auto domain = std::make_shared<const DiscreteSet>(std::move(omega));
    const auto length = detail::read_le<std::uint64_t>(in, offset, "weight count");
    const std::size_t nbytes = PackedCodes::byte_size(length, domain->bits_per_code());
    std::vector<std::uint8_t> bytes(nbytes);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(nbytes));
    if (static_cast<std::size_t>(in.gcount()) != nbytes) {
        throw FormatError("truncated code buffer at byte offset " +
                          std::to_string(offset + static_cast<std::uint64_t>(in.gcount())));
    }
    PackedCodes codes(std::move(domain), length, std::move(bytes));
    for (std::size_t i = 0; i < codes.length(); ++i) {
        if (codes.code(i) >= codes.domain().size()) {
            throw FormatError("corrupt code at index " + std::to_string(i));
        }
    }
    return codes;
}

void save_packed(const std::filesystem::path& path, const PackedCodes& codes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    write_packed(out, codes);
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

PackedCodes load_packed(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_packed(in);
}

MemoryAccount memory_account(std::int64_t param_count, std::int64_t bits_per_param) {
    if (param_count <= 0 || bits_per_param <= 0) {
        throw InvalidArgument("memory_account needs positive parameter count and bit width");
    }
    MemoryAccount m;
    m.param_count = static_cast<std::uint64_t>(param_count);
    m.bits_per_param = static_cast<unsigned>(bits_per_param);
    // Integer numerator keeps the 64-bit / 2-bit ratio exact.
    m.kilobytes = static_cast<double>(m.param_count * m.bits_per_param) / 8000.0;
    return m;
}

double rounded_kilobytes(const MemoryAccount& account) {
    return std::round(account.kilobytes * 100.0) / 100.0;
}

} // namespace conntra
