#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace conntra {

/// The finite value set a learning parameter may take. Values are sorted
/// ascending on construction; duplicates, non-finite values and sets with
/// fewer than two members are rejected.
class DiscreteSet {
public:
    explicit DiscreteSet(std::vector<double> values);

    /// {-1, 0, +1}
    static DiscreteSet ternary();

    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t j) const noexcept { return values_[j]; }
    double min() const noexcept { return values_.front(); }
    double max() const noexcept { return values_.back(); }

    /// ceil(log2(size())).
    unsigned bits_per_code() const noexcept { return bits_; }

    /// Position of an exact member, or size() if `value` is not a member.
    std::size_t index_of(double value) const noexcept;
    bool contains(double value) const noexcept { return index_of(value) != size(); }

    friend bool operator==(const DiscreteSet&, const DiscreteSet&) = default;

private:
    std::vector<double> values_;
    unsigned bits_ = 0;
};

/// Snaps every pretrained weight to a member of `omega`: the first value
/// whose upper midpoint is >= the weight, otherwise the largest value.
/// Midpoint ties therefore go to the smaller neighbour.
std::vector<double> discretize(std::span<const double> pretrained, const DiscreteSet& omega);

double discretize_one(double w, const DiscreteSet& omega);

/// Discrete weights stored as bit-packed indices into a DiscreteSet.
///
/// Layout: code i occupies bits [i*b, (i+1)*b) of the byte stream, where
/// bit k of the stream is bit (k % 8) of byte (k / 8), least significant
/// first. When b divides 64 no code straddles a 64-bit word.
class PackedCodes {
public:
    PackedCodes(std::shared_ptr<const DiscreteSet> domain, std::size_t length,
                std::vector<std::uint8_t> bytes);

    std::size_t length() const noexcept { return length_; }
    const DiscreteSet& domain() const noexcept { return *domain_; }
    std::shared_ptr<const DiscreteSet> shared_domain() const noexcept { return domain_; }
    std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }

    /// Raw code at position i (not range-checked against the domain).
    std::uint32_t code(std::size_t i) const noexcept;

    static std::size_t byte_size(std::size_t length, unsigned bits_per_code) noexcept {
        return (length * bits_per_code + 7) / 8;
    }

private:
    std::shared_ptr<const DiscreteSet> domain_;
    std::size_t length_;
    std::vector<std::uint8_t> bytes_;
};

PackedCodes pack(std::span<const double> values, const DiscreteSet& omega);
std::vector<double> unpack(const PackedCodes& codes);

// CNTRAPK1 file format: magic, u32 |omega|, omega as f64, u64 length, bit buffer.
// All integers and floats little-endian.
void write_packed(std::ostream& out, const PackedCodes& codes);
PackedCodes read_packed(std::istream& in);
void save_packed(const std::filesystem::path& path, const PackedCodes& codes);
PackedCodes load_packed(const std::filesystem::path& path);

struct MemoryAccount {
    std::uint64_t param_count = 0;
    unsigned bits_per_param = 0;
    double kilobytes = 0.0; ///< param_count * bits_per_param / 8 / 1000
};

MemoryAccount memory_account(std::int64_t param_count, std::int64_t bits_per_param);

/// Kilobytes rounded to two decimals, the precision used in reports.
double rounded_kilobytes(const MemoryAccount& account);

} // namespace conntra
