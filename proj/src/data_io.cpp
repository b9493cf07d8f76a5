#include "conntra/data_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "conntra/errors.hpp"
#include "conntra/rng.hpp"

namespace conntra {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

bool is_gzip_path(const std::filesystem::path& p) { return p.extension() == ".gz"; }

/// Whole file contents; gzopen also reads uncompressed files as-is.
std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw IoError("cannot open " + path.string());
    }
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) {
        throw IoError("cannot open " + path.string());
    }
    std::vector<std::uint8_t> data;
    std::uint8_t buf[1 << 16];
    for (;;) {
        const int got = gzread(f, buf, sizeof buf);
        if (got < 0) {
            int code = 0;
            const std::string msg = gzerror(f, &code);
            gzclose(f);
            throw FormatError("corrupt compressed stream in " + path.string() + ": " + msg +
                              " (after decompressed byte offset " + std::to_string(data.size()) + ")");
        }
        if (got == 0) break;
        data.insert(data.end(), buf, buf + got);
    }
    gzclose(f);
    return data;
}

void write_all(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    gzFile f = gzopen(path.string().c_str(), is_gzip_path(path) ? "wb9" : "wbT");
    if (!f) {
        throw IoError("cannot write " + path.string());
    }
    const int put = bytes.empty() ? 0 : gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    const int closed = gzclose(f);
    if (put != static_cast<int>(bytes.size()) || closed != Z_OK) {
        throw IoError("failed writing " + path.string());
    }
}

class BigEndianReader {
public:
    BigEndianReader(const std::vector<std::uint8_t>& data, std::string name)
        : data_(data), name_(std::move(name)) {}

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
        pos_ += 4;
        return v;
    }

    std::span<const std::uint8_t> bytes(std::size_t count, const char* what) {
        need(count, what);
        std::span<const std::uint8_t> out(data_.data() + pos_, count);
        pos_ += count;
        return out;
    }

    std::size_t offset() const noexcept { return pos_; }

private:
    void need(std::size_t count, const char* what) const {
        if (data_.size() - pos_ < count) {
            throw FormatError(name_ + ": truncated " + what + " at byte offset " +
                              std::to_string(data_.size()));
        }
    }

    const std::vector<std::uint8_t>& data_;
    std::string name_;
    std::size_t pos_ = 0;
};

void push_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    std::size_t used = 0;
    try {
        out = std::stod(text, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == text.size() && std::isfinite(out);
}

/// Per-class row indices in ascending order.
std::vector<std::vector<std::size_t>> rows_by_class(const LabeledDataset& data) {
    std::vector<std::vector<std::size_t>> rows(data.class_count());
    for (std::size_t n = 0; n < data.size(); ++n) rows[data.label(n)].push_back(n);
    return rows;
}

/// Splits `total` over groups proportionally to `sizes` by largest remainder.
/// Ties in the remainder go to the lower group index.
std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& sizes, std::size_t total) {
    const double grand = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
    std::vector<std::size_t> alloc(sizes.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t used = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        const double quota = grand > 0 ? static_cast<double>(total) * static_cast<double>(sizes[c]) / grand : 0.0;
        alloc[c] = std::min(sizes[c], static_cast<std::size_t>(std::floor(quota)));
        used += alloc[c];
        rem.emplace_back(quota - std::floor(quota), c);
    }
    std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; used < total; r = (r + 1) % rem.size()) {
        const std::size_t c = rem[r].second;
        if (alloc[c] < sizes[c]) {
            ++alloc[c];
            ++used;
        }
    }
    return alloc;
}

/// Draws alloc[c] rows from each class; returns (chosen, rest), both sorted.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
draw_per_class(std::vector<std::vector<std::size_t>> groups, const std::vector<std::size_t>& alloc,
               std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<std::size_t> chosen, rest;
    for (std::size_t c = 0; c < groups.size(); ++c) {
        rng.shuffle(std::span<std::size_t>(groups[c]));
        chosen.insert(chosen.end(), groups[c].begin(), groups[c].begin() + alloc[c]);
        rest.insert(rest.end(), groups[c].begin() + alloc[c], groups[c].end());
    }
    std::sort(chosen.begin(), chosen.end());
    std::sort(rest.begin(), rest.end());
    return {std::move(chosen), std::move(rest)};
}

} // namespace

LabeledDataset load_mnist_idx(const std::filesystem::path& images,
                              const std::filesystem::path& labels, ImageLayout layout) {
    const auto img_bytes = read_all(images);
    const auto lbl_bytes = read_all(labels);

    BigEndianReader img(img_bytes, images.filename().string());
    const std::uint32_t img_magic = img.u32("magic");
    if (img_magic != kImageMagic) {
        throw FormatError(images.filename().string() + ": bad image magic at byte offset 0");
    }
    const std::size_t count = img.u32("image count");
    const std::size_t rows = img.u32("row count");
    const std::size_t cols = img.u32("column count");
    if (rows == 0 || cols == 0) {
        throw FormatError(images.filename().string() + ": zero image size at byte offset 8");
    }
    const auto pixels = img.bytes(count * rows * cols, "pixel data");

    BigEndianReader lbl(lbl_bytes, labels.filename().string());
    if (lbl.u32("magic") != kLabelMagic) {
        throw FormatError(labels.filename().string() + ": bad label magic at byte offset 0");
    }
    const std::size_t label_count = lbl.u32("label count");
    if (label_count != count) {
        throw FormatError(labels.filename().string() + ": label count " + std::to_string(label_count) +
                          " does not match image count " + std::to_string(count) +
                          " at byte offset 4");
    }
    const auto raw_labels = lbl.bytes(count, "label data");

    std::vector<double> features(pixels.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) features[i] = pixels[i] / 255.0;
    std::vector<std::uint32_t> classes(count);
    for (std::size_t n = 0; n < count; ++n) {
        if (raw_labels[n] > 9) {
            throw FormatError(labels.filename().string() + ": label " + std::to_string(raw_labels[n]) +
                              " out of range at byte offset " + std::to_string(8 + n));
        }
        classes[n] = raw_labels[n];
    }
    std::vector<std::size_t> shape = layout == ImageLayout::flat
                                         ? std::vector<std::size_t>{rows * cols}
                                         : std::vector<std::size_t>{rows, cols, 1};
    return LabeledDataset("mnist", std::move(shape), std::move(features), std::move(classes), 10);
}

void write_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                     std::size_t rows, std::size_t cols, std::span<const std::uint8_t> pixels,
                     std::span<const std::uint8_t> classes) {
    if (rows == 0 || cols == 0 || pixels.size() != classes.size() * rows * cols) {
        throw InvalidArgument("pixel buffer does not match image count and size");
    }
    std::vector<std::uint8_t> img;
    push_u32(img, kImageMagic);
    push_u32(img, static_cast<std::uint32_t>(classes.size()));
    push_u32(img, static_cast<std::uint32_t>(rows));
    push_u32(img, static_cast<std::uint32_t>(cols));
    img.insert(img.end(), pixels.begin(), pixels.end());
    write_all(images, img);

    std::vector<std::uint8_t> lbl;
    push_u32(lbl, kLabelMagic);
    push_u32(lbl, static_cast<std::uint32_t>(classes.size()));
    lbl.insert(lbl.end(), classes.begin(), classes.end());
    write_all(labels, lbl);
}

LabeledDataset load_iris_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    constexpr std::size_t d = 4;
    std::vector<double> features;
    std::vector<std::uint32_t> classes;
    std::map<std::string, std::uint32_t> species;
    std::vector<std::string> species_order;

    std::string line;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (trim(line).empty()) continue;
        auto fields = split_csv(line);
        for (auto& f : fields) f = trim(f);
        if (fields.size() != d + 1) {
            throw FormatError(path.filename().string() + ": line " + std::to_string(line_no) +
                              ": expected 5 fields, got " + std::to_string(fields.size()));
        }
        double values[d];
        bool numeric = true;
        for (std::size_t j = 0; j < d; ++j) numeric = numeric && parse_double(fields[j], values[j]);
        if (!numeric) {
            // A header row has no numeric field at all.
            bool any_numeric = false;
            for (std::size_t j = 0; j < d; ++j) {
                double tmp;
                any_numeric = any_numeric || parse_double(fields[j], tmp);
            }
            if (!any_numeric) continue;
            throw FormatError(path.filename().string() + ": line " + std::to_string(line_no) +
                              ": non-numeric feature");
        }
        if (fields[d].empty()) {
            throw FormatError(path.filename().string() + ": line " + std::to_string(line_no) +
                              ": missing species");
        }
        auto [it, inserted] = species.try_emplace(fields[d], static_cast<std::uint32_t>(species.size()));
        if (inserted) species_order.push_back(fields[d]);
        features.insert(features.end(), values, values + d);
        classes.push_back(it->second);
    }
    if (classes.empty()) {
        throw FormatError(path.filename().string() + ": no data rows");
    }
    if (species.size() < 2) {
        throw FormatError(path.filename().string() + ": fewer than two species");
    }

    const std::size_t N = classes.size();
    for (std::size_t j = 0; j < d; ++j) {
        double lo = features[j], hi = features[j];
        for (std::size_t n = 0; n < N; ++n) {
            lo = std::min(lo, features[n * d + j]);
            hi = std::max(hi, features[n * d + j]);
        }
        const double span = hi - lo;
        for (std::size_t n = 0; n < N; ++n) {
            double& v = features[n * d + j];
            v = span > 0 ? (v - lo) / span : 0.0;
        }
    }
    return LabeledDataset("iris", {d}, std::move(features), std::move(classes), species.size());
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw InvalidArgument("train fraction must lie in (0, 1)");
    }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(const LabeledDataset& data, const SplitSpec& spec) {
    spec.validate();
    const std::size_t N = data.size();
    if (N < 2) {
        throw InvalidArgument("cannot split fewer than two samples");
    }
    const auto target = static_cast<std::size_t>(
        std::clamp<double>(std::round(spec.train_fraction * static_cast<double>(N)), 1.0,
                           static_cast<double>(N - 1)));
    if (!spec.stratified) {
        std::vector<std::vector<std::size_t>> all(1, std::vector<std::size_t>(N));
        std::iota(all[0].begin(), all[0].end(), std::size_t{0});
        return draw_per_class(std::move(all), {target}, spec.seed);
    }
    auto groups = rows_by_class(data);
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) sizes.push_back(g.size());
    return draw_per_class(std::move(groups), largest_remainder(sizes, target), spec.seed);
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, const SplitSpec& spec) {
    const auto [train, val] = split_indices(data, spec);
    return {data.subset(train), data.subset(val)};
}

LabeledDataset stratified_subset(const LabeledDataset& data, std::size_t count, std::uint64_t seed) {
    if (count == 0 || count > data.size()) {
        throw InvalidArgument("subset size must lie in [1, " + std::to_string(data.size()) + "]");
    }
    auto groups = rows_by_class(data);
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) sizes.push_back(g.size());
    const auto alloc = largest_remainder(sizes, count);
    return data.subset(draw_per_class(std::move(groups), alloc, seed).first);
}

LabeledDataset synthetic_blobs(std::size_t n, std::size_t d, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        throw InvalidArgument("synthetic blobs need at least two classes");
    }
    if (d == 0 || k > 2 * d) {
        throw InvalidArgument("synthetic blobs need 2 <= k <= 2d");
    }
    if (n < k) {
        throw InvalidArgument("synthetic blobs need at least one sample per class");
    }
    constexpr double kSeparation = 8.0;
    constexpr double kTruncate = 2.0;
    SplitMix64 rng(seed);
    std::vector<double> features(n * d);
    std::vector<std::uint32_t> classes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::uint32_t>(i % k);
        classes[i] = c;
        for (std::size_t j = 0; j < d; ++j) {
            double z = rng.normal();
            while (std::abs(z) > kTruncate) z = rng.normal();
            features[i * d + j] = z;
        }
        const std::size_t axis = c / 2;
        features[i * d + axis] += (c % 2 == 0) ? kSeparation : -kSeparation;
    }
    return LabeledDataset("synthetic", {d}, std::move(features), std::move(classes), k);
}

} // namespace conntra
