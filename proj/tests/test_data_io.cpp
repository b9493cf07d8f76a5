#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "conntra/data_io.hpp"
#include "conntra/errors.hpp"

using namespace conntra;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const char* name) {
    const auto dir = fs::temp_directory_path() / "conntra_data_io_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string error_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

const fs::path kIris = fs::path(CONNTRA_TEST_DATA_DIR) / "iris.csv";

} // namespace

TEST_SUITE("data_io") {

TEST_CASE("hand-built IDX pair") {
    const auto dir = scratch_dir("idx");
    // Two 2x3 images.
    std::vector<std::uint8_t> images{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 3};
    for (std::uint8_t v : {0, 51, 102, 153, 204, 255, 255, 0, 0, 0, 0, 17}) images.push_back(v);
    const std::vector<std::uint8_t> labels{0, 0, 8, 1, 0, 0, 0, 2, 7, 3};
    write_bytes(dir / "img", images);
    write_bytes(dir / "lbl", labels);

    const auto data = load_mnist_idx(dir / "img", dir / "lbl");
    REQUIRE(data.size() == 2);
    CHECK(data.feature_dim() == 6);
    CHECK(data.sample_shape() == std::vector<std::size_t>{6});
    CHECK(data.label(0) == 7);
    CHECK(data.label(1) == 3);
    CHECK(data.row(0)[1] == 0.2);
    CHECK(data.row(0)[5] == 1.0);
    CHECK(data.row(1)[5] == 17.0 / 255.0);
    const auto img = load_mnist_idx(dir / "img", dir / "lbl", ImageLayout::image);
    CHECK(img.sample_shape() == std::vector<std::size_t>{2, 3, 1});

    // Truncated pixel data names the end-of-data offset.
    images.resize(images.size() - 1);
    write_bytes(dir / "short", images);
    const auto msg = error_of([&] { load_mnist_idx(dir / "short", dir / "lbl"); });
    CHECK(msg.find("byte offset 27") != std::string::npos);
    CHECK_THROWS_AS(load_mnist_idx(dir / "short", dir / "lbl"), FormatError);

    images[3] = 1;
    write_bytes(dir / "magic", images);
    CHECK(error_of([&] { load_mnist_idx(dir / "magic", dir / "lbl"); }).find("byte offset 0") !=
          std::string::npos);

    auto bad_label = labels;
    bad_label[8] = 10;
    write_bytes(dir / "lbl10", bad_label);
    CHECK_THROWS_AS(load_mnist_idx(dir / "img", dir / "lbl10"), FormatError);
    CHECK_THROWS_AS(load_mnist_idx(dir / "missing", dir / "lbl"), IoError);
}

TEST_CASE("IDX writer round-trips through gzip") {
    const auto dir = scratch_dir("gz");
    std::vector<std::uint8_t> pixels(5 * 4 * 4);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<std::uint8_t>(i * 3);
    const std::vector<std::uint8_t> classes{1, 2, 3, 4, 9};
    write_mnist_idx(dir / "i.gz", dir / "l.gz", 4, 4, pixels, classes);
    write_mnist_idx(dir / "i", dir / "l", 4, 4, pixels, classes);
    const auto a = load_mnist_idx(dir / "i.gz", dir / "l.gz");
    const auto b = load_mnist_idx(dir / "i", dir / "l");
    CHECK(fs::file_size(dir / "i") == 16 + pixels.size());
    REQUIRE(a.size() == 5);
    CHECK(std::equal(a.features().begin(), a.features().end(), b.features().begin()));
    for (std::size_t n = 0; n < 5; ++n) CHECK(a.label(n) == classes[n]);
    CHECK(a.row(4)[15] == static_cast<double>(pixels[79]) / 255.0);
}

TEST_CASE("iris file") {
    const auto data = load_iris_csv(kIris);
    CHECK(data.size() == 150);
    CHECK(data.feature_dim() == 4);
    CHECK(data.class_count() == 3);
    for (std::size_t f = 0; f < 4; ++f) {
        double lo = 1.0, hi = 0.0;
        for (std::size_t n = 0; n < data.size(); ++n) {
            lo = std::min(lo, data.row(n)[f]);
            hi = std::max(hi, data.row(n)[f]);
        }
        CHECK(lo == 0.0);
        CHECK(hi == 1.0);
    }
    std::map<std::uint32_t, int> counts;
    for (auto c : data.labels()) ++counts[c];
    CHECK(counts == std::map<std::uint32_t, int>{{0, 50}, {1, 50}, {2, 50}});
}

TEST_CASE("iris parsing edge cases") {
    const auto dir = scratch_dir("iris");
    write_text(dir / "dup.csv",
               "a,b,c,d,species\n1,2,3,4,x\n\na,b,c,d,species\n3,2,1,0,y\n2,2,2,2,x\n");
    const auto d = load_iris_csv(dir / "dup.csv");
    CHECK(d.size() == 3);
    CHECK(d.label(1) == 1);
    CHECK(d.row(0)[0] == 0.0);
    CHECK(d.row(1)[0] == 1.0);
    CHECK(d.row(2)[0] == 0.5);
    CHECK(d.row(2)[1] == 0.0); // constant column maps to 0

    write_text(dir / "bad.csv", "a,b,c,d,s\n1,2,3,4,x\n1,2,zz,4,y\n");
    const auto msg = error_of([&] { load_iris_csv(dir / "bad.csv"); });
    CHECK(msg.find("line 3") != std::string::npos);
    write_text(dir / "short.csv", "1,2,3,4,x\n1,2,3,y\n");
    CHECK(error_of([&] { load_iris_csv(dir / "short.csv"); }).find("line 2") != std::string::npos);
    write_text(dir / "one.csv", "1,2,3,4,x\n2,2,3,4,x\n");
    CHECK_THROWS_AS(load_iris_csv(dir / "one.csv"), FormatError);
}

TEST_CASE("stratified split") {
    const auto data = load_iris_csv(kIris);
    const auto [train, val] = split(data, SplitSpec{});
    CHECK(train.size() == 120);
    CHECK(val.size() == 30);
    std::map<std::uint32_t, int> counts;
    for (auto c : val.labels()) ++counts[c];
    for (auto [c, n] : counts) CHECK(n == 10);

    const auto a = split_indices(data, SplitSpec{0.8, 5, true});
    const auto b = split_indices(data, SplitSpec{0.8, 5, true});
    CHECK(a == b);
    CHECK(a != split_indices(data, SplitSpec{0.8, 6, true}));
}

TEST_CASE("split partitions the rows for any seed") {
    // Uneven classes: 7, 5 and 1 samples.
    std::vector<std::uint32_t> y;
    for (int i = 0; i < 7; ++i) y.push_back(0);
    for (int i = 0; i < 5; ++i) y.push_back(1);
    y.push_back(2);
    const LabeledDataset data("uneven", {1}, std::vector<double>(y.size(), 0.0), y, 3);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        for (bool strat : {true, false}) {
            const auto [tr, va] = split_indices(data, SplitSpec{0.7, seed, strat});
            CHECK(tr.size() == 9);
            CHECK(va.size() == 4);
            CHECK(std::is_sorted(tr.begin(), tr.end()));
            std::set<std::size_t> all(tr.begin(), tr.end());
            all.insert(va.begin(), va.end());
            CHECK(all.size() == data.size());
            if (strat) {
                std::map<std::uint32_t, int> per;
                for (auto i : tr) ++per[y[i]];
                CHECK(std::abs(per[0] - 0.7 * 7) <= 1.0);
                CHECK(std::abs(per[1] - 0.7 * 5) <= 1.0);
            }
        }
    }
}

TEST_CASE("split boundaries") {
    const LabeledDataset two("two", {1}, {0.0, 1.0}, {0, 1}, 2);
    const auto [tr, va] = split_indices(two, SplitSpec{0.99, 0, true});
    CHECK(tr.size() == 1);
    CHECK(va.size() == 1);
    const LabeledDataset one("one", {1}, {0.0}, {0}, 2);
    CHECK_THROWS_AS(split_indices(one, SplitSpec{}), InvalidArgument);
    CHECK_THROWS_AS((SplitSpec{1.0, 0, true}.validate()), InvalidArgument);
    CHECK_THROWS_AS((SplitSpec{0.0, 0, true}.validate()), InvalidArgument);
}

TEST_CASE("stratified subset") {
    const auto data = load_iris_csv(kIris);
    const auto sub = stratified_subset(data, 30, 1);
    CHECK(sub.size() == 30);
    std::map<std::uint32_t, int> counts;
    for (auto c : sub.labels()) ++counts[c];
    for (auto [c, n] : counts) CHECK(n == 10);
    CHECK_THROWS_AS(stratified_subset(data, 0, 1), InvalidArgument);
    CHECK_THROWS_AS(stratified_subset(data, 151, 1), InvalidArgument);
}

TEST_CASE("synthetic blobs") {
    const auto a = synthetic_blobs(40, 3, 5, 7);
    const auto b = synthetic_blobs(40, 3, 5, 7);
    CHECK(std::equal(a.features().begin(), a.features().end(), b.features().begin()));
    CHECK(a.label(7) == 2);
    CHECK_THROWS_AS(synthetic_blobs(40, 3, 1, 7), InvalidArgument);
    CHECK_THROWS_AS(synthetic_blobs(40, 2, 5, 7), InvalidArgument);
    CHECK_THROWS_AS(synthetic_blobs(3, 3, 4, 7), InvalidArgument);
}

} // TEST_SUITE
