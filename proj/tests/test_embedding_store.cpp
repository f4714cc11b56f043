#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "centaur/embedding_store.hpp"
#include "centaur/error.hpp"
#include "centaur/random.hpp"
#include "test_support.hpp"

using namespace centaur;
using centaur::testing::ids;
using centaur::testing::scratch_dir;

namespace {

EmbeddingStore small_store() {
    EmbeddingStore s(4, "fixture model, layer 3");
    s.add("a", std::vector<float>{1.0f, -2.5f, 0.125f, 3e-8f});
    s.add("b", std::vector<float>{0.0f, 1e30f, -0.0f, 7.0f});
    s.add("c", std::vector<float>{4.0f, 4.0f, 4.0f, 4.0f});
    return s;
}

std::vector<char> bytes_of(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void put_bytes(const std::filesystem::path& p, const std::vector<char>& bytes) {
    std::ofstream(p, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("small store round-trips bit-exactly") {
    const auto dir = scratch_dir("store_small");
    const auto store = small_store();
    write_store(store, dir / "s.cntr");
    const auto back = read_store(dir / "s.cntr");
    CHECK(back == store);
    CHECK(back.provenance() == store.provenance());
    CHECK(std::filesystem::file_size(dir / "s.cntr") == store_file_size(store));
}

TEST_CASE("row validation") {
    EmbeddingStore s(2);
    s.add("x", std::vector<float>{1, 2});
    CHECK_THROWS_AS(s.add("y", std::vector<float>{1, 2, 3}), FormatError);
    CHECK_THROWS_AS(s.add("x", std::vector<float>{1, 2}), FormatError);
    CHECK_THROWS_AS(s.add("z", std::vector<float>{NAN, 2}), FormatError);
    const std::vector<std::string> want{"x", "q", "r"};
    CHECK(s.missing(want) == std::vector<std::string>{"q", "r"});
    try {
        s.matrix(want);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("q") != std::string::npos);
        CHECK(msg.find("r") != std::string::npos);
    }
}

TEST_CASE("wrong magic and corrupted payload are integrity errors") {
    const auto dir = scratch_dir("store_corrupt");
    write_store(small_store(), dir / "s.cntr");
    auto bytes = bytes_of(dir / "s.cntr");

    auto magic = bytes;
    magic[0] = 'X';
    put_bytes(dir / "magic.cntr", magic);
    CHECK_THROWS_AS(read_store(dir / "magic.cntr"), IntegrityError);

    auto flipped = bytes;
    flipped[bytes.size() - 10] ^= 0x01;
    put_bytes(dir / "flip.cntr", flipped);
    CHECK_THROWS_AS(read_store(dir / "flip.cntr"), IntegrityError);

    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    put_bytes(dir / "short.cntr", truncated);
    CHECK_THROWS_AS(read_store(dir / "short.cntr"), IntegrityError);
}

TEST_CASE("file size arithmetic for a 10000 x 8192 store") {
    const std::uint32_t dim = 8192;
    const std::size_t rows = 10000;
    EmbeddingStore store(dim, "size check");
    std::vector<float> row(dim);
    std::uint64_t id_bytes = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::uint32_t d = 0; d < dim; ++d) row[d] = static_cast<float>(r) + static_cast<float>(d) * 1e-4f;
        const std::string id = "trial-" + std::to_string(r);
        id_bytes += 4 + id.size();
        store.add(id, row);
    }
    const std::uint64_t header = 4 + 2 + 4 + 8 + 4 + std::string("size check").size();
    const std::uint64_t expected = header + id_bytes + rows * dim * 4ULL + 4;
    CHECK(store_file_size(store) == expected);

    const auto dir = scratch_dir("store_large");
    write_store(store, dir / "big.cntr");
    CHECK(std::filesystem::file_size(dir / "big.cntr") == expected);
    const auto back = read_store(dir / "big.cntr");
    CHECK(back == store);
    std::filesystem::remove_all(dir);
}

TEST_CASE("two-point dimension standardizes to minus one and one") {
    Eigen::MatrixXd x(2, 1);
    x << 1, 3;
    const auto scaler = fit_scaler(x);
    const auto y = scaler.transform(x);
    CHECK(y(0, 0) == doctest::Approx(-1.0));
    CHECK(y(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("constant dimension is flagged and maps to zero") {
    Eigen::MatrixXd x(3, 2);
    x << 5, 1, 5, 2, 5, 3;
    const auto scaler = fit_scaler(x);
    CHECK(scaler.constant[0]);
    CHECK_FALSE(scaler.constant[1]);
    CHECK(scaler.standard_deviations(0) == 1.0);
    const auto y = scaler.transform(x);
    CHECK(y.col(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("standardized random matrix has zero mean and unit variance") {
    Rng rng(5);
    Eigen::MatrixXd x(500, 16);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = 3.0 * j + (1.0 + j) * rng.normal();
    const auto y = fit_scaler(x).transform(x);
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double mean = y.col(j).mean();
        const double var = (y.col(j).array() - mean).square().mean();
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("scaler fitted on a subset uses only those rows") {
    Eigen::MatrixXd x(4, 1);
    x << 1, 3, 100, -100;
    const std::vector<std::size_t> rows{0, 1};
    const auto scaler = fit_scaler(x, rows);
    CHECK(scaler.means(0) == doctest::Approx(2.0));
    CHECK(scaler.standard_deviations(0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(fit_scaler(x, std::vector<std::size_t>{}), ConfigError);
}

TEST_CASE("gaussian noise synthesis is deterministic") {
    const auto names = ids(50);
    const auto a = synth_embeddings(names, 8, 1, GaussianNoise{});
    const auto b = synth_embeddings(names, 8, 1, GaussianNoise{});
    const auto c = synth_embeddings(names, 8, 2, GaussianNoise{});
    CHECK(a.store == b.store);
    CHECK_FALSE(a.store == c.store);
    CHECK_FALSE(a.true_probabilities.has_value());
}

TEST_CASE("zero weights give probability one half") {
    const auto names = ids(100);
    const auto r = synth_embeddings(names, 8, 4, LinearLatent{std::vector<double>(8, 0.0), 0.0});
    REQUIRE(r.true_probabilities.has_value());
    for (double p : *r.true_probabilities) CHECK(p == 0.5);
}

TEST_CASE("sampled choices match true probabilities within two standard errors") {
    const std::size_t n = 10000;
    const auto names = ids(n);
    std::vector<double> w{0.8, -0.5, 0.3, 0.0, 1.1, -0.7, 0.2, 0.4};
    const auto r = synth_embeddings(names, 8, 3, LinearLatent{w, 0.0});
    const auto& p = *r.true_probabilities;
    Rng rng(17);
    double chosen = 0.0, mean_p = 0.0, var_sum = 0.0;
    for (double pi : p) {
        chosen += rng.uniform() < pi ? 1.0 : 0.0;
        mean_p += pi;
        var_sum += pi * (1.0 - pi);
    }
    const double se = std::sqrt(var_sum) / n;
    CHECK(std::abs(chosen / n - mean_p / n) < 2.0 * se);
}
