#include <doctest.h>

#include "helpers.hpp"

#include <msc/error.hpp>
#include <msc/tensor_io.hpp>

#include <cstring>
#include <fstream>

using namespace msc;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Byte layout assembled by hand.
std::vector<std::uint8_t> layout(std::uint8_t dtype, const std::vector<std::uint64_t>& dims,
                                 const std::vector<std::uint8_t>& payload) {
    std::vector<std::uint8_t> b{'M', 'S', 'C', 'T', 1, 0, dtype, static_cast<std::uint8_t>(dims.size())};
    for (auto e : dims)
        for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(e >> (8 * i)));
    b.insert(b.end(), payload.begin(), payload.end());
    return b;
}

} // namespace

TEST_SUITE("tensor_io") {

TEST_CASE("scalar f32 zero encodes to the documented layout") {
    TensorRecord r{"s", {1}, std::vector<float>{0.0f}};
    const auto bytes = encode_tensor(r);
    CHECK(bytes.size() == 20);
    CHECK(bytes == layout(0, {1}, {0, 0, 0, 0}));
}

TEST_CASE("payload is little-endian row-major") {
    TensorRecord r{"m", {2, 2}, std::vector<double>{1.0, 2.0, 3.0, -0.5}};
    std::vector<std::uint8_t> payload;
    for (double v : {1.0, 2.0, 3.0, -0.5}) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        for (int i = 0; i < 8; ++i) payload.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
    }
    CHECK(encode_tensor(r) == layout(1, {2, 2}, payload));

    TensorRecord ints{"i", {2}, std::vector<std::int64_t>{-1, 258}};
    const auto b = encode_tensor(ints);
    const std::vector<std::uint8_t> tail(b.end() - 16, b.end());
    CHECK(tail == std::vector<std::uint8_t>{0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 2, 1, 0, 0, 0, 0, 0, 0});
}

TEST_CASE("round trip through a file for every dtype") {
    const auto dir = testutil::tmp_dir("tensor_io_roundtrip");
    const std::vector<TensorRecord> records{
        {"a", {2, 3}, std::vector<float>{1, 2, 3, 4, 5, -6.25f}},
        {"b", {2, 3}, std::vector<double>{0.1, -0.2, 1e300, -1e-300, 0.0, 42.0}},
        {"c", {3, 1, 2}, std::vector<std::int64_t>{INT64_MIN, -1, 0, 1, 7, INT64_MAX}},
    };
    for (const auto& r : records) {
        write_tensor(r, dir / (r.name + ".msct"));
        auto back = read_tensor(dir / (r.name + ".msct"));
        back.name = r.name;
        CHECK(back == r);
    }
}

TEST_CASE("NaN payloads survive bit-exactly") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    TensorRecord r{"n", {1}, std::vector<double>{nan}};
    const auto back = decode_tensor(encode_tensor(r));
    CHECK(std::isnan(std::get<std::vector<double>>(back.data)[0]));
    CHECK(encode_tensor(back) == encode_tensor(r));
}

TEST_CASE("payload size mismatch is rejected") {
    TensorRecord r{"x", {2, 3}, std::vector<double>(5, 1.0)};
    CHECK_THROWS_WITH_AS(encode_tensor(r), doctest::Contains("payload size mismatch"), ValidationError);
    const auto dir = testutil::tmp_dir("tensor_io_mismatch");
    CHECK_THROWS_AS(write_tensor(r, dir / "x.msct"), ValidationError);
}

TEST_CASE("malformed files") {
    const auto dir = testutil::tmp_dir("tensor_io_bad");
    TensorRecord r{"x", {2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6}};
    auto good = encode_tensor(r);

    auto bad = good;
    bad[0] = bad[1] = bad[2] = bad[3] = 'X';
    write_bytes(dir / "magic.msct", bad);
    CHECK_THROWS_WITH_AS(read_tensor(dir / "magic.msct"), doctest::Contains("bad magic"), IoError);

    write_bytes(dir / "trunc.msct", {good.begin(), good.end() - 5});
    CHECK_THROWS_WITH_AS(read_tensor(dir / "trunc.msct"), doctest::Contains("truncated"), IoError);

    write_bytes(dir / "head.msct", {good.begin(), good.begin() + 10});
    CHECK_THROWS_WITH_AS(read_tensor(dir / "head.msct"), doctest::Contains("truncated"), IoError);

    bad = good;
    bad[4] = 2;
    CHECK_THROWS_WITH_AS(decode_tensor(bad), doctest::Contains("version"), IoError);

    bad = good;
    bad[6] = 9;
    CHECK_THROWS_WITH_AS(decode_tensor(bad), doctest::Contains("dtype"), IoError);

    bad = good;
    bad.push_back(0);
    CHECK_THROWS_AS(decode_tensor(bad), IoError);

    CHECK_THROWS_AS(read_tensor(dir / "missing.msct"), IoError);
}

TEST_CASE("record validation") {
    CHECK_THROWS_AS((TensorRecord{"x", {}, std::vector<double>{}}.validate()), ValidationError);
    CHECK_THROWS_AS((TensorRecord{"bad/name", {1}, std::vector<double>{1}}.validate()), ValidationError);
    CHECK(valid_tensor_name("das.basis"));
    CHECK_FALSE(valid_tensor_name(".."));
    CHECK_FALSE(valid_tensor_name("a b"));
    CHECK(dtype_from_name("i64") == DType::i64);
    CHECK_THROWS_AS(dtype_from_name("f16"), ValidationError);
}

TEST_CASE("matrix views") {
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    const auto r = TensorRecord::from_matrix("m", m, DType::f32);
    CHECK(r.dtype() == DType::f32);
    CHECK(r.to_matrix() == m);
    const auto v = TensorRecord::from_vector("v", Eigen::Vector3d(1, 2, 3));
    CHECK(v.dims == std::vector<std::uint64_t>{3});
    CHECK(TensorRecord::from_i64("i", {1, 2, 3, 4}, {2, 2}).to_matrix()(1, 0) == 3.0);
    CHECK_THROWS_AS(v.to_i64(), ValidationError);
}

} // TEST_SUITE
