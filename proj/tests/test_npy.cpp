#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "kmeval/errors.hpp"
#include "kmeval/npy.hpp"
#include "oracles.hpp"

using namespace kmeval;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

}  // namespace

TEST(NpyHeader, MatchesNumpyLayout) {
    const std::vector<std::size_t> shape{4, 3};
    const std::string h = npy::make_header(npy::ElementType::float32, shape);
    EXPECT_EQ(h.size() % 64, 0u);
    EXPECT_EQ(h.substr(0, 8), std::string("\x93NUMPY\x01\x00", 8));
    EXPECT_EQ(h.back(), '\n');
    EXPECT_NE(h.find("{'descr': '<f4', 'fortran_order': False, 'shape': (4, 3), }"), std::string::npos);

    const std::vector<std::size_t> vec{5};
    EXPECT_NE(npy::make_header(npy::ElementType::int64, vec).find("'shape': (5,)"), std::string::npos);
}

TEST(NpyHeader, ParsesNumpyVariants) {
    auto h = npy::parse_header_dict("{'descr': '<f8', 'fortran_order': False, 'shape': (10, 2), }");
    EXPECT_EQ(h.type, npy::ElementType::float64);
    EXPECT_EQ(h.shape, (std::vector<std::size_t>{10, 2}));
    h = npy::parse_header_dict("{'shape': (7,), 'fortran_order': False, 'descr': '<i8'}");
    EXPECT_EQ(h.shape, (std::vector<std::size_t>{7}));
    h = npy::parse_header_dict("{'descr': '<i4', 'fortran_order': False, 'shape': (), }");
    EXPECT_TRUE(h.shape.empty());
    EXPECT_EQ(h.element_count(), 1u);
}

TEST(NpyHeader, RejectsUnsupported) {
    EXPECT_THROW(npy::parse_header_dict("{'descr': '>f8', 'fortran_order': False, 'shape': (1,), }"), InputError);
    EXPECT_THROW(npy::parse_header_dict("{'descr': '<c16', 'fortran_order': False, 'shape': (1,), }"), InputError);
    EXPECT_THROW(npy::parse_header_dict("{'descr': '<f8', 'fortran_order': True, 'shape': (1,), }"), InputError);
    EXPECT_THROW(npy::parse_header_dict("{'descr': '<f8', 'shape': (1,), }"), InputError);
    EXPECT_THROW(npy::parse_header_dict("{'descr': '<f8', 'fortran_order': False, 'shape': (1,), 'x': 1}"),
                 InputError);
    EXPECT_THROW(npy::parse_header_dict("{'descr': '<f8', 'fortran_order': False, 'shape': (-1,), }"), InputError);
}

TEST(NpyFile, RoundTripIsBitExact) {
    const auto dir = oracle::temp_dir("npy_rt");
    std::mt19937_64 gen(3);
    std::vector<double> d(12);
    std::vector<float> f(12);
    std::vector<std::int64_t> i(12);
    for (std::size_t k = 0; k < 12; ++k) {
        d[k] = std::ldexp(static_cast<double>(gen()), -70);
        f[k] = static_cast<float>(d[k]);
        i[k] = static_cast<std::int64_t>(gen());
    }
    const std::vector<std::size_t> shape{4, 3};
    npy::write(dir / "d.npy", std::span<const double>(d), shape);
    npy::write(dir / "f.npy", std::span<const float>(f), shape);
    npy::write(dir / "i.npy", std::span<const std::int64_t>(i), shape);

    npy::ArrayHeader h;
    EXPECT_EQ(npy::read_float(dir / "d.npy", &h), d);
    EXPECT_EQ(h.shape, shape);
    const auto fr = npy::read_float(dir / "f.npy", &h);
    EXPECT_EQ(h.type, npy::ElementType::float32);
    for (std::size_t k = 0; k < 12; ++k) EXPECT_EQ(static_cast<float>(fr[k]), f[k]);
    EXPECT_EQ(npy::read_int(dir / "i.npy"), i);
    // Writing what was read back produces the same bytes.
    npy::write(dir / "d2.npy", std::span<const double>(npy::read_float(dir / "d.npy")), shape);
    EXPECT_EQ(slurp(dir / "d.npy"), slurp(dir / "d2.npy"));
    fs::remove_all(dir);
}

TEST(NpyFile, MalformedFilesAreRejected) {
    const auto dir = oracle::temp_dir("npy_bad");
    const std::vector<double> d(6, 1.5);
    const std::vector<std::size_t> shape{3, 2};
    npy::write(dir / "good.npy", std::span<const double>(d), shape);
    const std::string good = slurp(dir / "good.npy");

    spit(dir / "short.npy", good.substr(0, good.size() - 1));
    EXPECT_THROW(npy::read_header(dir / "short.npy"), InputError);

    spit(dir / "long.npy", good + "x");
    EXPECT_THROW(npy::read_header(dir / "long.npy"), InputError);

    std::string bad_magic = good;
    bad_magic[1] = 'X';
    spit(dir / "magic.npy", bad_magic);
    EXPECT_THROW(npy::read_header(dir / "magic.npy"), InputError);

    std::string bad_version = good;
    bad_version[6] = '\x09';
    spit(dir / "version.npy", bad_version);
    EXPECT_THROW(npy::read_header(dir / "version.npy"), InputError);

    EXPECT_THROW(npy::read_int(dir / "good.npy"), InputError);  // float payload
    EXPECT_FALSE(npy::has_magic(dir / "missing.npy"));
    EXPECT_TRUE(npy::has_magic(dir / "good.npy"));
    fs::remove_all(dir);
}

TEST(NpyFile, ReadsVersionTwoHeaders) {
    const auto dir = oracle::temp_dir("npy_v2");
    std::string dict = "{'descr': '<i8', 'fortran_order': False, 'shape': (2,), }";
    while ((12 + dict.size() + 1) % 64) dict += ' ';
    dict += '\n';
    std::string bytes("\x93NUMPY\x02\x00", 8);
    const auto len = static_cast<std::uint32_t>(dict.size());
    for (int b = 0; b < 4; ++b) bytes += static_cast<char>((len >> (8 * b)) & 0xFF);
    bytes += dict;
    const std::int64_t payload[2] = {-3, 9};
    bytes.append(reinterpret_cast<const char*>(payload), sizeof(payload));
    spit(dir / "v2.npy", bytes);
    EXPECT_EQ(npy::read_int(dir / "v2.npy"), (std::vector<std::int64_t>{-3, 9}));
    fs::remove_all(dir);
}
