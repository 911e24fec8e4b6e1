#include <cstring>

#include "doctest.h"
#include "seastereo/error.hpp"
#include "seastereo/pfm.hpp"
#include "seastereo/rng.hpp"

using namespace seastereo;

TEST_CASE("pfm roundtrip is exact") {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        int h = rng.uniform_int(1, 9), w = rng.uniform_int(1, 9);
        Image m(h, w, 1);
        for (auto& v : m.data) v = float(rng.uniform(-500.0, 500.0));
        Image back = decode_pfm(encode_pfm(m));
        REQUIRE(back.height == h);
        REQUIRE(back.width == w);
        CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * 4) == 0);
    }
}

TEST_CASE("pfm header starts with the Pf magic") {
    Image m(2, 3, 1, 1.5f);
    auto bytes = encode_pfm(m);
    REQUIRE(bytes.size() >= 3);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[1] == 'f');
    CHECK(bytes[2] == '\n');
}

// Golden bytes produced by tests/oracles/pfm_reference.py for the map
// [[1,2],[3,4]] (top row first): header "Pf\n2 2\n-1.000000\n", then
// little-endian rows bottom-to-top.
TEST_CASE("pfm golden bytes for the fixed 2x2 map") {
    const unsigned char golden[] = {
        0x50, 0x66, 0x0a, 0x32, 0x20, 0x32, 0x0a, 0x2d, 0x31, 0x2e, 0x30,
        0x30, 0x30, 0x30, 0x30, 0x30, 0x0a, 0x00, 0x00, 0x40, 0x40, 0x00,
        0x00, 0x80, 0x40, 0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40};
    Image m(2, 2, 1);
    m.at(0, 0) = 1.f;
    m.at(0, 1) = 2.f;
    m.at(1, 0) = 3.f;
    m.at(1, 1) = 4.f;
    auto bytes = encode_pfm(m);
    REQUIRE(bytes.size() == sizeof(golden));
    CHECK(std::memcmp(bytes.data(), golden, sizeof(golden)) == 0);
}

TEST_CASE("pfm decodes big-endian payloads") {
    // Same 2x2 map, positive scale, byteswapped floats.
    std::vector<uint8_t> be = {'P', 'f', '\n', '2', ' ', '2', '\n', '1', '.', '0', '\n',
                               0x40, 0x40, 0x00, 0x00, 0x40, 0x80, 0x00, 0x00,
                               0x3f, 0x80, 0x00, 0x00, 0x40, 0x00, 0x00, 0x00};
    Image m = decode_pfm(be);
    CHECK(m.at(0, 0) == 1.f);
    CHECK(m.at(0, 1) == 2.f);
    CHECK(m.at(1, 0) == 3.f);
    CHECK(m.at(1, 1) == 4.f);
}

TEST_CASE("pfm rejects color, truncation, junk and non-finite input") {
    Image m(2, 2, 1, 1.f);
    auto good = encode_pfm(m);

    auto color = good;
    color[1] = 'F';
    CHECK_THROWS_WITH_AS(decode_pfm(color), doctest::Contains("not supported"), Error);

    auto truncated = good;
    truncated.resize(truncated.size() - 5);
    CHECK_THROWS_WITH_AS(decode_pfm(truncated), doctest::Contains("truncated"), Error);

    std::vector<uint8_t> junk = {'P', 'f', '\n', 'x', ' ', '2', '\n'};
    CHECK_THROWS_WITH_AS(decode_pfm(junk), doctest::Contains("malformed"), Error);

    Image inf_map(1, 2, 1, 1.f);
    inf_map.data[1] = INFINITY;
    CHECK_THROWS_AS(encode_pfm(inf_map), Error);
}
