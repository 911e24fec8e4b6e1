#include "seastereo/pfm.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "seastereo/error.hpp"

namespace seastereo {

namespace {

void byteswap32(uint8_t* p, size_t count) {
    for (size_t i = 0; i < count; ++i, p += 4) {
        std::swap(p[0], p[3]);
        std::swap(p[1], p[2]);
    }
}

// Reads one whitespace-delimited token, skipping '#' comment lines.
bool next_token(const std::vector<uint8_t>& b, size_t& pos, std::string& tok) {
    tok.clear();
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    while (pos < b.size() && b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
        while (pos < b.size() && std::isspace(b[pos])) ++pos;
    }
    while (pos < b.size() && !std::isspace(b[pos])) tok.push_back(char(b[pos++]));
    return !tok.empty();
}

}  // namespace

std::vector<uint8_t> encode_pfm(const Image& map) {
    if (map.channels != 1)
        raise(ErrorCode::Internal, "encode_pfm expects a single-channel map");
    size_t bad = 0;
    for (float v : map.data)
        if (!std::isfinite(v)) ++bad;
    if (bad > 0)
        raise(ErrorCode::Data,
              "encode_pfm: " + std::to_string(bad) + " non-finite value(s)");

    char header[64];
    int n = std::snprintf(header, sizeof(header), "Pf\n%d %d\n%f\n", map.width,
                          map.height, -1.0);  // negative scale: little-endian
    std::vector<uint8_t> out(header, header + n);
    out.reserve(out.size() + map.numel() * 4);
    // Rows bottom-to-top.
    for (int y = map.height - 1; y >= 0; --y) {
        const float* row = &map.data[size_t(y) * map.width];
        const uint8_t* raw = reinterpret_cast<const uint8_t*>(row);
        out.insert(out.end(), raw, raw + size_t(map.width) * 4);
    }
    if constexpr (std::endian::native == std::endian::big)
        byteswap32(out.data() + n, map.numel());
    return out;
}

Image decode_pfm(const std::vector<uint8_t>& bytes) {
    size_t pos = 0;
    std::string tok;
    if (!next_token(bytes, pos, tok))
        raise(ErrorCode::Data, "pfm: empty input");
    if (tok == "PF")
        raise(ErrorCode::Data, "pfm: 3-channel 'PF' files are not supported");
    if (tok != "Pf")
        raise(ErrorCode::Data, "pfm: malformed header, bad magic '" + tok + "'");

    std::string ws, hs, ss;
    if (!next_token(bytes, pos, ws) || !next_token(bytes, pos, hs) ||
        !next_token(bytes, pos, ss))
        raise(ErrorCode::Data, "pfm: malformed header, missing dims/scale");
    int w = 0, h = 0;
    double scale = 0.0;
    try {
        w = std::stoi(ws);
        h = std::stoi(hs);
        scale = std::stod(ss);
    } catch (const std::exception&) {
        raise(ErrorCode::Data, "pfm: malformed header, non-numeric fields");
    }
    if (w <= 0 || h <= 0 || scale == 0.0)
        raise(ErrorCode::Data, "pfm: malformed header, bad dims or scale");
    if (pos >= bytes.size() || bytes[pos] != '\n')
        raise(ErrorCode::Data, "pfm: malformed header, expected newline after scale");
    ++pos;

    size_t need = size_t(w) * h * 4;
    if (bytes.size() - pos < need)
        raise(ErrorCode::Data, "pfm: truncated payload, need " + std::to_string(need) +
                                   " bytes, have " + std::to_string(bytes.size() - pos));

    Image map(h, w, 1);
    std::vector<uint8_t> payload(bytes.begin() + pos, bytes.begin() + pos + need);
    const bool file_le = scale < 0.0;
    const bool host_le = std::endian::native == std::endian::little;
    if (file_le != host_le) byteswap32(payload.data(), size_t(w) * h);
    for (int y = 0; y < h; ++y) {
        const uint8_t* src = payload.data() + size_t(h - 1 - y) * w * 4;
        std::memcpy(&map.data[size_t(y) * w], src, size_t(w) * 4);
    }
    return map;
}

void write_pfm(const std::string& path, const Image& map) {
    auto bytes = encode_pfm(map);
    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorCode::Io, "cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!f) raise(ErrorCode::Io, "write failed: " + path);
}

Image read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) raise(ErrorCode::Io, "cannot open: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    return decode_pfm(bytes);
}

}  // namespace seastereo
