#pragma once

#include <string>
#include <vector>

#include "seastereo/image.hpp"

namespace seastereo {

// Single-channel PFM ("Pf"): ASCII header, then 32-bit float rows stored
// bottom-to-top. The scale line's sign encodes byte order (negative =
// little-endian). Values must be finite. Color "PF" files are rejected.
std::vector<uint8_t> encode_pfm(const Image& map);
Image decode_pfm(const std::vector<uint8_t>& bytes);

void write_pfm(const std::string& path, const Image& map);
Image read_pfm(const std::string& path);

}  // namespace seastereo
