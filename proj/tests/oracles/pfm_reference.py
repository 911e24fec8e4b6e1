#!/usr/bin/env python3
"""Reference PFM writer (independent of the C++ implementation).

Follows the de-facto stereo-benchmark convention: "Pf" magic for a
single-channel map, ASCII "<width> <height>", a scale line whose sign
encodes endianness (negative = little-endian), then 32-bit floats in
bottom-to-top row order. Used once to freeze golden bytes for tests.
"""
import struct, sys

def write_pfm(path, rows, scale=-1.0):
    h = len(rows); w = len(rows[0])
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(("%d %d\n" % (w, h)).encode("ascii"))
        f.write(("%f\n" % scale).encode("ascii"))
        endian = "<" if scale < 0 else ">"
        for r in range(h - 1, -1, -1):          # bottom row first
            f.write(struct.pack(endian + "%df" % w, *rows[r]))

if __name__ == "__main__":
    write_pfm(sys.argv[1] if len(sys.argv) > 1 else "golden_2x2.pfm",
              [[1.0, 2.0], [3.0, 4.0]])
