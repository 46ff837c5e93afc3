#pragma once

#include <sys/stat.h>

#include <fstream>
#include <string>

#include "latent_evo/error.hpp"

namespace latent_evo {

enum class StubMode { Ok, Fail, Malformed, Hang };

// Python stub speaking the subprocess protocol. Usage: stub WIDTH HEIGHT.
// Pixel (x, y, c) is a logistic squash of latent coordinate (y*W + x)*3 + c mod d.
inline std::string stub_script(StubMode mode) {
  std::string body = R"(#!/usr/bin/env python3
import math
import struct
import sys

MODE = "@MODE@"


def main():
    width, height = int(sys.argv[1]), int(sys.argv[2])
    data = sys.stdin.buffer.read()
    if data[:4] != b"LEVO":
        sys.stderr.write("bad magic\n")
        return 4
    _version, c, h, w = struct.unpack_from("<HIII", data, 4)
    d = c * h * w
    z = struct.unpack_from("<%dd" % d, data, 18)
    if MODE == "fail":
        sys.stderr.write("stub asked to fail\n")
        return 3
    if MODE == "hang":
        import time
        time.sleep(3600)
    pixels = bytearray()
    for k in range(width * height * 3):
        v = z[k % d]
        pixels.append(int(round(255.0 / (1.0 + math.exp(-2.0 * v)))))
    header = b"P6\n%d %d\n255\n" % (width, height)
    if MODE == "malformed":
        pixels = pixels[: len(pixels) // 2]
    sys.stdout.buffer.write(header + bytes(pixels))
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
)";
  const std::string name = mode == StubMode::Ok          ? "ok"
                           : mode == StubMode::Fail      ? "fail"
                           : mode == StubMode::Malformed ? "malformed"
                                                         : "hang";
  body.replace(body.find("@MODE@"), 6, name);
  return body;
}

inline void write_stub(const std::string& path, StubMode mode) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write stub '" + path + "'");
  out << stub_script(mode);
  out.close();
  if (!out) throw IoError("write to '" + path + "' failed");
  ::chmod(path.c_str(), 0755);
}

}  // namespace latent_evo
