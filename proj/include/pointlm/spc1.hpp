#pragma once
// Flat binary point-cloud container. Layout, all little-endian:
//   bytes 0..3   magic "SPC1"
//   bytes 4..7   u32 N (points)
//   bytes 8..11  u32 D (values per point)
//   then N*D float32, row-major
//
// Clouds can also travel inline inside JSON as "spc1:<base64 of the same
// bytes>"; resolve_cloud_ref accepts either form.

#include <string>

#include "pointlm/common.hpp"

namespace pointlm {

void save_spc1(const std::string& path, const Matf& cloud);
Matf load_spc1(const std::string& path);

std::string encode_spc1(const Matf& cloud);          // raw container bytes
Matf decode_spc1(const std::string& bytes);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

inline std::string inline_cloud_ref(const Matf& cloud) {
  return "spc1:" + base64_encode(encode_spc1(cloud));
}

// `ref` is either an inline "spc1:..." string or a path, resolved relative to
// base_dir when not absolute.
Matf resolve_cloud_ref(const std::string& ref, const std::string& base_dir);

}  // namespace pointlm
