#include "pointlm/spc1.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace pointlm {
namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', '1'};
// Refuse to allocate for obviously corrupt headers.
constexpr std::uint64_t kMaxElements = 1ull << 28;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
  return std::uint32_t(std::uint8_t(s[off])) |
         std::uint32_t(std::uint8_t(s[off + 1])) << 8 |
         std::uint32_t(std::uint8_t(s[off + 2])) << 16 |
         std::uint32_t(std::uint8_t(s[off + 3])) << 24;
}

const char* kB64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string encode_spc1(const Matf& cloud) {
  require(cloud.rows() >= 1 && cloud.cols() >= 1,
          "encode_spc1: cloud must be non-empty");
  std::string out;
  out.reserve(12 + std::size_t(cloud.size()) * 4);
  out.append(kMagic, 4);
  put_u32(out, std::uint32_t(cloud.rows()));
  put_u32(out, std::uint32_t(cloud.cols()));
  for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    for (Eigen::Index j = 0; j < cloud.cols(); ++j)
      put_u32(out, std::bit_cast<std::uint32_t>(cloud(i, j)));
  return out;
}

Matf decode_spc1(const std::string& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw io_error("decode_spc1: missing SPC1 magic");
  const std::uint64_t n = get_u32(bytes, 4);
  const std::uint64_t d = get_u32(bytes, 8);
  if (n == 0 || d == 0 || n * d > kMaxElements)
    throw io_error("decode_spc1: implausible header N=" + std::to_string(n) +
                   " D=" + std::to_string(d));
  if (bytes.size() != 12 + n * d * 4)
    throw io_error("decode_spc1: payload is " +
                   std::to_string(bytes.size() - 12) + " bytes, expected " +
                   std::to_string(n * d * 4));
  Matf cloud(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::size_t off = 12;
  for (Eigen::Index i = 0; i < cloud.rows(); ++i)
    for (Eigen::Index j = 0; j < cloud.cols(); ++j, off += 4)
      cloud(i, j) = std::bit_cast<float>(get_u32(bytes, off));
  return cloud;
}

void save_spc1(const std::string& path, const Matf& cloud) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("save_spc1: cannot open '" + path + "' for writing");
  const std::string bytes = encode_spc1(cloud);
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw io_error("save_spc1: short write to '" + path + "'");
}

Matf load_spc1(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("load_spc1: cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  try {
    return decode_spc1(bytes);
  } catch (const io_error& e) {
    throw io_error(std::string(e.what()) + " (file '" + path + "')");
  }
}

std::string base64_encode(const std::string& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const std::uint32_t v = std::uint32_t(std::uint8_t(bytes[i])) << 16 |
                            std::uint32_t(std::uint8_t(bytes[i + 1])) << 8 |
                            std::uint32_t(std::uint8_t(bytes[i + 2]));
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
    i += 3;
  }
  const std::size_t rem = bytes.size() - i;
  if (rem == 1) {
    const std::uint32_t v = std::uint32_t(std::uint8_t(bytes[i])) << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.append("==");
  } else if (rem == 2) {
    const std::uint32_t v = std::uint32_t(std::uint8_t(bytes[i])) << 16 |
                            std::uint32_t(std::uint8_t(bytes[i + 1])) << 8;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::string base64_decode(const std::string& text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (text.size() % 4 != 0)
    throw io_error("base64_decode: length not a multiple of 4");
  std::string out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        vals[k] = 0;
        ++pad;
      } else {
        vals[k] = value_of(c);
        if (vals[k] < 0 || pad > 0)
          throw io_error("base64_decode: invalid character '" +
                         std::string(1, c) + "'");
      }
    }
    const std::uint32_t v = std::uint32_t(vals[0]) << 18 |
                            std::uint32_t(vals[1]) << 12 |
                            std::uint32_t(vals[2]) << 6 | std::uint32_t(vals[3]);
    out.push_back(char((v >> 16) & 0xff));
    if (pad < 2) out.push_back(char((v >> 8) & 0xff));
    if (pad < 1) out.push_back(char(v & 0xff));
  }
  return out;
}

Matf resolve_cloud_ref(const std::string& ref, const std::string& base_dir) {
  if (ref.rfind("spc1:", 0) == 0)
    return decode_spc1(base64_decode(ref.substr(5)));
  std::filesystem::path p(ref);
  if (!p.is_absolute() && !base_dir.empty())
    p = std::filesystem::path(base_dir) / p;
  return load_spc1(p.string());
}

}  // namespace pointlm
