#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <unistd.h>

#include "pointlm/rng.hpp"
#include "pointlm/spc1.hpp"

using namespace pointlm;

namespace {

Matf random_cloud(Rng& rng, int n, int d) {
  Matf c(n, d);
  fill_normal(c, rng, 0.0, 1.0);
  return c;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pointlm_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("spc1 file round-trip is bit exact") {
  Rng rng(51);
  TempDir dir;
  const Matf c = random_cloud(rng, 37, 6);
  save_spc1(dir.file("c.spc1"), c);
  const Matf back = load_spc1(dir.file("c.spc1"));
  REQUIRE(back.rows() == 37);
  REQUIRE(back.cols() == 6);
  CHECK(std::memcmp(c.data(), back.data(), sizeof(float) * 37 * 6) == 0);
}

TEST_CASE("spc1 rejects corrupt input with a reason") {
  TempDir dir;
  CHECK_THROWS_AS((void)load_spc1(dir.file("missing.spc1")), io_error);

  CHECK_THROWS_AS((void)decode_spc1("XYZ1aaaaaaaa"), io_error);

  Rng rng(52);
  std::string bytes = encode_spc1(random_cloud(rng, 4, 3));
  bytes.pop_back();
  CHECK_THROWS_AS((void)decode_spc1(bytes), io_error);

  // Header claiming more data than any sane cloud.
  std::string huge = "SPC1";
  huge += std::string("\xff\xff\xff\x0f", 4);  // N
  huge += std::string("\xff\xff\xff\x0f", 4);  // D
  CHECK_THROWS_AS((void)decode_spc1(huge), io_error);
}

TEST_CASE("base64 round-trips all payload remainders") {
  for (const std::string s :
       {std::string(""), std::string("a"), std::string("ab"),
        std::string("abc"), std::string("abcd"),
        std::string("\x00\xff\x7f\x01", 4)}) {
    CHECK(base64_decode(base64_encode(s)) == s);
  }
  CHECK_THROWS_AS((void)base64_decode("abc"), io_error);
  CHECK_THROWS_AS((void)base64_decode("a!=="), io_error);
}

TEST_CASE("inline cloud refs and path refs resolve to the same cloud") {
  Rng rng(53);
  TempDir dir;
  const Matf c = random_cloud(rng, 16, 6);
  save_spc1(dir.file("c.spc1"), c);

  const Matf via_path = resolve_cloud_ref("c.spc1", dir.path.string());
  const Matf via_inline = resolve_cloud_ref(inline_cloud_ref(c), "");
  CHECK(std::memcmp(via_path.data(), c.data(), sizeof(float) * 16 * 6) == 0);
  CHECK(std::memcmp(via_inline.data(), c.data(), sizeof(float) * 16 * 6) == 0);
}
