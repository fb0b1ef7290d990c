#include <openssl/evp.h>

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "pdeep/flow_data.hpp"
#include "pdeep/sha256.hpp"

namespace {

std::string openssl_hex(const std::vector<std::uint8_t>& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += digits[md[i] >> 4];
    out += digits[md[i] & 15];
  }
  return out;
}

}  // namespace

TEST_CASE("published vectors") {
  CHECK(pdeep::sha256_hex(std::string_view("")) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(pdeep::sha256_hex(std::string_view("abc")) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(pdeep::sha256_hex(std::string_view("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  pdeep::Sha256 h;
  const std::string chunk(1000, 'a');
  for (int i = 0; i < 1000; ++i) h.update(std::string_view(chunk));
  CHECK(pdeep::Sha256::to_hex(h.finish()) == "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("matches OpenSSL on random byte strings") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::size_t> length(0, 4096);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint8_t> data(trial < 3 ? static_cast<std::size_t>(trial) : length(gen));
    for (auto& b : data) b = static_cast<std::uint8_t>(byte(gen));
    const std::string expect = openssl_hex(data);
    REQUIRE(pdeep::sha256_hex(std::span<const std::uint8_t>(data)) == expect);

    // Same digest when fed in uneven pieces.
    pdeep::Sha256 h;
    std::size_t pos = 0;
    std::size_t step = 1;
    while (pos < data.size()) {
      const std::size_t take = std::min(step, data.size() - pos);
      h.update(std::span<const std::uint8_t>(data.data() + pos, take));
      pos += take;
      step = step * 3 + 1;
    }
    REQUIRE(pdeep::Sha256::to_hex(h.finish()) == expect);
  }
}

TEST_CASE("finish resets the hasher") {
  pdeep::Sha256 h;
  h.update(std::string_view("abc"));
  (void)h.finish();
  CHECK(pdeep::Sha256::to_hex(h.finish()) == pdeep::sha256_hex(std::string_view("")));
}

TEST_CASE("digest_file on the published vectors") {
  const auto dir = testutil::scratch_dir("sha256");
  { std::ofstream(dir / "empty.bin", std::ios::binary); }
  { std::ofstream(dir / "abc.bin", std::ios::binary) << "abc"; }
  const auto empty = pdeep::digest_file(dir / "empty.bin");
  CHECK(empty.sha256 == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(empty.bytes == 0);
  const auto abc = pdeep::digest_file(dir / "abc.bin");
  CHECK(abc.sha256 == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(abc.bytes == 3);
  const auto again = pdeep::digest_file(dir / "abc.bin");
  CHECK(again.sha256 == abc.sha256);
  CHECK(again.source == abc.source);
  CHECK(again.bytes == abc.bytes);
}
