#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "scd/image.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"

using scd::DataError;
using scd::IoError;
using scd::PercollImage;
using scd::ShapeError;
using scd::UsageError;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  fs::path d = fs::temp_directory_path() / "scd_image_tests";
  fs::create_directories(d);
  return d;
}

PercollImage random_quantized(int h, int w, uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<float> px(size_t(h) * size_t(w));
  for (auto& v : px) v = float(byte(gen)) / 255.0f;
  return PercollImage(h, w, std::move(px));
}

void put_u32be(std::string& out, uint32_t v) {
  out.push_back(char((v >> 24) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char(v & 0xff));
}

void append_chunk(std::string& out, const char type[4], const std::string& data) {
  put_u32be(out, uint32_t(data.size()));
  size_t start = out.size();
  out.append(type, 4);
  out.append(data);
  uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(out.data() + start), uInt(4 + data.size()));
  put_u32be(out, crc);
}

int paeth_pred(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

// Encodes an 8-bit grayscale PNG applying the given filter type to each row,
// per the PNG spec, so the decoder's reconstruction paths can be exercised.
std::string encode_png_with_filters(const std::vector<uint8_t>& bytes, int h, int w,
                                    const std::vector<uint8_t>& row_filters) {
  std::vector<uint8_t> raw;
  raw.reserve(size_t(h) * (size_t(w) + 1));
  for (int r = 0; r < h; ++r) {
    uint8_t f = row_filters[size_t(r)];
    raw.push_back(f);
    for (int c = 0; c < w; ++c) {
      int x = bytes[size_t(r) * w + c];
      int a = c > 0 ? bytes[size_t(r) * w + c - 1] : 0;
      int b = r > 0 ? bytes[size_t(r - 1) * w + c] : 0;
      int d = (r > 0 && c > 0) ? bytes[size_t(r - 1) * w + c - 1] : 0;
      int out = x;
      switch (f) {
        case 0: out = x; break;
        case 1: out = x - a; break;
        case 2: out = x - b; break;
        case 3: out = x - (a + b) / 2; break;
        case 4: out = x - paeth_pred(a, b, d); break;
      }
      raw.push_back(uint8_t(out & 0xff));
    }
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::string idat(bound, '\0');
  REQUIRE(compress2(reinterpret_cast<Bytef*>(idat.data()), &bound, raw.data(),
                    uLong(raw.size()), 6) == Z_OK);
  idat.resize(bound);

  std::string ihdr;
  put_u32be(ihdr, uint32_t(w));
  put_u32be(ihdr, uint32_t(h));
  ihdr.push_back(8);
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);

  const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  std::string out(reinterpret_cast<const char*>(sig), 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", idat);
  append_chunk(out, "IEND", "");
  return out;
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  REQUIRE(bool(f));
  f.write(bytes.data(), std::streamsize(bytes.size()));
}

}  // namespace

TEST_CASE("quantize8 maps to the k/255 grid and clamps") {
  CHECK(scd::quantize8(0.0f) == 0.0f);
  CHECK(scd::quantize8(1.0f) == 1.0f);
  CHECK(scd::quantize8(0.5f) == doctest::Approx(128.0f / 255.0f));
  CHECK(scd::quantize8(-0.2f) == 0.0f);
  CHECK(scd::quantize8(1.7f) == 1.0f);
  // idempotent on grid points
  for (int k = 0; k <= 255; ++k) {
    float v = float(k) / 255.0f;
    CHECK(scd::quantize8(v) == v);
  }
}

TEST_CASE("PercollImage validates its buffer") {
  CHECK_THROWS_AS(PercollImage(0, 4, {}), ShapeError);
  CHECK_THROWS_AS(PercollImage(2, 2, std::vector<float>(3, 0.0f)), ShapeError);
  CHECK_THROWS_AS(PercollImage(1, 2, {0.5f, 1.5f}), DataError);
  CHECK_THROWS_AS(PercollImage(1, 1, {-0.1f}), DataError);
  PercollImage img(2, 3, std::vector<float>(6, 0.25f));
  CHECK(img.height() == 2);
  CHECK(img.width() == 3);
  CHECK(img.at(1, 2) == 0.25f);
}

TEST_CASE("png round trip is bit exact") {
  PercollImage img = random_quantized(7, 5, 101);
  fs::path p = tmp_dir() / "roundtrip.png";
  scd::save_image(img, p);
  PercollImage back = scd::load_image(p);
  REQUIRE(back.height() == 7);
  REQUIRE(back.width() == 5);
  for (size_t i = 0; i < img.pixels().size(); ++i) CHECK(back.pixels()[i] == img.pixels()[i]);
}

TEST_CASE("pgm round trip is bit exact") {
  PercollImage img = random_quantized(4, 9, 202);
  fs::path p = tmp_dir() / "roundtrip.pgm";
  scd::save_image(img, p);
  PercollImage back = scd::load_image(p);
  REQUIRE(back.height() == 4);
  REQUIRE(back.width() == 9);
  for (size_t i = 0; i < img.pixels().size(); ++i) CHECK(back.pixels()[i] == img.pixels()[i]);
}

TEST_CASE("decoder reconstructs all five PNG filter types") {
  const int h = 5, w = 6;
  std::mt19937 gen(7);
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<uint8_t> bytes(size_t(h) * w);
  for (auto& b : bytes) b = uint8_t(byte(gen));
  std::string png = encode_png_with_filters(bytes, h, w, {0, 1, 2, 3, 4});
  fs::path p = tmp_dir() / "filters.png";
  write_file(p, png);
  PercollImage img = scd::load_image(p);
  REQUIRE(img.height() == h);
  REQUIRE(img.width() == w);
  for (size_t i = 0; i < bytes.size(); ++i)
    CHECK(img.pixels()[i] == float(bytes[i]) / 255.0f);
}

TEST_CASE("unknown extension is a usage error") {
  PercollImage img(1, 1, {0.5f});
  CHECK_THROWS_AS(scd::save_image(img, tmp_dir() / "x.bmp"), UsageError);
  CHECK_THROWS_AS(scd::load_image(tmp_dir() / "x.bmp"), UsageError);
}

TEST_CASE("missing file is an io error") {
  CHECK_THROWS_AS(scd::load_image(tmp_dir() / "nope.png"), IoError);
}

TEST_CASE("corrupt png inputs raise data errors") {
  fs::path bad = tmp_dir() / "bad.png";
  write_file(bad, "this is certainly not a png");
  CHECK_THROWS_AS(scd::load_image(bad), DataError);

  // valid signature, truncated chunk
  PercollImage img = random_quantized(3, 3, 5);
  fs::path good = tmp_dir() / "good.png";
  scd::save_image(img, good);
  std::ifstream f(good, std::ios::binary);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  write_file(bad, buf.substr(0, buf.size() - 6));
  CHECK_THROWS_AS(scd::load_image(bad), DataError);
}

TEST_CASE("corrupt pgm inputs raise data errors") {
  fs::path bad = tmp_dir() / "bad.pgm";
  write_file(bad, "P2\n3 3\n255\n");  // ascii PGM, unsupported
  CHECK_THROWS_AS(scd::load_image(bad), DataError);
  write_file(bad, "P5\n3 3\n255\nxy");  // truncated payload
  CHECK_THROWS_AS(scd::load_image(bad), DataError);
  write_file(bad, "P5\n3 3\n65535\n");  // 16-bit maxval
  CHECK_THROWS_AS(scd::load_image(bad), DataError);
}
