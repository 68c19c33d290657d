#include "scd/image.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace scd {

namespace {

void put_u32be(std::string& out, uint32_t v) {
  out.push_back(char((v >> 24) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char(v & 0xff));
}

uint32_t get_u32be(const unsigned char* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
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

const unsigned char kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::vector<uint8_t> to_bytes(const PercollImage& img) {
  std::vector<uint8_t> bytes(size_t(img.height()) * size_t(img.width()));
  const auto& px = img.pixels();
  for (size_t i = 0; i < px.size(); ++i) bytes[i] = uint8_t(px[i] * 255.0f + 0.5f);
  return bytes;
}

PercollImage from_bytes(int h, int w, const std::vector<uint8_t>& bytes) {
  std::vector<float> px(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) px[i] = float(bytes[i]) / 255.0f;
  return PercollImage::from_quantized(h, w, std::move(px));
}

void write_png(const PercollImage& img, const std::filesystem::path& path) {
  int h = img.height(), w = img.width();
  std::string ihdr;
  put_u32be(ihdr, uint32_t(w));
  put_u32be(ihdr, uint32_t(h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // adaptive filtering
  ihdr.push_back(0);  // no interlace

  std::vector<uint8_t> bytes = to_bytes(img);
  std::vector<uint8_t> raw(size_t(h) * (size_t(w) + 1));
  for (int r = 0; r < h; ++r) {
    raw[size_t(r) * (w + 1)] = 0;  // filter: none
    std::memcpy(raw.data() + size_t(r) * (w + 1) + 1, bytes.data() + size_t(r) * w, size_t(w));
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::string idat(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(idat.data()), &bound, raw.data(), uLong(raw.size()), 6) !=
      Z_OK)
    throw IoError("png: deflate failed");
  idat.resize(bound);

  std::string out(reinterpret_cast<const char*>(kPngSig), 8);
  append_chunk(out, "IHDR", ihdr);
  append_chunk(out, "IDAT", idat);
  append_chunk(out, "IEND", "");

  std::ofstream f(path, std::ios::binary);
  if (!f || !f.write(out.data(), std::streamsize(out.size())))
    throw IoError("cannot write " + path.string());
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

PercollImage read_png(const std::vector<unsigned char>& buf, const std::string& name) {
  if (buf.size() < 8 || std::memcmp(buf.data(), kPngSig, 8) != 0)
    throw DataError(name + ": not a PNG file");
  size_t pos = 8;
  int w = 0, h = 0;
  bool seen_ihdr = false, seen_iend = false;
  std::vector<unsigned char> idat;
  while (pos + 12 <= buf.size()) {
    uint32_t len = get_u32be(buf.data() + pos);
    if (pos + 12 + len > buf.size()) throw DataError(name + ": truncated PNG chunk");
    std::string type(reinterpret_cast<const char*>(buf.data() + pos + 4), 4);
    const unsigned char* data = buf.data() + pos + 8;
    if (type == "IHDR") {
      if (len != 13) throw DataError(name + ": bad IHDR");
      w = int(get_u32be(data));
      h = int(get_u32be(data + 4));
      if (data[8] != 8 || data[9] != 0)
        throw DataError(name + ": only 8-bit grayscale PNG supported");
      if (data[12] != 0) throw DataError(name + ": interlaced PNG not supported");
      seen_ihdr = true;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      seen_iend = true;
      break;
    }
    pos += 12 + len;
  }
  if (!seen_ihdr || w < 1 || h < 1) throw DataError(name + ": missing or bad IHDR");
  if (!seen_iend) throw DataError(name + ": truncated PNG (no IEND)");
  std::vector<uint8_t> raw(size_t(h) * (size_t(w) + 1));
  uLongf raw_len = uLongf(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw DataError(name + ": PNG inflate failed");
  std::vector<uint8_t> bytes(size_t(h) * size_t(w));
  for (int r = 0; r < h; ++r) {
    uint8_t filter = raw[size_t(r) * (w + 1)];
    const uint8_t* src = raw.data() + size_t(r) * (w + 1) + 1;
    uint8_t* dst = bytes.data() + size_t(r) * w;
    const uint8_t* up = r > 0 ? bytes.data() + size_t(r - 1) * w : nullptr;
    for (int c = 0; c < w; ++c) {
      int a = c > 0 ? dst[c - 1] : 0;
      int b = up ? up[c] : 0;
      int cc = (c > 0 && up) ? up[c - 1] : 0;
      int x = src[c];
      switch (filter) {
        case 0: dst[c] = uint8_t(x); break;
        case 1: dst[c] = uint8_t(x + a); break;
        case 2: dst[c] = uint8_t(x + b); break;
        case 3: dst[c] = uint8_t(x + (a + b) / 2); break;
        case 4: dst[c] = uint8_t(x + paeth(a, b, cc)); break;
        default: throw DataError(name + ": unknown PNG filter");
      }
    }
  }
  return from_bytes(h, w, bytes);
}

void write_pgm(const PercollImage& img, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<uint8_t> bytes = to_bytes(img);
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) throw IoError("cannot write " + path.string());
}

PercollImage read_pgm(const std::vector<unsigned char>& buf, const std::string& name) {
  size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(buf[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    size_t start = pos;
    while (pos < buf.size() && !std::isspace(buf[pos])) ++pos;
    return std::string(buf.begin() + std::ptrdiff_t(start), buf.begin() + std::ptrdiff_t(pos));
  };
  if (token() != "P5") throw DataError(name + ": not a binary PGM");
  int w, h, maxval;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw DataError(name + ": malformed PGM header");
  }
  if (w < 1 || h < 1 || maxval != 255) throw DataError(name + ": unsupported PGM geometry");
  ++pos;  // single whitespace after maxval
  if (pos + size_t(w) * size_t(h) > buf.size()) throw DataError(name + ": truncated PGM data");
  std::vector<uint8_t> bytes(buf.begin() + std::ptrdiff_t(pos),
                             buf.begin() + std::ptrdiff_t(pos + size_t(w) * size_t(h)));
  return from_bytes(h, w, bytes);
}

}  // namespace

PercollImage load_image(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  if (ext != ".png" && ext != ".pgm")
    throw UsageError("unsupported image extension: " + path.string());
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (ext == ".png") return read_png(buf, path.string());
  return read_pgm(buf, path.string());
}

void save_image(const PercollImage& img, const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  if (ext == ".png")
    write_png(img, path);
  else if (ext == ".pgm")
    write_pgm(img, path);
  else
    throw UsageError("unsupported image extension: " + path.string());
}

}  // namespace scd
