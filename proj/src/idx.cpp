#include "safelog/idx.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "safelog/errors.hpp"

namespace safelog {
namespace {

std::uint32_t read_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw TruncatedFile(std::string("idx: truncated ") + what);
  return std::uint32_t(b[0]) << 24 | std::uint32_t(b[1]) << 16 | std::uint32_t(b[2]) << 8 | std::uint32_t(b[3]);
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b, 4);
}

// Checks a seekable stream holds `bytes` more before anything is allocated,
// so a corrupt count cannot request gigabytes.
void ensure_available(std::istream& in, std::uint64_t bytes) {
  const auto here = in.tellg();
  if (here < 0) return;
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end >= 0 && std::uint64_t(end - here) < bytes) throw TruncatedFile("idx: payload shorter than the header promises");
}

void read_payload(std::istream& in, std::vector<std::uint8_t>& buf) {
  if (buf.empty()) return;
  if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size())))
    throw TruncatedFile("idx: payload shorter than the header promises");
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("idx: cannot open " + path);
  return in;
}

}  // namespace

IdxImages read_idx_images(std::istream& in) {
  const std::uint32_t magic = read_u32(in, "magic");
  if (magic != kIdxImagesMagic) throw BadMagic("idx: not an image file");
  IdxImages img;
  img.count = read_u32(in, "header");
  img.rows = read_u32(in, "header");
  img.cols = read_u32(in, "header");
  const std::uint64_t n = std::uint64_t(img.count) * img.rows * img.cols;
  ensure_available(in, n);
  img.pixels.resize(n);
  read_payload(in, img.pixels);
  return img;
}

std::vector<std::uint8_t> read_idx_labels(std::istream& in) {
  const std::uint32_t magic = read_u32(in, "magic");
  if (magic != kIdxLabelsMagic) throw BadMagic("idx: not a label file");
  const std::uint32_t n = read_u32(in, "header");
  ensure_available(in, n);
  std::vector<std::uint8_t> labels(n);
  read_payload(in, labels);
  return labels;
}

IdxImages read_idx_images(const std::string& path) {
  auto in = open(path);
  return read_idx_images(in);
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  auto in = open(path);
  return read_idx_labels(in);
}

void write_idx_images(std::ostream& out, const IdxImages& images) {
  if (images.pixels.size() != std::size_t(images.count) * images.rows * images.cols)
    throw DimensionMismatch("idx: pixel count does not match the header");
  write_u32(out, kIdxImagesMagic);
  write_u32(out, images.count);
  write_u32(out, images.rows);
  write_u32(out, images.cols);
  out.write(reinterpret_cast<const char*>(images.pixels.data()), std::streamsize(images.pixels.size()));
}

void write_idx_labels(std::ostream& out, const std::vector<std::uint8_t>& labels) {
  write_u32(out, kIdxLabelsMagic);
  write_u32(out, std::uint32_t(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size()));
}

}  // namespace safelog
