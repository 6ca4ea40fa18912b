// Big-endian IDX files (MNIST layout): unsigned-byte images and labels.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace safelog {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // image-major, then row-major

  std::uint8_t pixel(std::size_t image, std::size_t r, std::size_t c) const {
    return pixels[(image * rows + r) * cols + c];
  }
};

/// Throws BadMagic, TruncatedFile.
IdxImages read_idx_images(std::istream& in);
std::vector<std::uint8_t> read_idx_labels(std::istream& in);

IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);

void write_idx_images(std::ostream& out, const IdxImages& images);
void write_idx_labels(std::ostream& out, const std::vector<std::uint8_t>& labels);

}  // namespace safelog
