#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace legrad {

class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File does not start with the expected IDX magic number.
class IdxMagicError : public IdxError {
 public:
  using IdxError::IdxError;
};

/// File ended before the advertised payload.
class IdxTruncatedError : public IdxError {
 public:
  using IdxError::IdxError;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major

  std::uint32_t count() const {
    const std::uint32_t per = rows * cols;
    return per == 0 ? 0 : static_cast<std::uint32_t>(pixels.size() / per);
  }
};

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const std::string& what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw IdxTruncatedError("idx: truncated " + what);
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

inline void write_u32_be(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

inline IdxImages read_idx_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("idx: cannot open " + path);
  const std::uint32_t magic = detail::read_u32_be(in, "magic number in " + path);
  if (magic != kIdxImagesMagic) {
    throw IdxMagicError("idx: wrong image magic number in " + path);
  }
  const std::uint32_t count = detail::read_u32_be(in, "image count in " + path);
  IdxImages images;
  images.rows = detail::read_u32_be(in, "row count in " + path);
  images.cols = detail::read_u32_be(in, "column count in " + path);
  const std::size_t total =
      static_cast<std::size_t>(count) * images.rows * images.cols;
  images.pixels.resize(total);
  in.read(reinterpret_cast<char*>(images.pixels.data()), static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(in.gcount()) != total) {
    throw IdxTruncatedError("idx: truncated pixel data in " + path);
  }
  return images;
}

inline std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError("idx: cannot open " + path);
  const std::uint32_t magic = detail::read_u32_be(in, "magic number in " + path);
  if (magic != kIdxLabelsMagic) {
    throw IdxMagicError("idx: wrong label magic number in " + path);
  }
  const std::uint32_t count = detail::read_u32_be(in, "label count in " + path);
  std::vector<std::uint8_t> labels(count);
  in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw IdxTruncatedError("idx: truncated label data in " + path);
  }
  return labels;
}

inline void write_idx_images(const std::string& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError("idx: cannot write " + path);
  detail::write_u32_be(out, kIdxImagesMagic);
  detail::write_u32_be(out, images.count());
  detail::write_u32_be(out, images.rows);
  detail::write_u32_be(out, images.cols);
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
  if (!out) throw IdxError("idx: write failed for " + path);
}

inline void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError("idx: cannot write " + path);
  detail::write_u32_be(out, kIdxLabelsMagic);
  detail::write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  if (!out) throw IdxError("idx: write failed for " + path);
}

/// Binarizes pixels at threshold 0.5 on the [0, 1] scale; one row per image.
inline Eigen::MatrixXd binarize_images(const IdxImages& images) {
  const int per = static_cast<int>(images.rows * images.cols);
  const int n = static_cast<int>(images.count());
  Eigen::MatrixXd out(n, per);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < per; ++j) {
      const double scaled = images.pixels[static_cast<std::size_t>(i) * per + j] / 255.0;
      out(i, j) = scaled > 0.5 ? 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace legrad
