#include "jtens/idx.hpp"

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <limits>

#include "jtens/fileio.hpp"

namespace jtens {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;  // ubyte, 3 dimensions
constexpr std::uint32_t kLabelMagic = 0x00000801;  // ubyte, 1 dimension

// Reject payloads whose element count cannot be addressed sanely; this also
// catches headers corrupted into absurd dimension values.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

std::uint32_t read_u32_be(const std::string& bytes, std::size_t offset, const std::string& path) {
  if (offset + 4 > bytes.size())
    throw DataError("idx: '" + path + "' is truncated (header cut short)");
  const auto b = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i]));
  };
  return (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
}

void append_u32_be(std::string& out, std::uint32_t value) {
  out.push_back(static_cast<char>((value >> 24) & 0xff));
  out.push_back(static_cast<char>((value >> 16) & 0xff));
  out.push_back(static_cast<char>((value >> 8) & 0xff));
  out.push_back(static_cast<char>(value & 0xff));
}

void check_magic(std::uint32_t got, std::uint32_t want, const std::string& path) {
  if (got == want) return;
  const auto kind = [](std::uint32_t magic) -> std::string {
    if (magic == kImageMagic) return "an image stack";
    if (magic == kLabelMagic) return "a label vector";
    return "an unknown payload";
  };
  throw DataError("idx: '" + path + "' has wrong magic number: expected " + kind(want) +
                  ", found " + kind(got));
}

void check_payload(const std::string& bytes, std::size_t header, std::uint64_t elements,
                   const std::string& path) {
  if (elements > kMaxElements)
    throw DataError("idx: '" + path + "' header dimensions overflow (" +
                    std::to_string(elements) + " elements)");
  if (bytes.size() != header + elements)
    throw DataError("idx: '" + path + "' is truncated: header promises " +
                    std::to_string(elements) + " bytes, file carries " +
                    std::to_string(bytes.size() - header));
}

}  // namespace

Eigen::MatrixXd load_idx_images(const std::string& path) {
  const std::string bytes = read_text_file(path);
  check_magic(read_u32_be(bytes, 0, path), kImageMagic, path);
  const std::uint64_t count = read_u32_be(bytes, 4, path);
  const std::uint64_t rows = read_u32_be(bytes, 8, path);
  const std::uint64_t cols = read_u32_be(bytes, 12, path);
  // Two u32 factors always fit a u64; cap before the third multiply so the
  // full product cannot wrap around.
  std::uint64_t elements = count * rows;
  if (elements > kMaxElements)
    throw DataError("idx: '" + path + "' header dimensions overflow");
  elements *= cols;
  check_payload(bytes, 16, elements, path);

  Eigen::MatrixXd images(static_cast<Eigen::Index>(count),
                         static_cast<Eigen::Index>(rows * cols));
  const unsigned char* pixel = reinterpret_cast<const unsigned char*>(bytes.data()) + 16;
  for (Eigen::Index i = 0; i < images.rows(); ++i)
    for (Eigen::Index j = 0; j < images.cols(); ++j)
      images(i, j) = static_cast<double>(*pixel++) / 255.0;
  return images;
}

Eigen::VectorXi load_idx_labels(const std::string& path) {
  const std::string bytes = read_text_file(path);
  check_magic(read_u32_be(bytes, 0, path), kLabelMagic, path);
  const std::uint64_t count = read_u32_be(bytes, 4, path);
  check_payload(bytes, 8, count, path);

  Eigen::VectorXi labels(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    labels(i) = static_cast<unsigned char>(bytes[static_cast<std::size_t>(8 + i)]);
  return labels;
}

RawDataset load_idx_dataset(const std::string& train_images, const std::string& train_labels,
                            const std::string& test_images, const std::string& test_labels) {
  RawDataset raw;
  raw.train.features = load_idx_images(train_images);
  raw.train.labels = load_idx_labels(train_labels);
  raw.test.features = load_idx_images(test_images);
  raw.test.labels = load_idx_labels(test_labels);
  if (raw.train.features.rows() != raw.train.labels.size())
    throw DataError("idx: training images and labels disagree on the example count");
  if (raw.test.features.rows() != raw.test.labels.size())
    throw DataError("idx: test images and labels disagree on the example count");
  if (raw.train.size() == 0) throw DataError("idx: empty training split");

  int max_label = 0;
  for (Eigen::Index i = 0; i < raw.train.labels.size(); ++i)
    max_label = std::max(max_label, raw.train.labels(i));
  for (Eigen::Index i = 0; i < raw.test.labels.size(); ++i)
    max_label = std::max(max_label, raw.test.labels(i));
  raw.num_classes = max_label + 1;
  raw.provenance = "idx:" + train_images;
  return raw;
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  const std::uint64_t expected =
      std::uint64_t{count} * std::uint64_t{rows} * std::uint64_t{cols};
  if (pixels.size() != expected)
    throw ConfigError("idx: pixel buffer size does not match count x rows x cols");
  std::string out;
  out.reserve(16 + pixels.size());
  append_u32_be(out, kImageMagic);
  append_u32_be(out, count);
  append_u32_be(out, rows);
  append_u32_be(out, cols);
  out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
  write_text_atomic(path, out);
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels) {
  if (labels.size() > std::numeric_limits<std::uint32_t>::max())
    throw ConfigError("idx: too many labels for the format");
  std::string out;
  out.reserve(8 + labels.size());
  append_u32_be(out, kLabelMagic);
  append_u32_be(out, static_cast<std::uint32_t>(labels.size()));
  out.append(reinterpret_cast<const char*>(labels.data()), labels.size());
  write_text_atomic(path, out);
}

}  // namespace jtens
