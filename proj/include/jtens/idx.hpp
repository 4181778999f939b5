#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "jtens/dataset.hpp"

// Reader and writer for the classic IDX binary tensor format used by the
// MNIST-family image sets. Big-endian throughout; the only payloads accepted
// are unsigned-byte image stacks (magic 0x00000803, dimensions count x rows
// x cols) and unsigned-byte label vectors (magic 0x00000801).

namespace jtens {

// One image per row, pixels scaled from bytes to [0, 1] (divide by 255).
// Throws DataError with distinct messages for a wrong magic number, a
// truncated file, and header dimensions whose product overflows.
Eigen::MatrixXd load_idx_images(const std::string& path);

Eigen::VectorXi load_idx_labels(const std::string& path);

// Pairs images with labels (counts must match) and infers the class count
// from the largest label across both splits.
RawDataset load_idx_dataset(const std::string& train_images, const std::string& train_labels,
                            const std::string& test_images, const std::string& test_labels);

// Writers for fixtures and round-trip checks; the payload is raw bytes.
void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels,
                      std::uint32_t count, std::uint32_t rows, std::uint32_t cols);

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels);

}  // namespace jtens
