// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nvil/model.hpp"
#include "nvil/rng.hpp"

namespace nvil {

// Binary image-style data, one row per case.
struct BinaryDataset {
  std::size_t dim = 0;
  std::vector<std::uint8_t> rows;  // n_cases x dim, row-major
  std::vector<double> mean;        // per-dimension training mean in [0, 1]

  std::size_t n_cases() const { return dim == 0 ? 0 : rows.size() / dim; }
  void fill_case(std::size_t i, Observation& out) const;
  void recompute_mean();
};

// Bag-of-words corpus with sparse count rows.
struct BowDataset {
  std::size_t vocab_size = 0;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> docs;  // (word_id, count)
  std::vector<double> lengths;  // row sums
  std::vector<double> mean;     // mean count vector

  std::size_t n_cases() const { return docs.size(); }
  void fill_case(std::size_t i, Observation& out) const;
  void recompute_mean();
};

enum class BinaryFormat { idx, dense_text };

// IDX: big-endian magic 0x00000803 with (cases, rows, cols) dims. Raw
// grayscale bytes are thresholded at >= 128; files whose bytes are already
// all in {0,1} pass through unchanged. dense-text: one case per line of
// space-separated {0,1}.
BinaryDataset load_binary_matrix(const std::string& path, BinaryFormat format);

// One case per line, space-separated integers.
void save_dense_text(const BinaryDataset& data, const std::string& path);

// Lines of `doc_id word_id count`, 0-based ids, grouped by non-decreasing
// doc_id. The vocabulary size is the largest word id plus one.
BowDataset load_bow(const std::string& path);

// Deterministic disjoint split; the training-side mean is recomputed.
std::pair<BinaryDataset, BinaryDataset> split_validation(const BinaryDataset& data,
                                                         std::size_t n_valid,
                                                         std::uint64_t seed);
std::pair<BowDataset, BowDataset> split_validation(const BowDataset& data, std::size_t n_valid,
                                                   std::uint64_t seed);

// One minibatch of case indices, drawn uniformly with replacement.
std::vector<std::size_t> draw_minibatch(std::size_t n_cases, std::size_t batch_size,
                                        RngStream& rng);

// Type-erased case access shared by the trainers; views borrow the dataset
// and must not outlive it.
struct DatasetView {
  VisibleKind kind = VisibleKind::bernoulli;
  std::size_t n_cases = 0;
  std::size_t dim = 0;
  const std::vector<double>* mean = nullptr;
  std::function<void(std::size_t, Observation&)> fill_case;
  std::function<std::size_t(std::size_t)> doc_length;  // multinomial only
};

DatasetView view_of(const BinaryDataset& data);
DatasetView view_of(const BowDataset& data);

}  // namespace nvil
