// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nvil {

void BinaryDataset::fill_case(std::size_t i, Observation& out) const {
  out.resize(dim);
  const std::uint8_t* row = rows.data() + i * dim;
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<double>(row[j]);
}

void BinaryDataset::recompute_mean() {
  mean.assign(dim, 0.0);
  const std::size_t n = n_cases();
  if (n == 0) return;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* row = rows.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
}

void BowDataset::fill_case(std::size_t i, Observation& out) const {
  out.assign(vocab_size, 0.0);
  for (const auto& [word, count] : docs[i]) out[word] = count;
}

void BowDataset::recompute_mean() {
  mean.assign(vocab_size, 0.0);
  if (docs.empty()) return;
  for (const auto& doc : docs) {
    for (const auto& [word, count] : doc) mean[word] += count;
  }
  for (double& m : mean) m /= static_cast<double>(docs.size());
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("data-io: truncated IDX header in '" + path + "'");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

BinaryDataset load_idx(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("data-io: cannot open '" + path + "'");
  const std::uint32_t magic = read_be32(f, path);
  if (magic != 0x00000803u) {
    throw std::runtime_error("data-io: bad IDX magic in '" + path + "'");
  }
  const std::uint32_t n = read_be32(f, path);
  const std::uint32_t r = read_be32(f, path);
  const std::uint32_t c = read_be32(f, path);
  BinaryDataset data;
  data.dim = static_cast<std::size_t>(r) * c;
  data.rows.resize(static_cast<std::size_t>(n) * data.dim);
  f.read(reinterpret_cast<char*>(data.rows.data()),
         static_cast<std::streamsize>(data.rows.size()));
  if (static_cast<std::size_t>(f.gcount()) != data.rows.size()) {
    throw std::runtime_error("data-io: truncated IDX payload in '" + path + "'");
  }
  // Already-binarized files pass through; raw grayscale is thresholded.
  const bool prebinarized =
      std::all_of(data.rows.begin(), data.rows.end(), [](std::uint8_t b) { return b <= 1; });
  if (!prebinarized) {
    for (auto& b : data.rows) b = (b >= 128) ? 1 : 0;
  }
  data.recompute_mean();
  return data;
}

BinaryDataset load_dense_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("data-io: cannot open '" + path + "'");
  BinaryDataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<std::uint8_t> row;
    std::string tok;
    while (ss >> tok) {
      if (tok == "0") {
        row.push_back(0);
      } else if (tok == "1") {
        row.push_back(1);
      } else {
        throw std::runtime_error("data-io: non-binary entry '" + tok + "' at line " +
                                 std::to_string(line_no) + " of '" + path + "'");
      }
    }
    if (data.dim == 0) {
      data.dim = row.size();
    } else if (row.size() != data.dim) {
      throw std::runtime_error("data-io: ragged row at line " + std::to_string(line_no) +
                               " of '" + path + "'");
    }
    data.rows.insert(data.rows.end(), row.begin(), row.end());
  }
  data.recompute_mean();
  return data;
}

}  // namespace

BinaryDataset load_binary_matrix(const std::string& path, BinaryFormat format) {
  return format == BinaryFormat::idx ? load_idx(path) : load_dense_text(path);
}

void save_dense_text(const BinaryDataset& data, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("data-io: cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < data.n_cases(); ++i) {
    const std::uint8_t* row = data.rows.data() + i * data.dim;
    for (std::size_t j = 0; j < data.dim; ++j) {
      if (j) f << ' ';
      f << static_cast<int>(row[j]);
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("data-io: write failed for '" + path + "'");
}

BowDataset load_bow(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("data-io: cannot open '" + path + "'");
  BowDataset data;
  std::string line;
  std::size_t line_no = 0;
  long long last_doc = -1;
  std::uint32_t max_word = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long long doc_id, word_id;
    double count;
    if (!(ss >> doc_id >> word_id >> count)) {
      throw std::runtime_error("data-io: malformed line " + std::to_string(line_no) + " in '" +
                               path + "'");
    }
    if (doc_id < 0 || word_id < 0) {
      throw std::runtime_error("data-io: negative id at line " + std::to_string(line_no) +
                               " in '" + path + "'");
    }
    if (count < 1.0) {
      throw std::runtime_error("data-io: count below 1 at line " + std::to_string(line_no) +
                               " in '" + path + "'");
    }
    if (doc_id < last_doc) {
      throw std::runtime_error("data-io: input not sorted by doc_id at line " +
                               std::to_string(line_no) + " in '" + path + "'");
    }
    while (static_cast<long long>(data.docs.size()) <= doc_id) data.docs.emplace_back();
    data.docs[static_cast<std::size_t>(doc_id)].emplace_back(
        static_cast<std::uint32_t>(word_id), count);
    max_word = std::max(max_word, static_cast<std::uint32_t>(word_id));
    last_doc = doc_id;
  }
  data.vocab_size = data.docs.empty() ? 0 : max_word + 1;
  data.lengths.assign(data.docs.size(), 0.0);
  for (std::size_t d = 0; d < data.docs.size(); ++d) {
    for (const auto& [word, count] : data.docs[d]) data.lengths[d] += count;
  }
  data.recompute_mean();
  return data;
}

namespace {

// Deterministic permutation split: validation takes the first n_valid
// shuffled indices; both sides keep their original relative order.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, std::size_t n_valid, std::uint64_t seed) {
  if (n_valid >= n) {
    throw std::invalid_argument("data-io: validation size must be smaller than the dataset");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  RngStream rng(seed, stream_key(0x73706C69));  // split stream
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.next_index(i)]);
  }
  std::vector<std::size_t> valid(perm.begin(), perm.begin() + n_valid);
  std::vector<std::size_t> train(perm.begin() + n_valid, perm.end());
  std::sort(valid.begin(), valid.end());
  std::sort(train.begin(), train.end());
  return {train, valid};
}

}  // namespace

std::pair<BinaryDataset, BinaryDataset> split_validation(const BinaryDataset& data,
                                                         std::size_t n_valid,
                                                         std::uint64_t seed) {
  const auto [train_idx, valid_idx] = split_indices(data.n_cases(), n_valid, seed);
  auto take = [&](const std::vector<std::size_t>& idx) {
    BinaryDataset out;
    out.dim = data.dim;
    out.rows.reserve(idx.size() * data.dim);
    for (std::size_t i : idx) {
      const std::uint8_t* row = data.rows.data() + i * data.dim;
      out.rows.insert(out.rows.end(), row, row + data.dim);
    }
    return out;
  };
  auto train = take(train_idx);
  auto valid = take(valid_idx);
  train.recompute_mean();
  valid.mean = train.mean;  // centering always uses the training mean
  return {std::move(train), std::move(valid)};
}

std::pair<BowDataset, BowDataset> split_validation(const BowDataset& data, std::size_t n_valid,
                                                   std::uint64_t seed) {
  const auto [train_idx, valid_idx] = split_indices(data.n_cases(), n_valid, seed);
  auto take = [&](const std::vector<std::size_t>& idx) {
    BowDataset out;
    out.vocab_size = data.vocab_size;
    for (std::size_t i : idx) {
      out.docs.push_back(data.docs[i]);
      out.lengths.push_back(data.lengths[i]);
    }
    return out;
  };
  auto train = take(train_idx);
  auto valid = take(valid_idx);
  train.recompute_mean();
  valid.mean = train.mean;
  return {std::move(train), std::move(valid)};
}

std::vector<std::size_t> draw_minibatch(std::size_t n_cases, std::size_t batch_size,
                                        RngStream& rng) {
  if (n_cases == 0) throw std::invalid_argument("data-io: cannot draw from an empty dataset");
  if (batch_size < 1) throw std::invalid_argument("data-io: batch size must be >= 1");
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.next_index(n_cases);
  return idx;
}

DatasetView view_of(const BinaryDataset& data) {
  DatasetView v;
  v.kind = VisibleKind::bernoulli;
  v.n_cases = data.n_cases();
  v.dim = data.dim;
  v.mean = &data.mean;
  v.fill_case = [&data](std::size_t i, Observation& out) { data.fill_case(i, out); };
  return v;
}

DatasetView view_of(const BowDataset& data) {
  DatasetView v;
  v.kind = VisibleKind::multinomial;
  v.n_cases = data.n_cases();
  v.dim = data.vocab_size;
  v.mean = &data.mean;
  v.fill_case = [&data](std::size_t i, Observation& out) { data.fill_case(i, out); };
  v.doc_length = [&data](std::size_t i) { return static_cast<std::size_t>(data.lengths[i]); };
  return v;
}

}  // namespace nvil
