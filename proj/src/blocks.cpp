#include "clusterfx/blocks.hpp"

#include <algorithm>

#include "clusterfx/errors.hpp"

namespace clusterfx {

BlockView::BlockView(std::span<const double> data, std::size_t dim)
    : data_(data), dim_(dim) {
  if (dim == 0) throw StructuralError("point dimension must be >= 1");
  if (data.size() % dim != 0) {
    throw StructuralError("block storage of " + std::to_string(data.size()) +
                          " values is not a whole number of " +
                          std::to_string(dim) + "-dimensional points");
  }
}

bool BlockView::is_zero(std::size_t i) const {
  const double* p = data_.data() + i * dim_;
  for (std::size_t l = 0; l < dim_; ++l) {
    if (p[l] != 0.0) return false;
  }
  return true;
}

Vector::Vector(std::vector<double> flat, std::size_t dim)
    : values_(std::move(flat)), dim_(dim) {
  if (dim == 0) throw StructuralError("point dimension must be >= 1");
  if (values_.size() % dim != 0) {
    throw StructuralError("vector storage is not a whole number of points");
  }
}

Vector Vector::scalars(std::vector<double> values) {
  return Vector(std::move(values), 1);
}

Vector Vector::from_points(const std::vector<std::vector<double>>& points) {
  if (points.empty()) return Vector({}, 1);
  const std::size_t dim = points.front().size();
  if (dim == 0) throw StructuralError("point dimension must be >= 1");
  std::vector<double> flat;
  flat.reserve(points.size() * dim);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim) {
      throw StructuralError("point " + std::to_string(i + 1) + " has dimension " +
                            std::to_string(points[i].size()) + ", expected " +
                            std::to_string(dim));
    }
    flat.insert(flat.end(), points[i].begin(), points[i].end());
  }
  return Vector(std::move(flat), dim);
}

Vector Vector::zeros(std::size_t count, std::size_t dim) {
  return Vector(std::vector<double>(count * dim, 0.0), dim);
}

Vector Vector::padded(std::size_t before, std::size_t after) const {
  std::vector<double> out((before + size() + after) * dim_, 0.0);
  std::copy(values_.begin(), values_.end(), out.begin() + before * dim_);
  return Vector(std::move(out), dim_);
}

Core extract_core(const BlockView& block) {
  const std::size_t k = block.size();
  std::size_t first = 0;
  while (first < k && block.is_zero(first)) ++first;
  if (first == k) return Core{};
  std::size_t last = k - 1;
  while (block.is_zero(last)) --last;
  const std::size_t length = last - first + 1;
  return Core{block.subview(first, length), first, length};
}

Blocking Blocking::make(std::size_t row_length, std::size_t block_length,
                        std::size_t small_block_length) {
  if (block_length == 0) throw ConfigError("block length r_n must be >= 1");
  if (block_length > row_length) {
    throw ConfigError("block length r_n = " + std::to_string(block_length) +
                      " exceeds row length n = " + std::to_string(row_length));
  }
  if (small_block_length < 1 || small_block_length >= block_length) {
    throw ConfigError("small block length l_n = " +
                      std::to_string(small_block_length) +
                      " must satisfy 1 <= l_n < r_n = " +
                      std::to_string(block_length));
  }
  Blocking b;
  b.row_length_ = row_length;
  b.block_length_ = block_length;
  b.num_blocks_ = row_length / block_length;
  b.small_block_length_ = small_block_length;
  return b;
}

std::vector<std::string> Blocking::warnings() const {
  std::vector<std::string> out;
  if (block_length_ * 10 > row_length_) {
    out.push_back("r_n = " + std::to_string(block_length_) +
                  " exceeds n/10; blocks are not short relative to the row");
  }
  if (small_block_length_ * 10 > block_length_) {
    out.push_back("l_n = " + std::to_string(small_block_length_) +
                  " exceeds r_n/10; small blocks are not negligible");
  }
  return out;
}

Segmentation segment_blocks(const BlockView& row, const Blocking& blocking) {
  if (row.size() != blocking.row_length()) {
    throw ConfigError("row length " + std::to_string(row.size()) +
                      " does not match blocking row length " +
                      std::to_string(blocking.row_length()));
  }
  Segmentation seg;
  const std::size_t r = blocking.block_length();
  seg.blocks.reserve(blocking.num_blocks());
  for (std::size_t j = 0; j < blocking.num_blocks(); ++j) {
    seg.blocks.push_back(row.subview(j * r, r));
  }
  const std::size_t used = r * blocking.num_blocks();
  seg.remainder = row.subview(used, row.size() - used);
  return seg;
}

}  // namespace clusterfx
