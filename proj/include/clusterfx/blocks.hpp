#pragma once

// Blocks of standardized excesses, their cores, and the blocking scheme.
//
// A row X_{n,1..n} with values in E ⊆ R^d is stored flat (n*d doubles).
// Blocks and cores are non-owning views into that storage.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clusterfx {

// Non-owning view of consecutive points of E ⊆ R^d.
class BlockView {
 public:
  BlockView() = default;
  // Throws StructuralError if data.size() is not a multiple of dim, or dim == 0.
  BlockView(std::span<const double> data, std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return data_.empty(); }
  std::span<const double> data() const { return data_; }

  std::span<const double> point(std::size_t i) const {
    return data_.subspan(i * dim_, dim_);
  }
  // Scalar access for d = 1 rows.
  double operator[](std::size_t i) const { return data_[i * dim_]; }

  // Exact comparison against the origin.
  bool is_zero(std::size_t i) const;

  BlockView subview(std::size_t first, std::size_t count) const {
    return BlockView(data_.subspan(first * dim_, count * dim_), dim_, Trusted{});
  }
  // x^{(k)}: the first k points, or the whole block if it is shorter.
  BlockView prefix(std::size_t k) const {
    return subview(0, k < size() ? k : size());
  }

 private:
  struct Trusted {};
  BlockView(std::span<const double> data, std::size_t dim, Trusted)
      : data_(data), dim_(dim) {}

  std::span<const double> data_;
  std::size_t dim_ = 1;
};

// Owning vector of points; used for hand-built blocks and tail-chain samples.
class Vector {
 public:
  Vector() = default;
  Vector(std::vector<double> flat, std::size_t dim);
  // Scalar components (d = 1).
  static Vector scalars(std::vector<double> values);
  // Throws StructuralError when the points disagree in dimension.
  static Vector from_points(const std::vector<std::vector<double>>& points);
  static Vector zeros(std::size_t count, std::size_t dim = 1);

  BlockView view() const { return BlockView(values_, dim_); }
  operator BlockView() const { return view(); }  // NOLINT
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return values_.size() / dim_; }
  const std::vector<double>& flat() const { return values_; }

  // Concatenation 0^before ⊕ x ⊕ 0^after.
  Vector padded(std::size_t before, std::size_t after) const;

 private:
  std::vector<double> values_;
  std::size_t dim_ = 1;
};

// The core x^c of a block: its points from the first to the last nonzero one.
struct Core {
  BlockView values;        // empty view for the empty core
  std::size_t offset = 0;  // 0-based position of the first nonzero point
  std::size_t length = 0;  // L(x); 0 iff the block is zero

  bool empty() const { return length == 0; }
  // l_1 as a 1-based index, absent for the empty core.
  std::optional<std::size_t> start_index() const {
    if (empty()) return std::nullopt;
    return offset + 1;
  }
};

Core extract_core(const BlockView& block);

// (r_n, m_n, l_n) for a row of length n.
class Blocking {
 public:
  // Throws ConfigError unless 1 <= small_block_length < block_length <= row_length.
  static Blocking make(std::size_t row_length, std::size_t block_length,
                       std::size_t small_block_length);

  std::size_t row_length() const { return row_length_; }
  std::size_t block_length() const { return block_length_; }
  std::size_t num_blocks() const { return num_blocks_; }
  std::size_t small_block_length() const { return small_block_length_; }
  // Observations beyond r_n * m_n.
  std::size_t remainder_length() const {
    return row_length_ - block_length_ * num_blocks_;
  }

  // Desk-scale proxies for the rate conditions: r_n <= n/10, l_n <= r_n/10.
  // Violations are reported, never fatal.
  std::vector<std::string> warnings() const;

 private:
  std::size_t row_length_ = 0;
  std::size_t block_length_ = 0;
  std::size_t num_blocks_ = 0;
  std::size_t small_block_length_ = 0;
};

struct Segmentation {
  std::vector<BlockView> blocks;  // Y_{n,1..m_n}
  BlockView remainder;            // X_{n, r_n m_n + 1 .. n}, possibly empty
};

// Throws ConfigError if the row length differs from blocking.row_length().
Segmentation segment_blocks(const BlockView& row, const Blocking& blocking);

}  // namespace clusterfx
