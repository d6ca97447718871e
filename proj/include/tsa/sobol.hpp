#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tsa/common.hpp"
#include "tsa/sobol_table.hpp"

namespace tsa {

// Gray-code Sobol sequence over [0,1)^d with 32-bit precision. Deterministic
// given (dimension, skip); skip defaults to 1 which drops the all-zeros
// point.
class SobolGenerator {
 public:
  static constexpr int kMaxDimension = static_cast<int>(detail::kSobolDims.size());
  static constexpr int kBits = 32;

  explicit SobolGenerator(int dimension, std::uint64_t skip = 1) : dim_(dimension) {
    if (dimension < 1) fail(ErrorKind::BadArgument, "sobol dimension must be >= 1");
    if (dimension > kMaxDimension)
      fail(ErrorKind::BadArgument, "sobol dimension " + std::to_string(dimension) + " exceeds the shipped table (" +
                                       std::to_string(kMaxDimension) + ")");
    v_.assign(dim_, {});
    for (int d = 0; d < dim_; ++d) {
      const auto& row = detail::kSobolDims[d];
      const int s = static_cast<int>(row.degree);
      std::array<std::uint32_t, kBits + 1> m{};
      if (row.poly <= 1u) {
        m.fill(1u);  // first dimension: van der Corput
      } else {
        for (int k = 1; k <= s && k <= kBits; ++k) m[k] = row.m_init[k - 1];
        for (int k = s + 1; k <= kBits; ++k) {
          // recurrence over the primitive polynomial bits
          std::uint32_t val = m[k - s] ^ (m[k - s] << s);
          for (int j = 1; j < s; ++j)
            if ((row.poly >> (s - j)) & 1u) val ^= m[k - j] << j;
          m[k] = val;
        }
      }
      for (int k = 1; k <= kBits; ++k) v_[d][k - 1] = m[k] << (kBits - k);
    }
    state_.assign(dim_, 0);
    for (std::uint64_t i = 0; i < skip; ++i) advance();
  }

  int dimension() const { return dim_; }
  std::uint64_t index() const { return index_; }

  // next n points; the generator index advances by n
  std::vector<std::vector<double>> block(std::size_t n) {
    std::vector<std::vector<double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> p(dim_);
      for (int d = 0; d < dim_; ++d) p[d] = state_[d] * 0x1p-32;
      out.push_back(std::move(p));
      advance();
    }
    return out;
  }

 private:
  void advance() {
    // position of the lowest zero bit of the current index
    std::uint64_t i = index_;
    int c = 0;
    while (i & 1u) {
      i >>= 1;
      ++c;
    }
    for (int d = 0; d < dim_; ++d) state_[d] ^= v_[d][c];
    ++index_;
  }

  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::array<std::uint32_t, kBits>> v_;
  std::vector<std::uint32_t> state_;
};

}  // namespace tsa
