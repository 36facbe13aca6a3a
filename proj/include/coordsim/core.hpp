#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coordsim {

/// Axis of a product alphabet: a name (e.g. "U", "W", "Y") and a symbol count.
struct Alphabet {
  std::string name;
  int size = 0;

  friend bool operator==(const Alphabet&, const Alphabet&) = default;
};

/// Thrown when axes of two objects do not line up (names, sizes, collisions).
class shape_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation would exceed a configured state-count cap.
class resource_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One symbol per axis, in the canonical (sorted-by-name) axis order.
using Symbols = std::vector<int>;

inline std::size_t cell_count(const std::vector<Alphabet>& axes) {
  std::size_t n = 1;
  for (const auto& a : axes) n *= static_cast<std::size_t>(a.size);
  return n;
}

// Row-major flat index, last axis fastest.
inline std::size_t flat_index(const std::vector<Alphabet>& axes, const Symbols& sym) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    idx = idx * static_cast<std::size_t>(axes[i].size) + static_cast<std::size_t>(sym[i]);
  }
  return idx;
}

inline Symbols unflat_index(const std::vector<Alphabet>& axes, std::size_t flat) {
  Symbols sym(axes.size(), 0);
  for (std::size_t i = axes.size(); i-- > 0;) {
    const auto s = static_cast<std::size_t>(axes[i].size);
    sym[i] = static_cast<int>(flat % s);
    flat /= s;
  }
  return sym;
}

/// Odometer step over the product alphabet; returns false after the last cell.
inline bool advance_symbols(const std::vector<Alphabet>& axes, Symbols& sym) {
  for (std::size_t i = axes.size(); i-- > 0;) {
    if (++sym[i] < axes[i].size) return true;
    sym[i] = 0;
  }
  return false;
}

/// Neumaier compensated accumulator; keeps cell sums exact enough to validate
/// normalization at the 1e-12 level even over millions of cells.
struct KahanSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace coordsim
