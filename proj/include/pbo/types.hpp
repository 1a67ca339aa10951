#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pbo {

using Vector = std::vector<double>;

/// Binary design: one 0/1 entry per candidate.
using Design = std::vector<std::uint8_t>;

/// Entries within this distance of 0 or 1 are treated as exactly degenerate.
inline constexpr double kDegeneracyTolerance = 1e-12;

// Error hierarchy. Every failure the library reports derives from pbo::Error.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct InfeasibleError : Error {
  using Error::Error;
};
struct IndexError : Error {
  using Error::Error;
};
struct OverflowError : Error {
  using Error::Error;
};
struct EnumerationCapError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ObjectiveError : Error {
  using Error::Error;
};

/// Dense row-major matrix. Only what the library needs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::size_t popcount(const Design& d) {
  return static_cast<std::size_t>(std::count(d.begin(), d.end(), std::uint8_t{1}));
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Design as a '0'/'1' string, index 0 first.
inline std::string to_bitstring(const Design& d) {
  std::string s(d.size(), '0');
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i]) s[i] = '1';
  return s;
}

inline Design from_bitstring(const std::string& s) {
  Design d(s.size(), 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '1')
      d[i] = 1;
    else if (s[i] != '0')
      throw DomainError("bitstring contains a character other than '0' or '1'");
  }
  return d;
}

/// Binomial coefficient as an exact integer (throws when it does not fit).
inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max())
      throw OverflowError("binomial coefficient exceeds 64 bits");
  }
  return static_cast<std::uint64_t>(r);
}

/// Binomial coefficient as a double; usable far beyond 64 bits.
inline double binomial_real(double n, double k) {
  if (k < 0 || k > n) return 0.0;
  return std::exp(std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1));
}

}  // namespace pbo
