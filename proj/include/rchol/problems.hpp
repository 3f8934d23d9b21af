#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rchol/error.hpp"
#include "rchol/rng.hpp"
#include "rchol/sparse.hpp"

namespace rchol {

enum class FaceAverage { arithmetic, harmonic };

struct GridSpec {
  index_t n = 1;             // points per dimension
  double contrast = 1.0;     // rho >= 1
  std::uint64_t seed = 0;
  double width = 4.0;        // Gaussian standard deviation in grid spacings
  double truncation = 3.0;   // kernel radius in standard deviations
  FaceAverage average = FaceAverage::arithmetic;
};

namespace detail {

inline index_t grid_index(index_t n, index_t x, index_t y, index_t z) {
  return x + n * (y + n * z);
}

inline void check_grid(index_t n) {
  if (n < 1) throw error(errc::precondition, "grid needs n >= 1");
  if (static_cast<std::int64_t>(n) * n * n > (std::int64_t{1} << 31) - 1)
    throw error(errc::precondition, "grid too large for 32-bit indices");
}

/// Builds the 7-point operator from a face-coefficient callback. Dirichlet
/// faces contribute to the diagonal only.
template <class Face>
SparseSym assemble_7pt(index_t n, Face&& face) {
  check_grid(n);
  const index_t total = n * n * n;
  CscData d;
  d.n = total;
  d.col_ptr.reserve(static_cast<std::size_t>(total) + 1);
  d.row_idx.reserve(7 * static_cast<std::size_t>(total));
  d.values.reserve(7 * static_cast<std::size_t>(total));
  // Column j lists its neighbors in increasing index order: -z, -y, -x, self, +x, +y, +z.
  for (index_t z = 0; z < n; ++z)
    for (index_t y = 0; y < n; ++y)
      for (index_t x = 0; x < n; ++x) {
        const index_t j = grid_index(n, x, y, z);
        const double fxm = face(j, x > 0 ? j - 1 : -1);
        const double fxp = face(j, x + 1 < n ? j + 1 : -1);
        const double fym = face(j, y > 0 ? j - n : -1);
        const double fyp = face(j, y + 1 < n ? j + n : -1);
        const double fzm = face(j, z > 0 ? j - n * n : -1);
        const double fzp = face(j, z + 1 < n ? j + n * n : -1);
        auto put = [&](index_t r, double v) {
          d.row_idx.push_back(r);
          d.values.push_back(v);
        };
        if (z > 0) put(j - n * n, -fzm);
        if (y > 0) put(j - n, -fym);
        if (x > 0) put(j - 1, -fxm);
        put(j, fxm + fxp + fym + fyp + fzm + fzp);
        if (x + 1 < n) put(j + 1, -fxp);
        if (y + 1 < n) put(j + n, -fyp);
        if (z + 1 < n) put(j + n * n, -fzp);
        d.col_ptr.push_back(static_cast<offset_t>(d.row_idx.size()));
      }
  return SparseSym::from_csc_unchecked(std::move(d));
}

inline void blur_axis(std::vector<double>& field, index_t n, int axis,
                      const std::vector<double>& kernel) {
  const auto radius = static_cast<index_t>(kernel.size()) - 1;
  const index_t stride = axis == 0 ? 1 : axis == 1 ? n : n * n;
  std::vector<double> line(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  for (index_t a = 0; a < n; ++a)
    for (index_t b = 0; b < n; ++b) {
      // base index of the line with the blurred coordinate at 0
      index_t base;
      if (axis == 0)
        base = grid_index(n, 0, a, b);
      else if (axis == 1)
        base = grid_index(n, a, 0, b);
      else
        base = grid_index(n, a, b, 0);
      for (index_t t = 0; t < n; ++t) line[t] = field[base + t * stride];
      for (index_t t = 0; t < n; ++t) {
        double s = 0.0, w = 0.0;
        const index_t lo = std::max<index_t>(0, t - radius);
        const index_t hi = std::min<index_t>(n - 1, t + radius);
        for (index_t q = lo; q <= hi; ++q) {
          const double k = kernel[std::abs(q - t)];
          s += k * line[q];
          w += k;
        }
        out[t] = s / w;
      }
      for (index_t t = 0; t < n; ++t) field[base + t * stride] = out[t];
    }
}

}  // namespace detail

/// 7-point finite-difference Laplacian on an n^3 grid with Dirichlet
/// boundary, unscaled: diagonal 6, -1 between grid neighbors.
inline SparseSym poisson7(index_t n) {
  return detail::assemble_7pt(n, [](index_t, index_t) { return 1.0; });
}

/// Two-valued high-contrast coefficient per cell.
///
/// Uniform draws per cell, their median, a separable Gaussian blur (standard
/// deviation `width` cells, truncated at `truncation` deviations, renormalized
/// at the boundary), and quantization against the median to rho^{-1/2} or
/// rho^{1/2}.
inline std::vector<double> contrast_field(const GridSpec& spec) {
  detail::check_grid(spec.n);
  if (!(spec.contrast >= 1.0)) throw error(errc::precondition, "contrast must be >= 1");
  const index_t n = spec.n;
  const auto total = static_cast<std::size_t>(n) * n * n;
  std::vector<double> field(total);
  RngStream rng(spec.seed);
  for (auto& v : field) v = rng.uniform();

  std::vector<double> sorted = field;
  const std::size_t mid = total / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  double median = sorted[mid];
  if (total % 2 == 0) {
    const double below = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + below);
  }

  if (spec.width > 0.0) {
    const auto radius = static_cast<index_t>(std::ceil(spec.truncation * spec.width));
    std::vector<double> kernel(static_cast<std::size_t>(radius) + 1);
    for (index_t q = 0; q <= radius; ++q)
      kernel[q] = std::exp(-0.5 * (q / spec.width) * (q / spec.width));
    for (int axis = 0; axis < 3; ++axis) detail::blur_axis(field, n, axis, kernel);
  }

  const double lo = 1.0 / std::sqrt(spec.contrast);
  const double hi = std::sqrt(spec.contrast);
  for (auto& v : field) v = v <= median ? lo : hi;
  return field;
}

/// Variable-coefficient 7-point operator for div(a grad u) with the
/// contrast field of `spec`. Interior faces take the mean of the two cell
/// coefficients; a Dirichlet face takes its cell's coefficient.
inline SparseSym poisson_var(const GridSpec& spec, const std::vector<double>& field) {
  const auto total = static_cast<std::size_t>(spec.n) * spec.n * spec.n;
  if (field.size() != total) throw error(errc::dimension_mismatch, "coefficient field size");
  const bool harmonic = spec.average == FaceAverage::harmonic;
  return detail::assemble_7pt(spec.n, [&](index_t j, index_t nb) {
    if (nb < 0) return field[j];
    const double a = field[j], b = field[nb];
    return harmonic ? 2.0 * a * b / (a + b) : 0.5 * (a + b);
  });
}

inline SparseSym poisson_var(const GridSpec& spec) { return poisson_var(spec, contrast_field(spec)); }

}  // namespace rchol
