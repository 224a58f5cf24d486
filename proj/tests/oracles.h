#pragma once

// Independent reference helpers shared by the model tests and the acceptance
// binary: antenna permutations and a small complex linear algebra kit for the
// pseudo-inverse oracle.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

#include "camd/model/config.h"
#include "camd/diffcore/tensor.h"

namespace camd::testing {

using TensorD = diff::Tensor<double>;
using cplx = std::complex<double>;
using model::ModelConfig;
using model::Variant;

// Reorders axis 1 (antennas) of a [B x A x ...] tensor: out[:, a] = x[:, perm[a]].
template <typename T>
diff::Tensor<T> permute_antennas(const diff::Tensor<T>& x, const std::vector<std::size_t>& perm) {
  const std::size_t B = x.dim(0), A = x.dim(1), inner = x.numel() / (B * A);
  diff::Tensor<T> out(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t a = 0; a < A; ++a)
      std::copy_n(x.ptr() + (b * A + perm[a]) * inner, inner, out.ptr() + (b * A + a) * inner);
  return out;
}

inline std::vector<std::vector<std::size_t>> all_permutations(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<std::size_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline double max_abs_diff(const TensorD& a, const TensorD& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline ModelConfig small_config(Variant v = Variant::full, std::size_t antennas = 2) {
  ModelConfig c;
  c.num_classes = 5;
  c.nt = c.nr = antennas;
  c.length = 32;
  c.C = 16;
  c.C_cc = 8;
  c.heads = 2;
  c.heads_cc = 2;
  c.variant = v;
  return c;
}

// ---- independent complex linear algebra for the pseudo-inverse oracle ----

using CMat = std::vector<std::vector<cplx>>;

inline CMat conj_transpose(const CMat& m) {
  CMat t(m[0].size(), std::vector<cplx>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[0].size(); ++j) t[j][i] = std::conj(m[i][j]);
  return t;
}

inline CMat multiply(const CMat& a, const CMat& b) {
  CMat c(a.size(), std::vector<cplx>(b[0].size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Gauss-Jordan with partial pivoting.
inline CMat inverse(CMat m) {
  const std::size_t n = m.size();
  CMat inv(n, std::vector<cplx>(n));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    std::swap(m[col], m[piv]);
    std::swap(inv[col], inv[piv]);
    const cplx d = m[col][col];
    for (std::size_t k = 0; k < n; ++k) {
      m[col][k] /= d;
      inv[col][k] /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const cplx f = m[r][col];
      for (std::size_t k = 0; k < n; ++k) {
        m[r][k] -= f * m[col][k];
        inv[r][k] -= f * inv[col][k];
      }
    }
  }
  return inv;
}

// (H^H H)^-1 H^H, Nt x Nr.
inline CMat pinv(const CMat& h) {
  const CMat hh = conj_transpose(h);
  return multiply(inverse(multiply(hh, h)), hh);
}

// Condition number of an Nr x 2 matrix from the eigenvalues of H^H H.
inline double condition_2col(const CMat& h) {
  const CMat g = multiply(conj_transpose(h), h);
  const double a = g[0][0].real(), d = g[1][1].real(), b2 = std::norm(g[0][1]);
  const double tr = a + d, disc = std::sqrt(std::max(0.0, (a - d) * (a - d) + 4 * b2));
  return std::sqrt((tr + disc) / (tr - disc));
}

}  // namespace camd::testing
