#include "vcdf/spd.hpp"

#include <quadmath.h>

namespace vcdf::detail {

template <>
struct ScalarOps<__float128> {
  static __float128 sqrt(__float128 x) { return sqrtq(x); }
  static __float128 abs(__float128 x) { return fabsq(x); }
  static __float128 epsilon() { return ldexpq(1, -112); }
};

SymEigen3<double> extended_precision_eigen(const SymMat3<double>& s) {
  std::array<std::array<__float128, 3>, 3> a{};
  std::array<std::array<__float128, 3>, 3> v{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a[r][c] = s(r, c);
  jacobi_sweep3<__float128, ScalarOps<__float128>>(a, v);

  // Re-orthonormalize in binary128 before rounding the basis to double.
  for (int c = 0; c < 3; ++c) {
    for (int prev = 0; prev < c; ++prev) {
      __float128 dot = 0;
      for (int r = 0; r < 3; ++r) dot += v[r][c] * v[r][prev];
      for (int r = 0; r < 3; ++r) v[r][c] -= dot * v[r][prev];
    }
    __float128 nrm = 0;
    for (int r = 0; r < 3; ++r) nrm += v[r][c] * v[r][c];
    nrm = sqrtq(nrm);
    for (int r = 0; r < 3; ++r) v[r][c] /= nrm;
  }

  Vector3<double> values;
  Matrix3<double> vectors;
  for (int k = 0; k < 3; ++k) values[k] = static_cast<double>(a[k][k]);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) vectors(r, c) = static_cast<double>(v[r][c]);
  return sorted_eigen(values, vectors);
}

}  // namespace vcdf::detail
