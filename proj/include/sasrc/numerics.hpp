#pragma once

// Dense small-matrix kernels: symmetric eigenvalues, definiteness, matrix
// exponential with affine input, discrete Lyapunov equation.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sasrc/errors.hpp"

namespace sasrc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical tolerances shared across modules. Defaults sit well below the
/// certificate margins met in practice; every consumer takes a copy.
struct Tolerances {
  double eig_rel = 1e-10;              // symmetric eigenvalue accuracy, relative to max(1, |M|)
  double spectral_rel = 1e-9;          // spectral radius accuracy
  double lyapunov_residual = 1e-9;     // |A'XA - X + W| / |W|
  double limit_cycle_residual = 1e-10;
  double feas_tol = 1e-7;              // LMI feasibility threshold on the min-eigenvalue margin
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Symmetric matrix with exactly mirrored storage.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Eigen::Index n) : m_(Matrix::Zero(n, n)) {
    require(n >= 1, Errc::InvalidInput, "SymMatrix dimension must be >= 1");
  }

  /// Accepts only exactly symmetric, finite input.
  static SymMatrix from(const Matrix& m) {
    require(m.rows() == m.cols() && m.rows() >= 1, Errc::InvalidInput, "SymMatrix must be square, n >= 1");
    require(all_finite(m), Errc::InvalidInput, "SymMatrix has non-finite entries");
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i + 1; j < m.cols(); ++j)
        require(m(i, j) == m(j, i), Errc::InvalidInput, "matrix is not exactly symmetric");
    SymMatrix s;
    s.m_ = m;
    return s;
  }

  /// (M + M') / 2, written so both triangles hold bit-identical values.
  static SymMatrix symmetrize(const Matrix& m) {
    require(m.rows() == m.cols() && m.rows() >= 1, Errc::InvalidInput, "SymMatrix must be square, n >= 1");
    require(all_finite(m), Errc::InvalidInput, "SymMatrix has non-finite entries");
    SymMatrix s;
    s.m_ = m;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
        const double v = 0.5 * (m(i, j) + m(j, i));
        s.m_(i, j) = v;
        s.m_(j, i) = v;
      }
    return s;
  }

  static SymMatrix identity(Eigen::Index n) {
    SymMatrix s(n);
    s.m_.setIdentity();
    return s;
  }

  Eigen::Index dim() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  void set(Eigen::Index i, Eigen::Index j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }
  const Matrix& matrix() const { return m_; }
  operator const Matrix&() const { return m_; }  // NOLINT(google-explicit-constructor)

 private:
  Matrix m_;
};

struct EigenReport {
  Vector eigenvalues;   // ascending (symmetric case) or ascending moduli (general case)
  double min_eig = 0.0;
  Matrix eigenvectors;  // columns match eigenvalues; empty for general inputs
};

namespace detail {

inline void sort_eigenpairs(Vector& values, Matrix& vectors) {
  const auto n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  Vector sv(n);
  Matrix sm(vectors.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sv(i) = values(order[static_cast<std::size_t>(i)]);
    sm.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
  }
  values = std::move(sv);
  vectors = std::move(sm);
}

}  // namespace detail

/// Cyclic Jacobi eigensolver for symmetric matrices.
inline EigenReport sym_eigs(const SymMatrix& m) {
  require(all_finite(m.matrix()), Errc::InvalidInput, "sym_eigs: non-finite entries");
  const Eigen::Index n = m.dim();
  Matrix a = m.matrix();
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-17 * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  EigenReport r;
  r.eigenvalues = a.diagonal();
  r.eigenvectors = std::move(v);
  detail::sort_eigenpairs(r.eigenvalues, r.eigenvectors);
  r.min_eig = r.eigenvalues(0);
  return r;
}

inline double min_eig(const SymMatrix& m) { return sym_eigs(m).min_eig; }

/// True iff the smallest eigenvalue exceeds `margin`.
inline bool is_positive_definite(const SymMatrix& m, double margin = 0.0) {
  return sym_eigs(m).min_eig > margin;
}

/// Eigenvalue moduli of a general square matrix, ascending.
inline EigenReport general_eig_moduli(const Matrix& m) {
  require(m.rows() == m.cols() && m.rows() >= 1, Errc::InvalidInput, "matrix must be square");
  require(all_finite(m), Errc::InvalidInput, "non-finite entries");
  Eigen::EigenSolver<Matrix> es(m, false);
  require(es.info() == Eigen::Success, Errc::InvalidInput, "eigenvalue iteration did not converge");
  EigenReport r;
  r.eigenvalues = es.eigenvalues().cwiseAbs();
  std::sort(r.eigenvalues.data(), r.eigenvalues.data() + r.eigenvalues.size());
  r.min_eig = r.eigenvalues(0);
  return r;
}

inline double spectral_radius(const Matrix& m) {
  const auto r = general_eig_moduli(m);
  return r.eigenvalues(r.eigenvalues.size() - 1);
}

/// exp(A) by scaling and squaring with the degree-13 Pade approximant.
inline Matrix expm(const Matrix& a) {
  require(a.rows() == a.cols(), Errc::InvalidInput, "expm: matrix must be square");
  require(all_finite(a), Errc::InvalidInput, "expm: non-finite entries");
  const Eigen::Index n = a.rows();
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta13))));
  const Matrix as = a / std::ldexp(1.0, squarings);

  const Matrix id = Matrix::Identity(n, n);
  const Matrix a2 = as * as;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  const Matrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
  const Matrix u = as * u_inner;
  const Matrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

struct AffineDiscretization {
  Matrix ad;  // exp(F T)
  Vector bd;  // int_0^T exp(F s) g ds
};

/// Zero-order-hold discretization of x' = F x + g through the augmented
/// exponential of [[F, g], [0, 0]] T.
inline AffineDiscretization expm_affine(const Matrix& f, const Vector& g, double t) {
  require(t > 0.0 && std::isfinite(t), Errc::InvalidInput, "expm_affine: T must be positive");
  require(f.rows() == f.cols() && f.rows() >= 1, Errc::InvalidInput, "expm_affine: F must be square");
  require(g.size() == f.rows(), Errc::InvalidInput, "expm_affine: g dimension mismatch");
  const Eigen::Index n = f.rows();
  Matrix aug = Matrix::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = f;
  aug.topRightCorner(n, 1) = g;
  const Matrix e = expm(aug * t);
  return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

/// Solves A' X A - X = -W through the vectorized Kronecker system.
inline SymMatrix solve_discrete_lyapunov(const Matrix& a, const SymMatrix& w) {
  require(a.rows() == a.cols() && a.rows() == w.dim(), Errc::InvalidInput, "lyapunov: dimension mismatch");
  require(all_finite(a), Errc::InvalidInput, "lyapunov: non-finite entries");
  require(is_positive_definite(w), Errc::InvalidInput, "lyapunov: W must be positive definite");
  const double rho = spectral_radius(a);
  require(rho < 1.0, Errc::NotSchurStable, "lyapunov: spectral radius " + std::to_string(rho) + " >= 1");

  const Eigen::Index n = a.rows();
  const Eigen::Index nn = n * n;
  // vec(A' X A) = (A' kron A') vec(X), column-major vec.
  Matrix k(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index p = 0; p < n; ++p)
        for (Eigen::Index q = 0; q < n; ++q) k(i * n + p, j * n + q) = a(j, i) * a(q, p);
  k -= Matrix::Identity(nn, nn);

  const Vector rhs = -Eigen::Map<const Vector>(w.matrix().data(), nn);
  const auto lu = k.partialPivLu();
  Vector x = lu.solve(rhs);
  // one step of iterative refinement
  x += lu.solve(rhs - k * x);
  const Matrix xm = Eigen::Map<const Matrix>(x.data(), n, n);
  return SymMatrix::symmetrize(xm);
}

/// Relative residual |A'XA - X + W| / max(1, |W|) in the Frobenius norm.
inline double lyapunov_residual(const Matrix& a, const SymMatrix& x, const SymMatrix& w) {
  const Matrix r = a.transpose() * x.matrix() * a - x.matrix() + w.matrix();
  return r.norm() / std::max(1.0, w.matrix().norm());
}

inline double quad_form(const Vector& v, const Matrix& m) { return v.dot(m * v); }

}  // namespace sasrc
