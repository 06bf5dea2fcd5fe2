#ifndef HPDNET_HPD_CORE_HPP
#define HPDNET_HPD_CORE_HPP

#include <array>
#include <complex>

#include "hpdnet/errors.hpp"

namespace hpdnet {

using Complex = std::complex<double>;

// Construction tolerance: inputs within this distance of Hermitian are
// symmetrized, anything worse is rejected.
inline constexpr double kHermitianTol = 1e-10;

// Positivity floor separating numerically singular matrices from valid HPD.
inline constexpr double kHpdFloor = 1e-12;

// -----------------------------------------------------------------------------
// Dense 3-vectors and 3x3 matrices over the complex field
// -----------------------------------------------------------------------------

struct Vector3c {
    std::array<Complex, 3> v{};

    Complex& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
    const Complex& operator[](int i) const { return v[static_cast<std::size_t>(i)]; }

    double squared_norm() const {
        return std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]);
    }
};

struct Matrix3c {
    // Row-major entries.
    std::array<Complex, 9> a{};

    Complex& operator()(int i, int j) { return a[static_cast<std::size_t>(3 * i + j)]; }
    const Complex& operator()(int i, int j) const {
        return a[static_cast<std::size_t>(3 * i + j)];
    }

    static Matrix3c identity();
    static Matrix3c zero() { return {}; }
};

Matrix3c operator+(const Matrix3c& x, const Matrix3c& y);
Matrix3c operator-(const Matrix3c& x, const Matrix3c& y);
Matrix3c operator*(const Matrix3c& x, const Matrix3c& y);
Matrix3c operator*(Complex s, const Matrix3c& x);
Vector3c operator*(const Matrix3c& x, const Vector3c& y);

// Conjugate transpose.
Matrix3c adjoint(const Matrix3c& x);
Complex trace(const Matrix3c& x);
double frobenius_norm(const Matrix3c& x);
bool is_finite(const Matrix3c& x);
bool is_finite(const Vector3c& x);

// Outer product k k^H (Hermitian PSD rank-1 as a dense matrix).
Matrix3c outer(const Vector3c& k);

// -----------------------------------------------------------------------------
// Hermitian / HPD value types
// -----------------------------------------------------------------------------

// 3x3 complex matrix equal to its conjugate transpose. Stores the three real
// diagonal entries plus the strict upper triangle, so the stored value is
// Hermitian exactly, not just within tolerance.
class HermitianMatrix3 {
public:
    HermitianMatrix3() = default;

    // Checked construction: rejects non-finite input and anything farther than
    // `tol` from Hermitian; accepted input is replaced by (m + m^H)/2.
    static HermitianMatrix3 from_entries(const Matrix3c& m, double tol = kHermitianTol);

    // (m + m^H)/2 without the closeness check, for products that are Hermitian
    // by construction up to roundoff. Still rejects non-finite input.
    static HermitianMatrix3 hermitian_part(const Matrix3c& m);

    static HermitianMatrix3 from_diagonal(double d0, double d1, double d2);

    Complex operator()(int i, int j) const;
    double diagonal(int i) const { return diag_[static_cast<std::size_t>(i)]; }

    Matrix3c to_matrix() const;
    double trace() const { return diag_[0] + diag_[1] + diag_[2]; }

    HermitianMatrix3& operator+=(const HermitianMatrix3& o);
    HermitianMatrix3& operator-=(const HermitianMatrix3& o);
    HermitianMatrix3& operator*=(double s);

    friend HermitianMatrix3 operator+(HermitianMatrix3 x, const HermitianMatrix3& y) {
        return x += y;
    }
    friend HermitianMatrix3 operator-(HermitianMatrix3 x, const HermitianMatrix3& y) {
        return x -= y;
    }
    friend HermitianMatrix3 operator*(double s, HermitianMatrix3 x) { return x *= s; }

private:
    std::array<double, 3> diag_{0.0, 0.0, 0.0};
    // Entries (0,1), (0,2), (1,2).
    std::array<Complex, 3> upper_{};
};

// Eigendecomposition of a Hermitian 3x3: ascending real eigenvalues and a
// unitary matrix whose columns are the matching eigenvectors.
struct EigenDecomposition3 {
    std::array<double, 3> eigenvalues{};
    Matrix3c eigenvectors;

    double min_eigenvalue() const { return eigenvalues[0]; }
    double max_eigenvalue() const { return eigenvalues[2]; }
};

// Hermitian matrix with all eigenvalues above the positivity floor. The
// decomposition computed during validation is kept so downstream spectral
// functions do not re-solve it.
class HpdMatrix3 {
public:
    explicit HpdMatrix3(const HermitianMatrix3& h);

    // Trusted path for spectral functions that already know the decomposition
    // of `h` analytically (e.g. a rebuild with transformed eigenvalues). Only
    // the positivity floor is re-checked; `eig` itself is taken on faith.
    static HpdMatrix3 from_decomposition(const HermitianMatrix3& h,
                                         const EigenDecomposition3& eig);

    const HermitianMatrix3& matrix() const { return mat_; }
    const EigenDecomposition3& eigen() const { return eig_; }
    Complex operator()(int i, int j) const { return mat_(i, j); }
    double trace() const { return mat_.trace(); }
    Matrix3c to_matrix() const { return mat_.to_matrix(); }

private:
    HpdMatrix3(const HermitianMatrix3& h, const EigenDecomposition3& eig);

    HermitianMatrix3 mat_;
    EigenDecomposition3 eig_;
};

// -----------------------------------------------------------------------------
// Operations
// -----------------------------------------------------------------------------

// Cyclic Jacobi eigensolver specialized to 3x3 Hermitian matrices.
// Deterministic: fixed sweep order, ascending eigenvalue sort, canonical
// eigenvector phases, and a fixed tie-break among equal eigenvalues.
EigenDecomposition3 eig_hermitian(const HermitianMatrix3& m);

// Matrix logarithm of an HPD matrix (principal branch).
HermitianMatrix3 logm(const HpdMatrix3& m);

// Matrix exponential of a Hermitian matrix; the result is HPD.
HpdMatrix3 expm(const HermitianMatrix3& m);

// m^{-1/2}; satisfies r * m * r = I.
HpdMatrix3 inv_sqrtm(const HpdMatrix3& m);

// Inverse via the cached decomposition.
HermitianMatrix3 inverse(const HpdMatrix3& m);

double frobenius_norm(const HermitianMatrix3& m);

// Sum of eigenvalue logarithms.
double log_det(const HpdMatrix3& m);

// Lower-triangular L with L L^H = m.
Matrix3c cholesky(const HpdMatrix3& m);

// Rebuild sum_k values[k] * v_k v_k^H from a decomposition. The result is
// Hermitian by construction.
HermitianMatrix3 spectral_rebuild(const EigenDecomposition3& eig,
                                  const std::array<double, 3>& values);

}  // namespace hpdnet

#endif  // HPDNET_HPD_CORE_HPP
