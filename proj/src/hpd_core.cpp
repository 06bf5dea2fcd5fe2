#include "hpdnet/hpd_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hpdnet {

namespace {

constexpr double kJacobiOffTarget = 1e-14;
constexpr int kJacobiMaxSweeps = 50;

bool finite(double x) { return std::isfinite(x); }
bool finite(const Complex& z) { return finite(z.real()) && finite(z.imag()); }

// Frobenius norm of the off-diagonal part.
double off_diagonal_mass(const Matrix3c& w) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) s += std::norm(w(i, j));
    return std::sqrt(s);
}

// Re-impose exact Hermitian structure after a two-sided rotation.
void hermitize(Matrix3c& w) {
    for (int i = 0; i < 3; ++i) w(i, i) = Complex(w(i, i).real(), 0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            Complex u = 0.5 * (w(i, j) + std::conj(w(j, i)));
            w(i, j) = u;
            w(j, i) = std::conj(u);
        }
}

// One complex Jacobi rotation zeroing the (p,q) entry. The 2x2 pivot block
// [[a, b],[conj(b), g]] is reduced to the real symmetric case by absorbing the
// phase of b, then rotated with the classic symmetric Schur angle.
void jacobi_rotate(Matrix3c& w, Matrix3c& v, int p, int q) {
    const double alpha = w(p, p).real();
    const double gamma = w(q, q).real();
    const Complex beta = w(p, q);
    const double b = std::abs(beta);
    if (b == 0.0) return;

    const Complex phase = beta / b;  // e^{i phi}
    const double tau = (gamma - alpha) / (2.0 * b);
    double t;
    if (tau >= 0.0)
        t = 1.0 / (tau + std::sqrt(1.0 + tau * tau));
    else
        t = -1.0 / (-tau + std::sqrt(1.0 + tau * tau));
    const double c = 1.0 / std::sqrt(1.0 + t * t);
    const double s = t * c;

    // R acts on coordinates (p,q):  R = [[c, s],[-conj(phase) s, conj(phase) c]]
    const Complex rpp(c, 0.0);
    const Complex rpq(s, 0.0);
    const Complex rqp = -std::conj(phase) * s;
    const Complex rqq = std::conj(phase) * c;

    // w <- R^H w R
    for (int i = 0; i < 3; ++i) {
        const Complex wip = w(i, p);
        const Complex wiq = w(i, q);
        w(i, p) = wip * rpp + wiq * rqp;
        w(i, q) = wip * rpq + wiq * rqq;
    }
    for (int j = 0; j < 3; ++j) {
        const Complex wpj = w(p, j);
        const Complex wqj = w(q, j);
        w(p, j) = std::conj(rpp) * wpj + std::conj(rqp) * wqj;
        w(q, j) = std::conj(rpq) * wpj + std::conj(rqq) * wqj;
    }
    w(p, q) = Complex(0.0, 0.0);
    w(q, p) = Complex(0.0, 0.0);
    hermitize(w);

    // v <- v R
    for (int i = 0; i < 3; ++i) {
        const Complex vip = v(i, p);
        const Complex viq = v(i, q);
        v(i, p) = vip * rpp + viq * rqp;
        v(i, q) = vip * rpq + viq * rqq;
    }
}

int first_significant_component(const Matrix3c& v, int col) {
    for (int i = 0; i < 3; ++i)
        if (std::abs(v(i, col)) > 1e-12) return i;
    return 0;
}

// Multiply a column by conj(z)/|z| so its first significant component becomes
// real positive.
void canonicalize_phase(Matrix3c& v, int col) {
    const int i = first_significant_component(v, col);
    const Complex z = v(i, col);
    const double mag = std::abs(z);
    if (mag == 0.0) return;
    const Complex rot = std::conj(z) / mag;
    for (int r = 0; r < 3; ++r) v(r, col) = v(r, col) * rot;
    v(i, col) = Complex(std::abs(v(i, col)), 0.0);
}

// Tie-break among equal eigenvalues: compare (re, im) of the first significant
// component, then the remaining components lexicographically.
bool column_less(const Matrix3c& v, int ca, int cb) {
    const int ia = first_significant_component(v, ca);
    const int ib = first_significant_component(v, cb);
    const Complex za = v(ia, ca);
    const Complex zb = v(ib, cb);
    if (za.real() != zb.real()) return za.real() < zb.real();
    if (za.imag() != zb.imag()) return za.imag() < zb.imag();
    for (int i = 0; i < 3; ++i) {
        const Complex a = v(i, ca);
        const Complex b = v(i, cb);
        if (a.real() != b.real()) return a.real() < b.real();
        if (a.imag() != b.imag()) return a.imag() < b.imag();
    }
    return false;
}

}  // namespace

Matrix3c Matrix3c::identity() {
    Matrix3c m;
    m(0, 0) = m(1, 1) = m(2, 2) = Complex(1.0, 0.0);
    return m;
}

Matrix3c operator+(const Matrix3c& x, const Matrix3c& y) {
    Matrix3c r;
    for (std::size_t i = 0; i < 9; ++i) r.a[i] = x.a[i] + y.a[i];
    return r;
}

Matrix3c operator-(const Matrix3c& x, const Matrix3c& y) {
    Matrix3c r;
    for (std::size_t i = 0; i < 9; ++i) r.a[i] = x.a[i] - y.a[i];
    return r;
}

Matrix3c operator*(const Matrix3c& x, const Matrix3c& y) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            Complex s(0.0, 0.0);
            for (int k = 0; k < 3; ++k) s += x(i, k) * y(k, j);
            r(i, j) = s;
        }
    return r;
}

Matrix3c operator*(Complex s, const Matrix3c& x) {
    Matrix3c r;
    for (std::size_t i = 0; i < 9; ++i) r.a[i] = s * x.a[i];
    return r;
}

Vector3c operator*(const Matrix3c& x, const Vector3c& y) {
    Vector3c r;
    for (int i = 0; i < 3; ++i) {
        Complex s(0.0, 0.0);
        for (int k = 0; k < 3; ++k) s += x(i, k) * y[k];
        r[i] = s;
    }
    return r;
}

Matrix3c adjoint(const Matrix3c& x) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = std::conj(x(j, i));
    return r;
}

Complex trace(const Matrix3c& x) { return x(0, 0) + x(1, 1) + x(2, 2); }

double frobenius_norm(const Matrix3c& x) {
    double s = 0.0;
    for (const Complex& z : x.a) s += std::norm(z);
    return std::sqrt(s);
}

bool is_finite(const Matrix3c& x) {
    for (const Complex& z : x.a)
        if (!finite(z)) return false;
    return true;
}

bool is_finite(const Vector3c& x) {
    for (const Complex& z : x.v)
        if (!finite(z)) return false;
    return true;
}

Matrix3c outer(const Vector3c& k) {
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = k[i] * std::conj(k[j]);
    return r;
}

HermitianMatrix3 HermitianMatrix3::from_entries(const Matrix3c& m, double tol) {
    if (!is_finite(m)) throw InvalidMatrix("matrix has non-finite entries");
    double dev = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            dev = std::max(dev, std::abs(m(i, j) - std::conj(m(j, i))));
    if (dev > 2.0 * tol)
        throw InvalidMatrix("matrix deviates from Hermitian by " + std::to_string(dev));
    return hermitian_part(m);
}

HermitianMatrix3 HermitianMatrix3::hermitian_part(const Matrix3c& m) {
    if (!is_finite(m)) throw InvalidMatrix("matrix has non-finite entries");
    HermitianMatrix3 h;
    for (int i = 0; i < 3; ++i) h.diag_[static_cast<std::size_t>(i)] = m(i, i).real();
    h.upper_[0] = 0.5 * (m(0, 1) + std::conj(m(1, 0)));
    h.upper_[1] = 0.5 * (m(0, 2) + std::conj(m(2, 0)));
    h.upper_[2] = 0.5 * (m(1, 2) + std::conj(m(2, 1)));
    return h;
}

HermitianMatrix3 HermitianMatrix3::from_diagonal(double d0, double d1, double d2) {
    if (!(finite(d0) && finite(d1) && finite(d2)))
        throw InvalidMatrix("diagonal has non-finite entries");
    HermitianMatrix3 h;
    h.diag_ = {d0, d1, d2};
    return h;
}

Complex HermitianMatrix3::operator()(int i, int j) const {
    if (i == j) return Complex(diag_[static_cast<std::size_t>(i)], 0.0);
    if (i < j) {
        const int idx = (i == 0) ? (j == 1 ? 0 : 1) : 2;
        return upper_[static_cast<std::size_t>(idx)];
    }
    const int idx = (j == 0) ? (i == 1 ? 0 : 1) : 2;
    return std::conj(upper_[static_cast<std::size_t>(idx)]);
}

Matrix3c HermitianMatrix3::to_matrix() const {
    Matrix3c m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = (*this)(i, j);
    return m;
}

HermitianMatrix3& HermitianMatrix3::operator+=(const HermitianMatrix3& o) {
    for (std::size_t i = 0; i < 3; ++i) {
        diag_[i] += o.diag_[i];
        upper_[i] += o.upper_[i];
    }
    return *this;
}

HermitianMatrix3& HermitianMatrix3::operator-=(const HermitianMatrix3& o) {
    for (std::size_t i = 0; i < 3; ++i) {
        diag_[i] -= o.diag_[i];
        upper_[i] -= o.upper_[i];
    }
    return *this;
}

HermitianMatrix3& HermitianMatrix3::operator*=(double s) {
    for (std::size_t i = 0; i < 3; ++i) {
        diag_[i] *= s;
        upper_[i] *= s;
    }
    return *this;
}

HpdMatrix3::HpdMatrix3(const HermitianMatrix3& h) : mat_(h), eig_(eig_hermitian(h)) {
    if (!(eig_.min_eigenvalue() > kHpdFloor))
        throw NotPositiveDefinite("minimum eigenvalue " +
                                  std::to_string(eig_.min_eigenvalue()) +
                                  " is not above the positivity floor");
}

HpdMatrix3::HpdMatrix3(const HermitianMatrix3& h, const EigenDecomposition3& eig)
    : mat_(h), eig_(eig) {
    if (!(eig_.min_eigenvalue() > kHpdFloor))
        throw NotPositiveDefinite("minimum eigenvalue " +
                                  std::to_string(eig_.min_eigenvalue()) +
                                  " is not above the positivity floor");
}

HpdMatrix3 HpdMatrix3::from_decomposition(const HermitianMatrix3& h,
                                          const EigenDecomposition3& eig) {
    return HpdMatrix3(h, eig);
}

EigenDecomposition3 eig_hermitian(const HermitianMatrix3& m) {
    Matrix3c w = m.to_matrix();
    if (!is_finite(w)) throw InvalidMatrix("eigendecomposition of non-finite matrix");

    Matrix3c v = Matrix3c::identity();
    double off = off_diagonal_mass(w);
    for (int sweep = 0; sweep < kJacobiMaxSweeps && off >= kJacobiOffTarget; ++sweep) {
        jacobi_rotate(w, v, 0, 1);
        jacobi_rotate(w, v, 0, 2);
        jacobi_rotate(w, v, 1, 2);
        const double next = off_diagonal_mass(w);
        if (next >= off) break;  // stalled at roundoff level
        off = next;
    }

    for (int c = 0; c < 3; ++c) canonicalize_phase(v, c);

    std::array<int, 3> order{0, 1, 2};
    std::array<double, 3> lam{w(0, 0).real(), w(1, 1).real(), w(2, 2).real()};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (lam[static_cast<std::size_t>(a)] != lam[static_cast<std::size_t>(b)])
            return lam[static_cast<std::size_t>(a)] < lam[static_cast<std::size_t>(b)];
        return column_less(v, a, b);
    });

    EigenDecomposition3 out;
    for (int c = 0; c < 3; ++c) {
        const int src = order[static_cast<std::size_t>(c)];
        out.eigenvalues[static_cast<std::size_t>(c)] = lam[static_cast<std::size_t>(src)];
        for (int r = 0; r < 3; ++r) out.eigenvectors(r, c) = v(r, src);
    }
    return out;
}

HermitianMatrix3 spectral_rebuild(const EigenDecomposition3& eig,
                                  const std::array<double, 3>& values) {
    const Matrix3c& v = eig.eigenvectors;
    Matrix3c r;
    for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) {
            Complex s(0.0, 0.0);
            for (int k = 0; k < 3; ++k)
                s += values[static_cast<std::size_t>(k)] * v(i, k) * std::conj(v(j, k));
            r(i, j) = s;
            r(j, i) = std::conj(s);
        }
    return HermitianMatrix3::hermitian_part(r);
}

HermitianMatrix3 logm(const HpdMatrix3& m) {
    const auto& e = m.eigen();
    return spectral_rebuild(
        e, {std::log(e.eigenvalues[0]), std::log(e.eigenvalues[1]), std::log(e.eigenvalues[2])});
}

HpdMatrix3 expm(const HermitianMatrix3& m) {
    const EigenDecomposition3 e = eig_hermitian(m);
    const std::array<double, 3> vals{std::exp(e.eigenvalues[0]), std::exp(e.eigenvalues[1]),
                                     std::exp(e.eigenvalues[2])};
    if (!(finite(vals[0]) && finite(vals[1]) && finite(vals[2])))
        throw InvalidMatrix("matrix exponential overflow");
    // exp is increasing, so the cached decomposition keeps its column order.
    EigenDecomposition3 out = e;
    out.eigenvalues = vals;
    return HpdMatrix3::from_decomposition(spectral_rebuild(e, vals), out);
}

HpdMatrix3 inv_sqrtm(const HpdMatrix3& m) {
    const auto& e = m.eigen();
    const std::array<double, 3> vals{1.0 / std::sqrt(e.eigenvalues[0]),
                                     1.0 / std::sqrt(e.eigenvalues[1]),
                                     1.0 / std::sqrt(e.eigenvalues[2])};
    // 1/sqrt is decreasing: reverse columns so the cached order stays ascending.
    EigenDecomposition3 out;
    for (int c = 0; c < 3; ++c) {
        out.eigenvalues[static_cast<std::size_t>(c)] = vals[static_cast<std::size_t>(2 - c)];
        for (int r = 0; r < 3; ++r) out.eigenvectors(r, c) = e.eigenvectors(r, 2 - c);
    }
    return HpdMatrix3::from_decomposition(spectral_rebuild(e, vals), out);
}

HermitianMatrix3 inverse(const HpdMatrix3& m) {
    const auto& e = m.eigen();
    return spectral_rebuild(
        e, {1.0 / e.eigenvalues[0], 1.0 / e.eigenvalues[1], 1.0 / e.eigenvalues[2]});
}

double frobenius_norm(const HermitianMatrix3& m) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += m.diagonal(i) * m.diagonal(i);
    s += 2.0 * (std::norm(m(0, 1)) + std::norm(m(0, 2)) + std::norm(m(1, 2)));
    return std::sqrt(s);
}

double log_det(const HpdMatrix3& m) {
    const auto& lam = m.eigen().eigenvalues;
    return std::log(lam[0]) + std::log(lam[1]) + std::log(lam[2]);
}

Matrix3c cholesky(const HpdMatrix3& m) {
    Matrix3c l;
    for (int j = 0; j < 3; ++j) {
        double d = m(j, j).real();
        for (int k = 0; k < j; ++k) d -= std::norm(l(j, k));
        if (!(d > 0.0)) throw NotPositiveDefinite("Cholesky pivot is not positive");
        const double ljj = std::sqrt(d);
        l(j, j) = Complex(ljj, 0.0);
        for (int i = j + 1; i < 3; ++i) {
            Complex s = m(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }
    return l;
}

}  // namespace hpdnet
