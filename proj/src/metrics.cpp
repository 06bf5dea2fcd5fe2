#include "hpdnet/metrics.hpp"

#include <algorithm>
#include <array>

namespace hpdnet {

namespace {

// Real part of tr(a b) for Hermitian a, b (the trace of such a product is
// real up to roundoff).
double trace_product(const HermitianMatrix3& a, const HermitianMatrix3& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) s += (a(i, k) * b(k, i)).real();
    return s;
}

// Total order on Hermitian matrices by their nine stored real components.
// Used to fix the summation order of the Fréchet mean.
std::array<double, 9> sort_key(const HermitianMatrix3& m) {
    return {m.diagonal(0), m.diagonal(1),      m.diagonal(2),
            m(0, 1).real(), m(0, 1).imag(),    m(0, 2).real(),
            m(0, 2).imag(), m(1, 2).real(),    m(1, 2).imag()};
}

}  // namespace

double dist_airm(const HpdMatrix3& x, const HpdMatrix3& y) {
    const Matrix3c r = inv_sqrtm(x).to_matrix();
    const Matrix3c inner = r * y.to_matrix() * r;
    const HpdMatrix3 whitened(HermitianMatrix3::hermitian_part(inner));
    return frobenius_norm(logm(whitened));
}

double dist_lem(const HpdMatrix3& x, const HpdMatrix3& y) {
    return frobenius_norm(logm(x) - logm(y));
}

double dist_stein(const HpdMatrix3& x, const HpdMatrix3& y) {
    const HpdMatrix3 mid(0.5 * (x.matrix() + y.matrix()));
    return log_det(mid) - 0.5 * (log_det(x) + log_det(y));
}

double dist_jeffrey(const HpdMatrix3& x, const HpdMatrix3& y) {
    const HermitianMatrix3 xi = inverse(x);
    const HermitianMatrix3 yi = inverse(y);
    return 0.5 * trace_product(xi, y.matrix()) + 0.5 * trace_product(yi, x.matrix()) - 3.0;
}

double dist(MetricKind kind, const HpdMatrix3& x, const HpdMatrix3& y) {
    switch (kind) {
        case MetricKind::AIRM: return dist_airm(x, y);
        case MetricKind::LEM: return dist_lem(x, y);
        case MetricKind::Stein: return dist_stein(x, y);
        case MetricKind::Jeffrey: return dist_jeffrey(x, y);
    }
    throw Error("unknown metric kind");
}

HpdMatrix3 frechet_mean_from_logs(std::vector<HermitianMatrix3> logs) {
    if (logs.empty()) throw EmptyInput("Fréchet mean of an empty set");
    std::sort(logs.begin(), logs.end(), [](const HermitianMatrix3& a, const HermitianMatrix3& b) {
        return sort_key(a) < sort_key(b);
    });
    HermitianMatrix3 acc;
    for (const HermitianMatrix3& l : logs) acc += l;
    acc *= 1.0 / static_cast<double>(logs.size());
    return expm(acc);
}

HpdMatrix3 frechet_mean_lem(const std::vector<HpdMatrix3>& ms) {
    std::vector<HermitianMatrix3> logs;
    logs.reserve(ms.size());
    for (const HpdMatrix3& m : ms) logs.push_back(logm(m));
    return frechet_mean_from_logs(std::move(logs));
}

}  // namespace hpdnet
