#ifndef HPDNET_METRICS_HPP
#define HPDNET_METRICS_HPP

#include <vector>

#include "hpdnet/hpd_core.hpp"

namespace hpdnet {

enum class MetricKind { AIRM, LEM, Stein, Jeffrey };

// Affine-invariant distance: ||log(x^{-1/2} y x^{-1/2})||_F.
double dist_airm(const HpdMatrix3& x, const HpdMatrix3& y);

// Log-Euclidean distance: ||log x - log y||_F.
double dist_lem(const HpdMatrix3& x, const HpdMatrix3& y);

// Stein divergence (squared quantity):
// logdet((x+y)/2) - (1/2) logdet(x y).
double dist_stein(const HpdMatrix3& x, const HpdMatrix3& y);

// Jeffrey divergence (squared quantity):
// (1/2) tr(x^{-1} y) + (1/2) tr(y^{-1} x) - 3.
double dist_jeffrey(const HpdMatrix3& x, const HpdMatrix3& y);

double dist(MetricKind kind, const HpdMatrix3& x, const HpdMatrix3& y);

// Log-Euclidean Fréchet mean: exp[(1/N) sum_i log m_i]. The log matrices are
// summed in a canonical sorted order, so permuting the input list cannot
// change the result even at the bit level.
HpdMatrix3 frechet_mean_lem(const std::vector<HpdMatrix3>& ms);

// Same mean over a list of precomputed matrix logarithms.
HpdMatrix3 frechet_mean_from_logs(std::vector<HermitianMatrix3> logs);

}  // namespace hpdnet

#endif  // HPDNET_METRICS_HPP
