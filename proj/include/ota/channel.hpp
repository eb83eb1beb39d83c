// SPDX-License-Identifier: Apache-2.0
//
// ota-fronthaul: over-the-air aggregation of sufficient statistics for
// uplink cell-free massive MIMO
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef OTA_CHANNEL_HPP
#define OTA_CHANNEL_HPP

#include "ota/linalg.hpp"
#include "ota/scenario.hpp"
#include "ota/types.hpp"

#include <Eigen/Cholesky>

#include <stdexcept>
#include <vector>

namespace ota {

// H[l] is N x K, column k drawn from CN(0, R_kl).
struct AccessChannels {
    std::vector<CMat> H;
};

// G[l] is N x M (AP l to CPU), i.i.d. CN(0, G_beta[l]) entries.
struct FronthaulChannels {
    std::vector<CMat> G;
};

struct AccessCsiEstimate {
    std::vector<CMat> H_hat;   // per AP, N x K
    std::vector<CMat> Rtilde;  // error covariances, flat index k * L + l
    int L = 0;

    const CMat &Rt(int k, int l) const { return Rtilde[k * L + l]; }
};

// Draw order is AP-major, then UE, so a given (seed, trial) always yields the
// same realization irrespective of the caller.
inline AccessChannels sample_access(const CovarianceSet &cov, Rng &rng)
{
    AccessChannels ch;
    ch.H.reserve(cov.L());
    for (int l = 0; l < cov.L(); ++l) {
        CMat H(cov.N(), cov.K());
        for (int k = 0; k < cov.K(); ++k)
            H.col(k) = cov.R_sqrt(k, l) * complex_normal(cov.N(), 1, rng);
        ch.H.push_back(std::move(H));
    }
    return ch;
}

inline FronthaulChannels sample_fronthaul(const CovarianceSet &cov, int M, Rng &rng)
{
    FronthaulChannels fh;
    fh.G.reserve(cov.L());
    for (int l = 0; l < cov.L(); ++l)
        fh.G.push_back(complex_normal(cov.N(), M, rng, cov.G_beta(l)));
    return fh;
}

// Full column rank test used on every fronthaul draw.
inline bool full_column_rank(const CMat &G, double rel_tol = 1e-9)
{
    Eigen::JacobiSVD<CMat> svd(G);
    const RVec s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return false;
    return s(s.size() - 1) > rel_tol * s(0);
}

// Error covariance of the pilot-based LMMSE estimate of h ~ CN(0, R) observed
// as sqrt(p tau) h + n with n ~ CN(0, sigma2 I). Pilots are orthogonal, so
// after despreading only the UE's own covariance enters.
inline CMat access_error_covariance(const CMat &R, double p_pilot, int tau_p, double sigma2)
{
    const double g = p_pilot * tau_p;
    const CMat S = g * R + sigma2 * CMat::Identity(R.rows(), R.cols());
    const CMat Rt = R - g * R * S.ldlt().solve(R);
    return 0.5 * (Rt + Rt.adjoint());
}

// Per-AP LMMSE channel estimation from orthogonal pilots of length tau_p.
// The noise term is drawn from rng; H_hat + H_tilde = H holds exactly.
inline AccessCsiEstimate lmmse_access_estimate(const AccessChannels &ch, const CovarianceSet &cov, double p_pilot,
                                               int tau_p, double sigma2, Rng &rng)
{
    if (tau_p < cov.K())
        throw std::invalid_argument("lmmse_access_estimate: tau_p < K violates orthogonal pilots");
    if (!(p_pilot > 0.0))
        throw std::invalid_argument("lmmse_access_estimate: pilot power must be positive");
    const int L = cov.L(), K = cov.K(), N = cov.N();
    const double g = p_pilot * tau_p;
    const double sg = std::sqrt(g);

    AccessCsiEstimate est;
    est.L = L;
    est.H_hat.reserve(L);
    est.Rtilde.resize(static_cast<std::size_t>(K) * L);
    for (int l = 0; l < L; ++l) {
        CMat Hh(N, K);
        for (int k = 0; k < K; ++k) {
            const CMat &R = cov.R(k, l);
            const CVec yp = sg * ch.H[l].col(k) + complex_normal(N, 1, rng, sigma2);
            const CMat S = g * R + sigma2 * CMat::Identity(N, N);
            Hh.col(k) = sg * R * S.ldlt().solve(yp);
            est.Rtilde[k * L + l] = access_error_covariance(R, p_pilot, tau_p, sigma2);
        }
        est.H_hat.push_back(std::move(Hh));
    }
    return est;
}

// Fronthaul CSI at AP l for i.i.d. CN(0, g) entries: scalar Wiener filter per
// entry with pilot length tau and power p. Returns G_hat; the per-entry error
// variance is g * sigma2 / (p tau g + sigma2).
inline CMat lmmse_fronthaul_estimate(const CMat &G, double g, double p_pilot, int tau, double sigma2, Rng &rng)
{
    if (!(p_pilot > 0.0) || tau < 1)
        throw std::invalid_argument("lmmse_fronthaul_estimate: pilot power and length must be positive");
    const double pt = p_pilot * tau;
    const CMat Y = std::sqrt(pt) * G + complex_normal(G.rows(), G.cols(), rng, sigma2);
    return (std::sqrt(pt) * g / (pt * g + sigma2)) * Y;
}

inline double fronthaul_error_variance(double g, double p_pilot, int tau, double sigma2)
{
    return g * sigma2 / (p_pilot * tau * g + sigma2);
}

} // namespace ota

#endif // OTA_CHANNEL_HPP
