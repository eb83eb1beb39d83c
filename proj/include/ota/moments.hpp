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

#ifndef OTA_MOMENTS_HPP
#define OTA_MOMENTS_HPP

#include "ota/ap_local.hpp"
#include "ota/channel.hpp"
#include "ota/scenario.hpp"
#include "ota/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ota {

// Mean and entry variances of the vectorized Gramian, network-wide and per AP.
struct Phase1Moments {
    RVec mu1;                  // length K(K+1)/2
    RVec c1;                   // diag of C^(1)
    std::vector<RVec> mu1_l;   // per-AP contributions
    std::vector<RVec> c1_l;
};

inline Phase1Moments phase1_moments(const CovarianceSet &cov)
{
    const int K = cov.K(), L = cov.L();
    const int len = upper_length(K);
    Phase1Moments pm;
    pm.mu1 = RVec::Zero(len);
    pm.c1 = RVec::Zero(len);
    for (int l = 0; l < L; ++l) {
        RVec mu = RVec::Zero(len);
        RVec c = RVec::Zero(len);
        for (int j = 0; j < K; ++j) {
            mu(upper_index(j, j, K)) = real_trace(cov.R(j, l));
            for (int jp = j; jp < K; ++jp)
                c(upper_index(j, jp, K)) = (cov.R(j, l) * cov.R(jp, l)).trace().real();
        }
        pm.mu1 += mu;
        pm.c1 += c;
        pm.mu1_l.push_back(std::move(mu));
        pm.c1_l.push_back(std::move(c));
    }
    return pm;
}

// Diagonals of E[A_l] and E[A_l^2].
struct GramianExpectations {
    std::vector<RVec> EA;
    std::vector<RVec> EA2;
};

inline GramianExpectations gramian_expectations(const CovarianceSet &cov)
{
    const int K = cov.K(), L = cov.L(), N = cov.N();
    GramianExpectations ge;
    for (int l = 0; l < L; ++l) {
        CMat Rsum = CMat::Zero(N, N);
        for (int k = 0; k < K; ++k)
            Rsum += cov.R(k, l);
        RVec ea(K), ea2(K);
        for (int k = 0; k < K; ++k) {
            const double tr = real_trace(cov.R(k, l));
            ea(k) = tr;
            ea2(k) = tr * tr + (cov.R(k, l) * Rsum).trace().real();
        }
        ge.EA.push_back(std::move(ea));
        ge.EA2.push_back(std::move(ea2));
    }
    return ge;
}

// Diagonal of C^(2), the covariance of the network-wide MF output in one slot.
inline RVec phase2_covariance(const GramianExpectations &ge, double p_ul, double sigma2)
{
    const std::size_t L = ge.EA.size();
    const Eigen::Index K = L ? ge.EA.front().size() : 0;
    RVec c2 = RVec::Zero(K);
    RVec sumEA = RVec::Zero(K);
    for (std::size_t l = 0; l < L; ++l) {
        c2 += p_ul * ge.EA2[l] + sigma2 * ge.EA[l];
        sumEA += ge.EA[l];
    }
    // sum over ordered pairs l != l' of EA_l EA_l'
    for (std::size_t l = 0; l < L; ++l)
        c2 += p_ul * ge.EA[l].cwiseProduct(sumEA - ge.EA[l]);
    return c2;
}

inline RVec phase2_covariance(const CovarianceSet &cov, double p_ul, double sigma2)
{
    return phase2_covariance(gramian_expectations(cov), p_ul, sigma2);
}

struct EwhwEstimate {
    CMat mean;                // M x M
    double sem = 0.0;         // largest standard error over the diagonal
    long skipped = 0;         // rank-deficient draws left out
    bool heavy_tailed = false;
};

// Sample mean of (G^H G)^{-1} = W^H W over draws produced by sampler().
template <class Sampler>
EwhwEstimate ewhw_mc(Sampler &&sampler, int trials)
{
    if (trials < 1)
        throw std::invalid_argument("ewhw_mc: trials must be positive");
    EwhwEstimate est;
    CMat sum;
    RVec sumsq;
    long used = 0;
    for (int i = 0; i < trials; ++i) {
        const CMat G = sampler();
        if (!full_column_rank(G)) {
            ++est.skipped;
            continue;
        }
        const CMat W = zf_precoder(G);
        const CMat X = W.adjoint() * W;
        if (used == 0) {
            sum = CMat::Zero(X.rows(), X.cols());
            sumsq = RVec::Zero(X.rows());
        }
        sum += X;
        sumsq += X.diagonal().real().cwiseAbs2();
        ++used;
    }
    if (used == 0)
        throw SingularChannelError("ewhw_mc: every fronthaul draw was rank deficient");
    est.mean = sum / static_cast<double>(used);
    est.mean = 0.5 * (est.mean + est.mean.adjoint()).eval();
    if (used > 1) {
        const RVec m = est.mean.diagonal().real();
        const RVec var = (sumsq / static_cast<double>(used) - m.cwiseAbs2()) * (used / (used - 1.0));
        est.sem = std::sqrt(std::max(0.0, var.maxCoeff()) / used);
    }
    return est;
}

// i.i.d. CN(0, G_beta) fronthaul. N == M is flagged: the mean of the inverse
// Wishart is infinite there and the estimate does not converge.
inline EwhwEstimate ewhw_mc(double G_beta, int N, int M, int trials, Rng &rng)
{
    if (N < M)
        throw std::invalid_argument("ewhw_mc: N >= M required");
    if (!(G_beta > 0.0))
        throw std::invalid_argument("ewhw_mc: fronthaul gain must be positive");
    if (trials < 1000)
        throw std::invalid_argument("ewhw_mc: at least 1000 trials required");
    EwhwEstimate est = ewhw_mc([&] { return complex_normal(N, M, rng, G_beta); }, trials);
    est.heavy_tailed = (N == M);
    return est;
}

// Per-chunk-position weight sum_m EWHW[q,q] * d[k(m,q)] / cols for a payload
// whose entry g maps to the diagonal vector d through key(g). Pads are zero.
template <class Key>
double chunk_trace(const CMat &EWHW, const RVec &d, Eigen::Index len, int M, Key &&key)
{
    const int cols = chunk_count(len, M);
    double s = 0.0;
    for (Eigen::Index g = 0; g < len; ++g)
        s += EWHW(g % M, g % M).real() * d(key(g));
    return s / cols;
}

// a_l and b_l of the phase-2 report p a_l + b_l. Entry g = t*K + k of the
// stacked MF payload has variance p EA2_l[k] + sigma2 EA_l[k].
inline void power_coefficients(const GramianExpectations &ge, const std::vector<CMat> &EWHW, int M, int tau_u,
                               double sigma2, RVec &a, RVec &b)
{
    const int L = static_cast<int>(ge.EA.size());
    a.resize(L);
    b.resize(L);
    for (int l = 0; l < L; ++l) {
        const int K = static_cast<int>(ge.EA[l].size());
        const Eigen::Index len = static_cast<Eigen::Index>(K) * tau_u;
        auto key = [K](Eigen::Index g) { return g % K; };
        a(l) = chunk_trace(EWHW[l], ge.EA2[l], len, M, key);
        b(l) = sigma2 * chunk_trace(EWHW[l], ge.EA[l], len, M, key);
    }
}

// Phase-1 report (1/M_1) sum_m tr(E[W^H W] (diag c + mu mu^H)) per AP.
inline RVec phase1_power_reports(const Phase1Moments &pm, const std::vector<CMat> &EWHW, int M)
{
    const int L = static_cast<int>(pm.mu1_l.size());
    RVec P(L);
    for (int l = 0; l < L; ++l) {
        const CVec mu = pm.mu1_l[l].cast<cd>();
        const CMat Mu = chunk(mu, M);
        const CMat Cd = chunk(pm.c1_l[l].cast<cd>(), M);
        double s = 0.0;
        for (Eigen::Index m = 0; m < Mu.cols(); ++m) {
            const CVec v = Mu.col(m);
            s += (v.adjoint() * EWHW[l] * v)(0, 0).real();
            for (int q = 0; q < M; ++q)
                s += EWHW[l](q, q).real() * Cd(q, m).real();
        }
        P(l) = s / static_cast<double>(Mu.cols());
    }
    return P;
}

// Everything the CPU and APs know from statistics alone.
struct MomentModel {
    int K = 0, L = 0, N = 0, M = 0, tau_u = 0;
    double p_ul = 0.0;
    double sigma2 = 0.0;       // noise on the access link as seen by the statistics
    Phase1Moments p1;
    GramianExpectations ge;
    RVec c2;
    std::vector<CMat> EWHW;
    double ewhw_sem = 0.0;     // at unit fronthaul gain
    bool ewhw_heavy_tailed = false;
    RVec a, b;
    RVec P1;                   // phase-1 reports at eta = 1

    const RVec &mu1() const { return p1.mu1; }
    const RVec &c1() const { return p1.c1; }
};

inline EwhwEstimate unit_ewhw(int N, int M, int trials, std::uint64_t seed)
{
    Rng rng = make_stream(seed, StreamTag::moments, 0);
    return ewhw_mc(1.0, N, M, trials, rng);
}

// E[W^H W] is estimated once at unit gain and scaled by 1/G_beta[l], which is
// exact in distribution for i.i.d. fronthaul entries.
inline MomentModel build_moment_model(const CovarianceSet &cov, int M, int tau_u, double p_ul, double sigma2,
                                      const EwhwEstimate &unit)
{
    MomentModel mm;
    mm.K = cov.K();
    mm.L = cov.L();
    mm.N = cov.N();
    mm.M = M;
    mm.tau_u = tau_u;
    mm.p_ul = p_ul;
    mm.sigma2 = sigma2;
    mm.p1 = phase1_moments(cov);
    mm.ge = gramian_expectations(cov);
    mm.c2 = phase2_covariance(mm.ge, p_ul, sigma2);
    mm.ewhw_sem = unit.sem;
    mm.ewhw_heavy_tailed = unit.heavy_tailed;
    for (int l = 0; l < mm.L; ++l)
        mm.EWHW.push_back(unit.mean / cov.G_beta(l));
    power_coefficients(mm.ge, mm.EWHW, M, tau_u, sigma2, mm.a, mm.b);
    mm.P1 = phase1_power_reports(mm.p1, mm.EWHW, M);
    return mm;
}

inline MomentModel build_moment_model(const CovarianceSet &cov, int M, int tau_u, double p_ul, double sigma2,
                                      int ewhw_trials, std::uint64_t seed)
{
    return build_moment_model(cov, M, tau_u, p_ul, sigma2, unit_ewhw(cov.N(), M, ewhw_trials, seed));
}

// Re-evaluate the p_ul dependent parts for a new UE power.
inline void set_uplink_power(MomentModel &mm, double p_ul)
{
    mm.p_ul = p_ul;
    mm.c2 = phase2_covariance(mm.ge, p_ul, mm.sigma2);
}

} // namespace ota

#endif // OTA_MOMENTS_HPP
