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

#ifndef OTA_PIPELINE_HPP
#define OTA_PIPELINE_HPP

#include "ota/ap_local.hpp"
#include "ota/channel.hpp"
#include "ota/detect.hpp"
#include "ota/fronthaul.hpp"
#include "ota/moments.hpp"
#include "ota/ods.hpp"
#include "ota/perf.hpp"
#include "ota/power.hpp"
#include "ota/scenario.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace ota {

// One deployment with its statistics-derived model.
struct Drop {
    ScenarioConfig cfg;
    std::uint64_t index = 0;
    Scenario sc;
    MomentModel mm;        // at cfg.p_ul, access noise cfg.sigma2
    PayloadPrior prior1;
};

// Drop over a given covariance set (no geometry).
inline Drop make_drop(const ScenarioConfig &cfg, std::uint64_t drop, const CovarianceSet &cov,
                      const EwhwEstimate &unit)
{
    Drop d;
    d.cfg = cfg;
    d.index = drop;
    d.sc.cov = cov;
    d.mm = build_moment_model(d.sc.cov, cfg.M, cfg.tau_u, cfg.p_ul, cfg.sigma2, unit);
    d.prior1 = phase1_prior(d.mm.mu1(), d.mm.c1(), cfg.M);
    return d;
}

inline Drop make_drop(const ScenarioConfig &cfg, std::uint64_t drop, const EwhwEstimate &unit)
{
    Drop d;
    d.cfg = cfg;
    d.index = drop;
    d.sc = generate_scenario(cfg, drop);
    d.mm = build_moment_model(d.sc.cov, cfg.M, cfg.tau_u, cfg.p_ul, cfg.sigma2, unit);
    d.prior1 = phase1_prior(d.mm.mu1(), d.mm.c1(), cfg.M);
    return d;
}

inline Rng trial_stream(const ScenarioConfig &cfg, std::uint64_t drop, std::uint64_t trial)
{
    return make_stream(cfg.seed, StreamTag::trial, (drop << 40) ^ trial);
}

inline std::vector<int> draw_symbols(int count, int Q, Rng &rng)
{
    std::uniform_int_distribution<int> ud(0, Q - 1);
    std::vector<int> s(count);
    for (int &x : s)
        x = ud(rng);
    return s;
}

inline CMat symbol_matrix(const std::vector<int> &idx, const Constellation &c, int K, int tau_u)
{
    CMat S(K, tau_u);
    for (int i = 0; i < K * tau_u; ++i)
        S(i) = c.points[idx[i]];
    return S;
}

// Perfect-CSI realization. The signal and noise parts of every statistic are
// kept apart (AP noise and CPU noise at unit variance) so one realization
// serves any (p_ul, sigma2, eta) combination:
//   t   = sqrt(p) Ts + sigma Tn
//   Z_1 = sqrt(eta1) X1 + sigma E1
//   Z_2 = sqrt(eta2) (sqrt(p) X2s + sigma X2n) + sigma E2
struct Trial {
    std::vector<int> sym;
    std::vector<CMat> A_l, Ts_l, Tn_l;
    CMat A, Ts, Tn;
    CMat X1, X2s, X2n;
    CMat E1, E2;
};

inline Trial realize_trial(const Drop &d, std::uint64_t trial, const Constellation &c)
{
    const ScenarioConfig &cfg = d.cfg;
    const int K = cfg.K, L = cfg.L, tu = cfg.tau_u, M = cfg.M;
    Rng rng = trial_stream(cfg, d.index, trial);
    const AccessChannels ch = sample_access(d.sc.cov, rng);
    const FronthaulChannels fh = sample_fronthaul(d.sc.cov, M, rng);
    Trial tr;
    tr.sym = draw_symbols(K * tu, c.size(), rng);
    const CMat S = symbol_matrix(tr.sym, c, K, tu);
    tr.A = CMat::Zero(K, K);
    tr.Ts = CMat::Zero(K, tu);
    tr.Tn = CMat::Zero(K, tu);
    std::vector<CMat> W(L), P1(L), P2s(L), P2n(L);
    for (int l = 0; l < L; ++l) {
        const CMat Nl = complex_normal(cfg.N, tu, rng);
        const CMat &H = ch.H[l];
        CMat Al = H.adjoint() * H;
        Al = (0.5 * (Al + Al.adjoint())).eval();
        tr.Ts_l.push_back(Al * S);
        tr.Tn_l.push_back(H.adjoint() * Nl);
        tr.A += Al;
        tr.Ts += tr.Ts_l.back();
        tr.Tn += tr.Tn_l.back();
        P1[l] = chunk(vectorize_upper(Al), M);
        P2s[l] = chunk(stack_mf(tr.Ts_l.back()), M);
        P2n[l] = chunk(stack_mf(tr.Tn_l.back()), M);
        W[l] = zf_precoder(fh.G[l]);
        tr.A_l.push_back(std::move(Al));
    }
    tr.X1 = ota_superpose(P1, W, fh.G);
    tr.X2s = ota_superpose(P2s, W, fh.G);
    tr.X2n = ota_superpose(P2n, W, fh.G);
    tr.E1 = complex_normal(M, tr.X1.cols(), rng);
    tr.E2 = complex_normal(M, tr.X2s.cols(), rng);
    return tr;
}

struct TrialObservation {
    CpuObservation z1, z2;
};

inline TrialObservation observe(const Trial &tr, double p_ul, double sigma2, double eta1, double eta2)
{
    const double s = std::sqrt(sigma2);
    TrialObservation o;
    o.z1.Z = std::sqrt(eta1) * tr.X1 + s * tr.E1;
    o.z1.eta = eta1;
    o.z1.sigma2 = sigma2;
    o.z2.Z = std::sqrt(eta2) * (std::sqrt(p_ul) * tr.X2s + s * tr.X2n) + s * tr.E2;
    o.z2.eta = eta2;
    o.z2.sigma2 = sigma2;
    return o;
}

struct PayloadEstimates {
    CMat x1, x2;
};

inline PayloadEstimates estimate_payloads(const TrialObservation &o, Estimator est, const PayloadPrior &prior1,
                                          const PayloadPrior &prior2)
{
    PayloadEstimates pe;
    if (est == Estimator::LS) {
        pe.x1 = ls_estimate(o.z1);
        pe.x2 = ls_estimate(o.z2);
    } else {
        pe.x1 = lmmse_estimate(o.z1, prior1.mu, prior1.c);
        pe.x2 = lmmse_estimate(o.z2, prior2.mu, prior2.c);
    }
    return pe;
}

// ||A - A_hat||_F^2 evaluated on the vectorized payload (off-diagonal
// positions weighted twice).
inline double gramian_sq_error(const CMat &x1_hat, const CMat &A, const RVec &w)
{
    const int K = static_cast<int>(A.rows());
    const CVec e = dechunk(x1_hat, upper_length(K)) - vectorize_upper(A);
    double s = 0.0;
    for (Eigen::Index n = 0; n < e.size(); ++n)
        s += w(n) * std::norm(e(n));
    return s;
}

// Per-slot ||t - t_hat||^2 averaged over the tau_u slots.
inline double mf_sq_error(const CMat &x2_hat, const CMat &T)
{
    const CVec e = dechunk(x2_hat, T.size()) - stack_mf(T);
    return e.squaredNorm() / static_cast<double>(T.cols());
}

inline int count_symbol_errors(const CMat &s_soft, const std::vector<int> &sym, const Constellation &c)
{
    int err = 0;
    for (Eigen::Index i = 0; i < s_soft.size(); ++i)
        if (c.nearest(s_soft(i)) != sym[i])
            ++err;
    return err;
}

// ODS: per-AP floating-point quantization of both payloads, digital sum at the
// CPU. Each AP normalizes by the RMS of its own payload entries, computed from
// the moments and therefore known at the CPU.
// Range margin over the Gaussian calibration sample. Gramian diagonals are
// chi-square distributed with heavier tails than the sample.
inline constexpr double kFormatHeadroom = 4.0;

struct OdsQuantizer {
    FloatFormat f1, f2;
    RVec s1, s2;
};

inline OdsQuantizer make_ods_quantizer(const MomentModel &mm, int Nb, Rng &rng, int draws_per_entry = 8)
{
    const int K = mm.K;
    OdsQuantizer q;
    q.s1.resize(mm.L);
    q.s2.resize(mm.L);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> cal1, cal2;
    for (int l = 0; l < mm.L; ++l) {
        const RVec &mu = mm.p1.mu1_l[l];
        const RVec &c = mm.p1.c1_l[l];
        q.s1(l) = std::sqrt((c + mu.cwiseAbs2()).mean());
        const RVec v2 = mm.p_ul * mm.ge.EA2[l] + mm.sigma2 * mm.ge.EA[l];
        q.s2(l) = std::sqrt(v2.mean());
        for (int j = 0; j < K; ++j)
            for (int jp = j; jp < K; ++jp) {
                const int n = upper_index(j, jp, K);
                for (int r = 0; r < draws_per_entry; ++r) {
                    if (j == jp) {
                        cal1.push_back((mu(n) + std::sqrt(c(n)) * nd(rng)) / q.s1(l));
                    } else {
                        cal1.push_back(std::sqrt(c(n) / 2.0) * nd(rng) / q.s1(l));
                        cal1.push_back(std::sqrt(c(n) / 2.0) * nd(rng) / q.s1(l));
                    }
                }
            }
        for (int k = 0; k < K; ++k)
            for (int r = 0; r < 2 * draws_per_entry; ++r)
                cal2.push_back(std::sqrt(v2(k) / 2.0) * nd(rng) / q.s2(l));
    }
    q.f1 = choose_format(Nb, cal1, kFormatHeadroom);
    q.f2 = choose_format(Nb, cal2, kFormatHeadroom);
    return q;
}

inline GlobalStats ods_stats(const Trial &tr, const OdsQuantizer &q, double p_ul, double sigma2)
{
    const int K = static_cast<int>(tr.A.rows());
    const double sp = std::sqrt(p_ul), s = std::sqrt(sigma2);
    CVec x1 = CVec::Zero(upper_length(K));
    CMat T = CMat::Zero(tr.Ts.rows(), tr.Ts.cols());
    for (std::size_t l = 0; l < tr.A_l.size(); ++l) {
        x1 += quantize_scaled(vectorize_upper(tr.A_l[l]), q.s1(l), q.f1);
        T += quantize_scaled(sp * tr.Ts_l[l] + s * tr.Tn_l[l], q.s2(l), q.f2);
    }
    GlobalStats gs;
    gs.A_hat = devectorize_upper(x1, K);
    gs.t_hat = T;
    return gs;
}

// Imperfect access CSI. The statistics are whitened by
// S_l = p sum_k Rtilde_kl + sigma2 I, so they behave like perfect-CSI
// statistics of channels with covariance S^{-1/2} (R - Rtilde) S^{-1/2} and
// unit access noise.
inline CovarianceSet whitened_covariances(const CovarianceSet &cov, double p_ul, double p_pilot, int tau_p,
                                          double sigma2)
{
    const int K = cov.K(), L = cov.L(), N = cov.N();
    std::vector<CMat> Rw(static_cast<std::size_t>(K) * L);
    for (int l = 0; l < L; ++l) {
        std::vector<CMat> Rt(K);
        for (int k = 0; k < K; ++k)
            Rt[k] = access_error_covariance(cov.R(k, l), p_pilot, tau_p, sigma2);
        const CMat S = whitening_covariance(Rt, p_ul, sigma2, N);
        const HermitianRoots hr = hermitian_roots(S);
        for (int k = 0; k < K; ++k) {
            CMat R = hr.inv_sqrt * (cov.R(k, l) - Rt[k]) * hr.inv_sqrt;
            Rw[k * L + l] = 0.5 * (R + R.adjoint());
        }
    }
    return CovarianceSet::from_covariances(K, L, std::move(Rw), cov.G_beta());
}

struct ImpCsiTrial {
    std::vector<int> sym;
    CMat A, T;   // whitened sums
    CMat X1, X2; // superposed payloads
    CMat E1, E2; // unit CPU noise
};

inline ImpCsiTrial realize_impcsi_trial(const Drop &d, std::uint64_t trial, const Constellation &c, double p_ul,
                                        double p_pilot)
{
    const ScenarioConfig &cfg = d.cfg;
    const int K = cfg.K, L = cfg.L, tu = cfg.tau_u, M = cfg.M;
    Rng rng = trial_stream(cfg, d.index, trial);
    const AccessChannels ch = sample_access(d.sc.cov, rng);
    const FronthaulChannels fh = sample_fronthaul(d.sc.cov, M, rng);
    ImpCsiTrial tr;
    tr.sym = draw_symbols(K * tu, c.size(), rng);
    const CMat S = symbol_matrix(tr.sym, c, K, tu);
    const AccessCsiEstimate est = lmmse_access_estimate(ch, d.sc.cov, p_pilot, cfg.tau_p, cfg.sigma2, rng);
    tr.A = CMat::Zero(K, K);
    tr.T = CMat::Zero(K, tu);
    std::vector<CMat> W(L), P1(L), P2(L);
    for (int l = 0; l < L; ++l) {
        const CMat Y = std::sqrt(p_ul) * ch.H[l] * S + complex_normal(cfg.N, tu, rng, cfg.sigma2);
        std::vector<CMat> Rt(K);
        for (int k = 0; k < K; ++k)
            Rt[k] = est.Rt(k, l);
        LocalStats ls = whitened_local_stats(est.H_hat[l], Y, Rt, p_ul, cfg.sigma2);
        ls.A = (0.5 * (ls.A + ls.A.adjoint())).eval();
        tr.A += ls.A;
        tr.T += ls.t;
        P1[l] = chunk(vectorize_upper(ls.A), M);
        P2[l] = chunk(stack_mf(ls.t), M);
        W[l] = zf_precoder(fh.G[l]);
    }
    tr.X1 = ota_superpose(P1, W, fh.G);
    tr.X2 = ota_superpose(P2, W, fh.G);
    tr.E1 = complex_normal(M, tr.X1.cols(), rng);
    tr.E2 = complex_normal(M, tr.X2.cols(), rng);
    return tr;
}

} // namespace ota

#endif // OTA_PIPELINE_HPP
