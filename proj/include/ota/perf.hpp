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

#ifndef OTA_PERF_HPP
#define OTA_PERF_HPP

#include "ota/ap_local.hpp"
#include "ota/types.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ota {

enum class Estimator { LS, LMMSE };

inline const char *estimator_name(Estimator e) { return e == Estimator::LS ? "LS" : "LMMSE"; }

// Welford accumulator. merge() allows ordered reduction of partial results.
struct RunningStats {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x)
    {
        ++n;
        const double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }

    void merge(const RunningStats &o)
    {
        if (o.n == 0)
            return;
        if (n == 0) {
            *this = o;
            return;
        }
        const long nn = n + o.n;
        const double d = o.mean - mean;
        mean += d * o.n / nn;
        m2 += o.m2 + d * d * (static_cast<double>(n) * o.n / nn);
        n = nn;
    }

    double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
    double sem() const { return n > 1 ? std::sqrt(variance() / n) : 0.0; }
};

// Weight of each vectorized Gramian entry in ||.||_F^2.
inline RVec gramian_weights(int K)
{
    RVec w = RVec::Constant(upper_length(K), 2.0);
    for (int j = 0; j < K; ++j)
        w(upper_index(j, j, K)) = 1.0;
    return w;
}

inline double mse_gramian_theory(Estimator est, const RVec &c1, double eta1, double sigma2, int K)
{
    if (est == Estimator::LS)
        return static_cast<double>(K) * K * sigma2 / eta1;
    const RVec w = gramian_weights(K);
    double s = 0.0;
    for (Eigen::Index n = 0; n < c1.size(); ++n)
        if (c1(n) > 0.0)
            s += w(n) / (1.0 / c1(n) + eta1 / sigma2);
    return s;
}

// Per data slot.
inline double mse_mf_theory(Estimator est, const RVec &c2, double eta2, double sigma2)
{
    if (est == Estimator::LS)
        return static_cast<double>(c2.size()) * sigma2 / eta2;
    double s = 0.0;
    for (Eigen::Index i = 0; i < c2.size(); ++i)
        if (c2(i) > 0.0)
            s += 1.0 / (1.0 / c2(i) + eta2 / sigma2);
    return s;
}

struct MseReport {
    double theory = 0.0;
    double empirical = 0.0;
    double sem = 0.0;
    double nmse_theory_db = 0.0;
    double nmse_empirical_db = 0.0;
};

// errors: per-trial squared errors; energy: E||target||^2 used for the NMSE.
inline MseReport mse_empirical(const std::vector<double> &errors, double energy, double theory = 0.0)
{
    if (errors.size() < 100)
        throw std::invalid_argument("mse_empirical: at least 100 trials required");
    RunningStats rs;
    for (double e : errors)
        rs.add(e);
    MseReport r;
    r.theory = theory;
    r.empirical = rs.mean;
    r.sem = rs.sem();
    r.nmse_theory_db = linear_to_db(theory / energy);
    r.nmse_empirical_db = linear_to_db(rs.mean / energy);
    return r;
}

// ||I - sqrt(eta p) V A||_F^2 + sigma2 (eta tr(V A V^H) + ||V||_F^2) for one
// channel realization; ||sqrt(eta) V H^H||_F^2 = eta tr(V A V^H).
inline double data_mse_term(const CMat &V, const CMat &A, double eta, double p_ul, double sigma2)
{
    const Eigen::Index K = A.rows();
    const double r = (CMat::Identity(K, K) - std::sqrt(eta * p_ul) * V * A).squaredNorm();
    const double a2 = eta * (V * A * V.adjoint()).trace().real();
    return r + sigma2 * (a2 + V.squaredNorm());
}

// The ZF special case written through E tr A^{-1} and E tr A^{-2}.
inline double data_mse_zf(double tr_inv, double tr_inv2, double a_r, double b_r, double P_max, double p_ul,
                          double sigma2)
{
    return sigma2 / p_ul * tr_inv + (a_r * sigma2 / P_max + b_r * sigma2 / (P_max * p_ul)) * tr_inv2;
}

inline double data_mse_floor(double tr_inv2, double a_r, double P_max, double sigma2)
{
    return sigma2 * a_r / P_max * tr_inv2;
}

// Accumulates the expectations in the UatF SINR over channel realizations.
// v holds the combiners as columns (v_k = V^H e_k), A the true Gramian.
class UatfAccumulator {
public:
    explicit UatfAccumulator(int K = 0) { reset(K); }

    void reset(int K)
    {
        K_ = K;
        n_ = 0;
        gain_ = CVec::Zero(K);
        inter_ = RVec::Zero(K);
        quad_ = RVec::Zero(K);
        norm_ = RVec::Zero(K);
    }

    void add(const CMat &v, const CMat &A)
    {
        const CMat G = v.adjoint() * A;  // G(k, i) = v_k^H a_i
        for (int k = 0; k < K_; ++k) {
            gain_(k) += G(k, k);
            inter_(k) += G.row(k).squaredNorm();
            quad_(k) += (v.col(k).adjoint() * A * v.col(k))(0, 0).real();
            norm_(k) += v.col(k).squaredNorm();
        }
        ++n_;
    }

    void merge(const UatfAccumulator &o)
    {
        gain_ += o.gain_;
        inter_ += o.inter_;
        quad_ += o.quad_;
        norm_ += o.norm_;
        n_ += o.n_;
    }

    long count() const { return n_; }

    // inv_eta = 1/eta2, or 0 for the wired limit.
    RVec sinr(double rho, double inv_eta) const
    {
        RVec s(K_);
        const double n = static_cast<double>(n_);
        for (int k = 0; k < K_; ++k) {
            const double g2 = std::norm(gain_(k) / n);
            const double den = rho * inter_(k) / n - rho * g2 + quad_(k) / n + inv_eta * norm_(k) / n;
            s(k) = rho * g2 / den;
        }
        return s;
    }

private:
    int K_ = 0;
    long n_ = 0;
    CVec gain_;
    RVec inter_, quad_, norm_;
};

inline double prelog(int tau_p, int tau_c) { return 1.0 - static_cast<double>(tau_p) / tau_c; }

inline RVec uatf_rate(const UatfAccumulator &acc, double rho, double inv_eta, int tau_p, int tau_c)
{
    const RVec s = acc.sinr(rho, inv_eta);
    return prelog(tau_p, tau_c) * (RVec::Ones(s.size()) + s).array().log() / std::log(2.0);
}

// Instantaneous side-information SINR with the self term excluded from the
// interference sum.
inline RVec sinr_si(const CMat &v, const CMat &A, double rho)
{
    const CMat G = v.adjoint() * A;
    const Eigen::Index K = A.rows();
    RVec s(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double sig = std::norm(G(k, k));
        const double inter = G.row(k).squaredNorm() - sig;
        const double noise = (v.col(k).adjoint() * A * v.col(k))(0, 0).real();
        s(k) = rho * sig / (rho * inter + noise);
    }
    return s;
}

// Accumulates the ergodic side-information rate E log2(1 + SINR_SI).
class WiredSiAccumulator {
public:
    explicit WiredSiAccumulator(int K = 0) : se_(RVec::Zero(K)) {}

    void add(const CMat &v, const CMat &A, double rho)
    {
        const RVec s = sinr_si(v, A, rho);
        se_ += ((RVec::Ones(s.size()) + s).array().log() / std::log(2.0)).matrix();
        ++n_;
    }

    void merge(const WiredSiAccumulator &o)
    {
        se_ += o.se_;
        n_ += o.n_;
    }

    RVec rate(int tau_p, int tau_c) const { return prelog(tau_p, tau_c) * se_ / static_cast<double>(n_); }

private:
    RVec se_;
    long n_ = 0;
};

// ZF combiner columns v_k = A^{-1} e_k (A Hermitian); the common scale is
// irrelevant to every SINR above.
inline CMat zf_combiner_columns(const CMat &A) { return A.partialPivLu().inverse().adjoint(); }

} // namespace ota

#endif // OTA_PERF_HPP
