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

#ifndef OTA_DETECT_HPP
#define OTA_DETECT_HPP

#include "ota/linalg.hpp"
#include "ota/types.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ota {

// Unit average energy constellation with a Gray labeling. Point i carries the
// bit pattern of i, most significant bit first.
struct Constellation {
    std::vector<cd> points;
    int bits_per_symbol = 0;

    int size() const { return static_cast<int>(points.size()); }
    int bit(int index, int b) const { return (index >> (bits_per_symbol - 1 - b)) & 1; }

    int nearest(cd x) const
    {
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (int i = 0; i < size(); ++i) {
            const double d = std::norm(x - points[i]);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        return best;
    }
};

inline Constellation bpsk()
{
    Constellation c;
    c.points = {cd(1.0, 0.0), cd(-1.0, 0.0)};
    c.bits_per_symbol = 1;
    return c;
}

// Square Gray-labeled QAM of order Q (a power of 4). The first half of the bit
// label selects the in-phase level, the second half the quadrature level; bit
// value 0 maps to the positive side, so 4-QAM is (1 - 2 b0 + j (1 - 2 b1))/sqrt(2).
inline Constellation square_qam(int Q)
{
    int m = 0;
    while ((1 << m) < Q)
        ++m;
    if ((1 << m) != Q || m % 2 != 0 || Q < 4)
        throw std::invalid_argument("square_qam: order must be a power of 4");
    const int h = m / 2;
    const int P = 1 << h;
    const double scale = std::sqrt(2.0 * (P * P - 1) / 3.0);
    auto level = [P](int g) {
        int idx = g;
        for (int s = g >> 1; s; s >>= 1)
            idx ^= s;
        return static_cast<double>((P - 1) - 2 * idx);
    };
    Constellation c;
    c.bits_per_symbol = m;
    c.points.resize(Q);
    for (int i = 0; i < Q; ++i)
        c.points[i] = cd(level(i >> h), level(i & (P - 1))) / scale;
    return c;
}

inline Constellation qam4() { return square_qam(4); }

inline std::vector<int> hard_decisions(const CMat &s_soft, const Constellation &c)
{
    std::vector<int> out(static_cast<std::size_t>(s_soft.size()));
    for (Eigen::Index i = 0; i < s_soft.size(); ++i)
        out[i] = c.nearest(s_soft(i));
    return out;
}

// (p A_hat + sigma2 I)^{-1} t_hat, one column per slot.
inline CMat detect_lmmse(const CMat &A_hat, const CMat &t_hat, double p_ul, double sigma2)
{
    const CMat B = p_ul * A_hat + sigma2 * CMat::Identity(A_hat.rows(), A_hat.cols());
    return B.partialPivLu().solve(t_hat);
}

struct LsDetection {
    CMat s_soft;
    bool used_pinv = false;
};

// p^{-1/2} A_hat^{-1} t_hat. With allow_pinv the pseudo-inverse replaces the
// inverse when A_hat is too ill-conditioned; otherwise that case throws.
inline LsDetection detect_ls(const CMat &A_hat, const CMat &t_hat, double p_ul, bool allow_pinv = false,
                             double max_cond = 1e12)
{
    LsDetection r;
    const double c = condition_number(A_hat);
    if (c <= max_cond) {
        r.s_soft = A_hat.partialPivLu().solve(t_hat) / std::sqrt(p_ul);
        return r;
    }
    if (!allow_pinv)
        throw SingularChannelError("detect_ls: Gramian estimate is ill-conditioned (condition number " +
                                   std::to_string(c) + "); enable allow_pinv for the pseudo-inverse fallback");
    r.used_pinv = true;
    r.s_soft = A_hat.completeOrthogonalDecomposition().pseudoInverse() * t_hat / std::sqrt(p_ul);
    return r;
}

// One-step data estimate V z with V = (p eta)^{-1/2} A_hat^{-1} applied to the
// raw phase-2 observation (already unstacked to K x tau_u).
inline CMat one_step_combiner(const CMat &A_hat, double p_ul, double eta)
{
    return A_hat.partialPivLu().inverse() / std::sqrt(p_ul * eta);
}

namespace detail {

inline void check_search_space(int Q, int K)
{
    const double space = std::pow(static_cast<double>(Q), K);
    if (space > static_cast<double>(1u << 20))
        throw std::invalid_argument("exhaustive detection: |S|^K exceeds 2^20");
}

// Calls f(index_vector, metric) for every s in S^K where the metric is
// ||ybar - sqrt(p) Hbar s||^2. Residuals are updated incrementally.
template <class F>
void enumerate_metrics(const CMat &Hbar, const CVec &ybar, double p_ul, const Constellation &c, F &&f)
{
    const int K = static_cast<int>(Hbar.cols());
    const int Q = c.size();
    check_search_space(Q, K);
    const double sp = std::sqrt(p_ul);
    std::vector<CMat> cols(K);
    for (int k = 0; k < K; ++k) {
        cols[k].resize(Hbar.rows(), Q);
        for (int q = 0; q < Q; ++q)
            cols[k].col(q) = sp * c.points[q] * Hbar.col(k);
    }
    std::vector<int> idx(K, 0);
    CVec r = ybar;
    for (int k = 0; k < K; ++k)
        r -= cols[k].col(0);
    while (true) {
        f(idx, r.squaredNorm());
        int k = 0;
        while (k < K) {
            r += cols[k].col(idx[k]);
            if (++idx[k] < Q) {
                r -= cols[k].col(idx[k]);
                break;
            }
            idx[k] = 0;
            r -= cols[k].col(0);
            ++k;
        }
        if (k == K)
            break;
    }
}

} // namespace detail

struct MapDetection {
    std::vector<int> s_hard;  // K x tau_u, column-major
    bool clamped = false;     // A_hat had negative eigenvalues
};

// Exhaustive minimum of ||A^{-1/2} t - sqrt(p) A^{1/2} s||^2 per slot.
inline MapDetection detect_map(const CMat &A_hat, const CMat &t_hat, double p_ul, const Constellation &c)
{
    const HermitianRoots hr = hermitian_roots(A_hat);
    const int K = static_cast<int>(A_hat.rows());
    detail::check_search_space(c.size(), K);
    MapDetection out;
    out.clamped = hr.clamped;
    out.s_hard.resize(static_cast<std::size_t>(K) * t_hat.cols());
    for (Eigen::Index t = 0; t < t_hat.cols(); ++t) {
        const CVec ybar = hr.inv_sqrt * t_hat.col(t);
        double best = std::numeric_limits<double>::infinity();
        detail::enumerate_metrics(hr.sqrt, ybar, p_ul, c, [&](const std::vector<int> &idx, double m) {
            if (m < best) {
                best = m;
                for (int k = 0; k < K; ++k)
                    out.s_hard[t * K + k] = idx[k];
            }
        });
    }
    return out;
}

// Max-log LLRs ln P(b=1)/P(b=0) ~ (min_{b=0} d - min_{b=1} d) / sigma2.
// Layout: llr(k * bits + b, slot).
inline RMat llr_maxlog(const CMat &A_hat, const CMat &t_hat, double p_ul, double sigma2, const Constellation &c)
{
    const HermitianRoots hr = hermitian_roots(A_hat);
    const int K = static_cast<int>(A_hat.rows());
    const int nb = c.bits_per_symbol;
    detail::check_search_space(c.size(), K);
    RMat llr(K * nb, t_hat.cols());
    const double inf = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < t_hat.cols(); ++t) {
        const CVec ybar = hr.inv_sqrt * t_hat.col(t);
        RMat mins = RMat::Constant(K * nb, 2, inf);
        detail::enumerate_metrics(hr.sqrt, ybar, p_ul, c, [&](const std::vector<int> &idx, double m) {
            for (int k = 0; k < K; ++k)
                for (int b = 0; b < nb; ++b) {
                    double &slot = mins(k * nb + b, c.bit(idx[k], b));
                    if (m < slot)
                        slot = m;
                }
        });
        llr.col(t) = (mins.col(0) - mins.col(1)) / sigma2;
    }
    return llr;
}

} // namespace ota

#endif // OTA_DETECT_HPP
