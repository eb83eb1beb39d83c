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

#ifndef OTA_AP_LOCAL_HPP
#define OTA_AP_LOCAL_HPP

#include "ota/linalg.hpp"
#include "ota/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <stdexcept>
#include <string>
#include <vector>

namespace ota {

// Local sufficient statistics of one AP. t holds one column per data slot.
struct LocalStats {
    CMat A;  // K x K
    CMat t;  // K x tau_u
};

inline LocalStats local_stats(const CMat &H, const CMat &Y)
{
    if (H.rows() != Y.rows())
        throw std::invalid_argument("local_stats: H and Y row counts differ");
    LocalStats ls;
    ls.A = H.adjoint() * H;
    ls.t = H.adjoint() * Y;
    return ls;
}

inline int upper_length(int K) { return K * (K + 1) / 2; }

// 0-based position of entry (j, jp), j <= jp, in the row-wise traversal of
// the upper triangle.
inline int upper_index(int j, int jp, int K) { return j * K - j * (j - 1) / 2 + (jp - j); }

// 1-based position of diagonal entry j (1-based): (K - j/2)(j - 1) + j.
inline int diag_index_1based(int j, int K) { return (2 * K - j) * (j - 1) / 2 + j; }

inline CVec vectorize_upper(const CMat &A, double rel_tol = 1e-10)
{
    if (A.rows() != A.cols())
        throw std::invalid_argument("vectorize_upper: matrix is not square");
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if (!is_hermitian(A, rel_tol * scale))
        throw std::invalid_argument("vectorize_upper: matrix is not Hermitian");
    const int K = static_cast<int>(A.rows());
    CVec x(upper_length(K));
    int n = 0;
    for (int j = 0; j < K; ++j)
        for (int jp = j; jp < K; ++jp)
            x(n++) = A(j, jp);
    return x;
}

// Hermitian fill. Diagonal entries keep only their real part, so noisy
// estimates come back Hermitian.
inline CMat devectorize_upper(const CVec &x, int K)
{
    if (x.size() != upper_length(K))
        throw std::invalid_argument("devectorize_upper: expected length K(K+1)/2, got " + std::to_string(x.size()));
    CMat A(K, K);
    int n = 0;
    for (int j = 0; j < K; ++j) {
        A(j, j) = cd(x(n++).real(), 0.0);
        for (int jp = j + 1; jp < K; ++jp) {
            A(j, jp) = x(n);
            A(jp, j) = std::conj(x(n));
            ++n;
        }
    }
    return A;
}

inline int chunk_count(Eigen::Index len, int M) { return static_cast<int>((len + M - 1) / M); }

// Column m holds entries m*M .. m*M+M-1; the tail is zero padded.
inline CMat chunk(const CVec &x, int M)
{
    if (M < 1)
        throw std::invalid_argument("chunk: M must be positive");
    const int cols = chunk_count(x.size(), M);
    CMat X = CMat::Zero(M, cols);
    for (Eigen::Index g = 0; g < x.size(); ++g)
        X(g % M, g / M) = x(g);
    return X;
}

inline CVec dechunk(const CMat &X, Eigen::Index len)
{
    if (len > X.size())
        throw std::invalid_argument("dechunk: requested length exceeds payload");
    CVec x(len);
    for (Eigen::Index g = 0; g < len; ++g)
        x(g) = X(g % X.rows(), g / X.rows());
    return x;
}

// Slot-major stacking: entry t*K + k holds t_l[t][k].
inline CVec stack_mf(const CMat &t)
{
    return Eigen::Map<const CVec>(t.data(), t.size());
}

inline CMat unstack_mf(const CVec &x, int K, int tau_u)
{
    if (x.size() != static_cast<Eigen::Index>(K) * tau_u)
        throw std::invalid_argument("unstack_mf: length mismatch");
    return Eigen::Map<const CMat>(x.data(), K, tau_u);
}

inline int phase1_columns(int K, int M) { return chunk_count(upper_length(K), M); }
inline int phase2_columns(int K, int tau_u, int M) { return chunk_count(static_cast<Eigen::Index>(K) * tau_u, M); }

// Zero-forcing precoder G (G^H G)^{-1}, built from a thin QR so the identity
// G^H W = I holds to about cond(G) * eps.
inline CMat zf_precoder(const CMat &G, double max_cond = 1e12)
{
    if (G.rows() < G.cols())
        throw SingularChannelError("zf_precoder: G has fewer rows than columns");
    const double c = condition_number(G);
    if (!(c <= max_cond))
        throw SingularChannelError("zf_precoder: fronthaul channel is rank deficient (condition number " +
                                   std::to_string(c) + ")");
    const Eigen::Index N = G.rows(), M = G.cols();
    Eigen::HouseholderQR<CMat> qr(G);
    const CMat Q = qr.householderQ() * CMat::Identity(N, M);
    const CMat R = qr.matrixQR().topRows(M).triangularView<Eigen::Upper>();
    // W = Q R^{-H}, i.e. W^H = R^{-1} Q^H.
    const CMat WH = R.triangularView<Eigen::Upper>().solve(Q.adjoint());
    return WH.adjoint();
}

// Noise-plus-residual covariance p sum_k Rtilde_kl + sigma2 I at one AP.
inline CMat whitening_covariance(const std::vector<CMat> &Rtilde_l, double p_ul, double sigma2, int N)
{
    CMat S = sigma2 * CMat::Identity(N, N);
    for (const CMat &Rt : Rtilde_l)
        S += p_ul * Rt;
    return 0.5 * (S + S.adjoint());
}

// A_l = H_hat^H S^{-1} H_hat, t_l = H_hat^H S^{-1} y_l with S from
// whitening_covariance. Uses one Cholesky factor for both products.
inline LocalStats whitened_local_stats(const CMat &H_hat, const CMat &Y, const std::vector<CMat> &Rtilde_l,
                                       double p_ul, double sigma2)
{
    const CMat S = whitening_covariance(Rtilde_l, p_ul, sigma2, static_cast<int>(H_hat.rows()));
    Eigen::LLT<CMat> llt(S);
    if (llt.info() != Eigen::Success)
        throw NotPsdError("whitened_local_stats: covariance is not positive definite");
    const CMat B = llt.matrixL().solve(H_hat);
    const CMat Yw = llt.matrixL().solve(Y);
    LocalStats ls;
    ls.A = B.adjoint() * B;
    ls.t = B.adjoint() * Yw;
    return ls;
}

} // namespace ota

#endif // OTA_AP_LOCAL_HPP
