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

#ifndef OTA_FRONTHAUL_HPP
#define OTA_FRONTHAUL_HPP

#include "ota/ap_local.hpp"
#include "ota/moments.hpp"
#include "ota/types.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ota {

struct CpuObservation {
    CMat Z;          // M x M_i
    double eta = 0.0;
    double sigma2 = 0.0;
};

struct GlobalStats {
    CMat A_hat;  // K x K, Hermitian
    CMat t_hat;  // K x tau_u
};

// Noise-free sum_l G_l^H W_l X_l.
inline CMat ota_superpose(const std::vector<CMat> &payloads, const std::vector<CMat> &W, const std::vector<CMat> &G)
{
    if (payloads.empty() || payloads.size() != W.size() || W.size() != G.size())
        throw std::invalid_argument("ota_superpose: payload, precoder and channel counts differ");
    CMat S = CMat::Zero(G.front().cols(), payloads.front().cols());
    for (std::size_t l = 0; l < payloads.size(); ++l)
        S.noalias() += G[l].adjoint() * (W[l] * payloads[l]);
    return S;
}

inline CpuObservation ota_transmit(const std::vector<CMat> &payloads, const std::vector<CMat> &W,
                                   const std::vector<CMat> &G, double eta, double sigma2, Rng &rng)
{
    CpuObservation obs;
    const CMat S = ota_superpose(payloads, W, G);
    obs.Z = std::sqrt(eta) * S + complex_normal(S.rows(), S.cols(), rng, sigma2);
    obs.eta = eta;
    obs.sigma2 = sigma2;
    return obs;
}

// ZF precoders built from G_hat, signal passed through the true G.
inline CpuObservation ota_transmit_imperfect_csi(const std::vector<CMat> &payloads, const std::vector<CMat> &G_hat,
                                                 const std::vector<CMat> &G, double eta, double sigma2, Rng &rng)
{
    std::vector<CMat> W;
    W.reserve(G_hat.size());
    for (const CMat &Gh : G_hat)
        W.push_back(zf_precoder(Gh));
    return ota_transmit(payloads, W, G, eta, sigma2, rng);
}

inline CMat ls_estimate(const CpuObservation &obs)
{
    if (!(obs.eta > 0.0))
        throw std::invalid_argument("ls_estimate: eta must be positive");
    return obs.Z / std::sqrt(obs.eta);
}

// Entrywise Wiener filter; mu and c give the prior mean and variance of every
// payload position (same shape as Z). noise_var defaults to obs.sigma2.
inline CMat lmmse_estimate(const CpuObservation &obs, const RMat &mu, const RMat &c, double noise_var = -1.0)
{
    if (mu.rows() != obs.Z.rows() || mu.cols() != obs.Z.cols() || c.rows() != mu.rows() || c.cols() != mu.cols())
        throw std::invalid_argument("lmmse_estimate: prior shape does not match observation");
    if ((c.array() < 0.0).any())
        throw std::invalid_argument("lmmse_estimate: negative prior variance");
    const double s2 = noise_var >= 0.0 ? noise_var : obs.sigma2;
    const double se = std::sqrt(obs.eta);
    CMat x(obs.Z.rows(), obs.Z.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double cc = c(i, j);
            const double den = obs.eta * cc + s2;
            const double gain = den > 0.0 ? se * cc / den : 0.0;
            x(i, j) = mu(i, j) + gain * (obs.Z(i, j) - se * mu(i, j));
        }
    return x;
}

// Chunked priors of the two payloads, same layout as the transmitted matrices.
struct PayloadPrior {
    RMat mu;
    RMat c;
};

inline PayloadPrior phase1_prior(const RVec &mu1, const RVec &c1, int M)
{
    PayloadPrior p;
    p.mu = chunk(mu1.cast<cd>(), M).real();
    p.c = chunk(c1.cast<cd>(), M).real();
    return p;
}

inline PayloadPrior phase2_prior(const RVec &c2, int tau_u, int M)
{
    const Eigen::Index K = c2.size();
    CVec v(K * tau_u);
    for (int t = 0; t < tau_u; ++t)
        v.segment(t * K, K) = c2.cast<cd>();
    PayloadPrior p;
    p.c = chunk(v, M).real();
    p.mu = RMat::Zero(p.c.rows(), p.c.cols());
    return p;
}

inline GlobalStats reconstruct(const CMat &x1, const CMat &x2, int K, int tau_u)
{
    const Eigen::Index len1 = upper_length(K);
    const Eigen::Index len2 = static_cast<Eigen::Index>(K) * tau_u;
    if (x1.size() < len1 || x2.size() < len2)
        throw std::invalid_argument("reconstruct: payload too short");
    GlobalStats gs;
    gs.A_hat = devectorize_upper(dechunk(x1, len1), K);
    gs.t_hat = unstack_mf(dechunk(x2, len2), K, tau_u);
    return gs;
}

// Monte Carlo of the per-entry power of the residual term
// sqrt(eta) sum_l G_tilde_l^H W_hat_l X_l under imperfect fronthaul CSI.
// draw(l, rng) returns the pair (G_hat_l, G_tilde_l); payload(l, rng) a chunk
// matrix for AP l. Returns the effective noise variance sigma2 + residual.
template <class ChannelDraw, class PayloadDraw>
double imperfect_fronthaul_noise(int L, double eta, double sigma2, int trials, Rng &rng, ChannelDraw &&draw,
                                 PayloadDraw &&payload)
{
    if (trials < 1)
        throw std::invalid_argument("imperfect_fronthaul_noise: trials must be positive");
    double acc = 0.0;
    for (int i = 0; i < trials; ++i) {
        CMat r;
        for (int l = 0; l < L; ++l) {
            const auto [Gh, Gt] = draw(l, rng);
            const CMat X = payload(l, rng);
            const CMat term = Gt.adjoint() * (zf_precoder(Gh) * X);
            if (l == 0)
                r = term;
            else
                r += term;
        }
        acc += r.squaredNorm() / static_cast<double>(r.size());
    }
    return sigma2 + eta * acc / trials;
}

} // namespace ota

#endif // OTA_FRONTHAUL_HPP
