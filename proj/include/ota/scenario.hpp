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

#ifndef OTA_SCENARIO_HPP
#define OTA_SCENARIO_HPP

#include "ota/linalg.hpp"
#include "ota/types.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ota {

enum class ApLayout { uniform, grid };

// All dimensional, power and geometry parameters of one experiment.
// Powers are in W, lengths in m, pathloss constants in dB.
struct ScenarioConfig {
    int L = 16;          // APs
    int K = 8;           // UEs
    int N = 5;           // antennas per AP
    int M = 4;           // CPU antennas
    double p_ul = 1e-6;  // UE transmit power
    double P_max = 1.0;  // AP transmit budget on the fronthaul
    double sigma2 = 1e-16;
    int tau_p = 8;
    int tau_u = 10;
    int tau_c = 200;
    double area_side = 200.0;
    double cpu_height = 5.0;
    double ap_height = 10.0;
    double ue_height = 1.5;
    double pathloss_a = -30.5;
    double pathloss_b = -36.7;
    double pilot_power = 1e-6;  // UE pilot power for access CSI estimation
    ApLayout ap_layout = ApLayout::uniform;
    std::uint64_t seed = 1;
    int trials = 10000;

    double rho_ul() const { return p_ul / sigma2; }

    // Throws std::invalid_argument naming the first violated constraint.
    void validate() const
    {
        auto fail = [](const std::string &what) { throw std::invalid_argument("invalid config: " + what); };
        if (L < 1 || K < 1 || N < 1 || M < 1)
            fail("L, K, N, M must be positive");
        if (N < M)
            fail("N >= M required (N=" + std::to_string(N) + ", M=" + std::to_string(M) + ")");
        if (!(p_ul > 0.0) || !(P_max > 0.0) || !(sigma2 > 0.0) || !(pilot_power > 0.0))
            fail("p_ul, P_max, sigma2 and pilot_power must be strictly positive");
        if (tau_p < 0 || tau_u < 1 || tau_c < 1)
            fail("tau_u and tau_c must be positive, tau_p nonnegative");
        if (tau_p > tau_c)
            fail("tau_p <= tau_c required");
        if (tau_u > tau_c - tau_p)
            fail("tau_u <= tau_c - tau_p required");
        if (!(area_side > 0.0))
            fail("area_side must be positive");
        if (trials < 1)
            fail("trials must be positive");
    }
};

// Large-scale gain in dB at distance d: a + b*log10(d / 1 m).
inline double pathloss_db(double d, double a = -30.5, double b = -36.7)
{
    if (!(d > 0.0))
        throw std::domain_error("pathloss_db: distance must be positive");
    return a + b * std::log10(d);
}

// Spatial covariances R[k][l] (N x N) and large-scale gains for every UE/AP
// pair plus the AP-CPU fronthaul gains. Stored flat with index k * L + l.
class CovarianceSet {
public:
    CovarianceSet() = default;

    // General PSD covariances. Each R is checked Hermitian (1e-12 relative)
    // and PSD (min eigenvalue >= -1e-10 trace); beta = tr(R) / N.
    static CovarianceSet from_covariances(int K, int L, std::vector<CMat> R, RVec G_beta)
    {
        if (K < 1 || L < 1)
            throw std::invalid_argument("CovarianceSet: K and L must be positive");
        if (static_cast<int>(R.size()) != K * L)
            throw std::invalid_argument("CovarianceSet: expected K*L covariance matrices");
        if (G_beta.size() != L)
            throw std::invalid_argument("CovarianceSet: expected L fronthaul gains");
        CovarianceSet cs;
        cs.K_ = K;
        cs.L_ = L;
        cs.N_ = static_cast<int>(R.front().rows());
        cs.beta_ = RMat::Zero(K, L);
        cs.R_sqrt_.reserve(R.size());
        for (int k = 0; k < K; ++k)
            for (int l = 0; l < L; ++l) {
                CMat &Rkl = R[k * L + l];
                if (Rkl.rows() != cs.N_ || Rkl.cols() != cs.N_)
                    throw std::invalid_argument("CovarianceSet: covariance dimension mismatch");
                const double scale = std::max(1.0, Rkl.cwiseAbs().maxCoeff());
                if (!is_hermitian(Rkl, 1e-12 * scale))
                    throw NotPsdError("CovarianceSet: covariance is not Hermitian");
                cs.R_sqrt_.push_back(psd_sqrt(Rkl));
                cs.beta_(k, l) = real_trace(Rkl) / cs.N_;
            }
        for (Eigen::Index l = 0; l < G_beta.size(); ++l)
            if (!(G_beta(l) >= 0.0))
                throw std::invalid_argument("CovarianceSet: fronthaul gains must be nonnegative");
        cs.R_ = std::move(R);
        cs.G_beta_ = std::move(G_beta);
        return cs;
    }

    // Spatially uncorrelated channels, R[k][l] = beta(k, l) * I_N.
    static CovarianceSet diagonal(const RMat &beta, RVec G_beta, int N)
    {
        std::vector<CMat> R;
        R.reserve(beta.size());
        for (Eigen::Index k = 0; k < beta.rows(); ++k)
            for (Eigen::Index l = 0; l < beta.cols(); ++l)
                R.push_back(beta(k, l) * CMat::Identity(N, N));
        return from_covariances(static_cast<int>(beta.rows()), static_cast<int>(beta.cols()), std::move(R),
                                std::move(G_beta));
    }

    int K() const { return K_; }
    int L() const { return L_; }
    int N() const { return N_; }

    const CMat &R(int k, int l) const { return R_[k * L_ + l]; }
    const CMat &R_sqrt(int k, int l) const { return R_sqrt_[k * L_ + l]; }
    double beta(int k, int l) const { return beta_(k, l); }
    const RMat &beta() const { return beta_; }
    double G_beta(int l) const { return G_beta_(l); }
    const RVec &G_beta() const { return G_beta_; }

private:
    int K_ = 0, L_ = 0, N_ = 0;
    std::vector<CMat> R_;
    std::vector<CMat> R_sqrt_;
    RMat beta_;
    RVec G_beta_;
};

struct Scenario {
    RMat ue_pos;   // 3 x K
    RMat ap_pos;   // 3 x L
    Eigen::Vector3d cpu_pos;
    CovarianceSet cov;
};

// Large-scale gains from explicit positions. Distances are 3-D and clamped to
// at least 1 m.
inline CovarianceSet covariances_from_positions(const ScenarioConfig &cfg, const RMat &ue_pos, const RMat &ap_pos,
                                                const Eigen::Vector3d &cpu_pos)
{
    const Eigen::Index K = ue_pos.cols();
    const Eigen::Index L = ap_pos.cols();
    RMat beta(K, L);
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index l = 0; l < L; ++l) {
            const double d = std::max(1.0, (ue_pos.col(k) - ap_pos.col(l)).norm());
            beta(k, l) = db_to_linear(pathloss_db(d, cfg.pathloss_a, cfg.pathloss_b));
        }
    RVec G_beta(L);
    for (Eigen::Index l = 0; l < L; ++l) {
        const double d = std::max(1.0, (ap_pos.col(l) - cpu_pos).norm());
        G_beta(l) = db_to_linear(pathloss_db(d, cfg.pathloss_a, cfg.pathloss_b));
    }
    return CovarianceSet::diagonal(beta, std::move(G_beta), cfg.N);
}

// One deployment drop: UEs uniform in the square, APs uniform or on a regular
// grid, CPU at the centre. Deterministic in (cfg.seed, drop).
inline Scenario generate_scenario(const ScenarioConfig &cfg, std::uint64_t drop = 0)
{
    cfg.validate();
    Rng rng = make_stream(cfg.seed, StreamTag::geometry, drop);
    std::uniform_real_distribution<double> u(0.0, cfg.area_side);

    Scenario sc;
    sc.ue_pos.resize(3, cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
        const double x = u(rng);
        const double y = u(rng);
        sc.ue_pos.col(k) << x, y, cfg.ue_height;
    }
    sc.ap_pos.resize(3, cfg.L);
    if (cfg.ap_layout == ApLayout::grid) {
        const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.L))));
        const int rows = (cfg.L + cols - 1) / cols;
        for (int l = 0; l < cfg.L; ++l) {
            const int r = l / cols, c = l % cols;
            sc.ap_pos.col(l) << (c + 0.5) * cfg.area_side / cols, (r + 0.5) * cfg.area_side / rows, cfg.ap_height;
        }
    } else {
        for (int l = 0; l < cfg.L; ++l) {
            const double x = u(rng);
            const double y = u(rng);
            sc.ap_pos.col(l) << x, y, cfg.ap_height;
        }
    }
    sc.cpu_pos << cfg.area_side / 2.0, cfg.area_side / 2.0, cfg.cpu_height;
    sc.cov = covariances_from_positions(cfg, sc.ue_pos, sc.ap_pos, sc.cpu_pos);
    return sc;
}

} // namespace ota

#endif // OTA_SCENARIO_HPP
