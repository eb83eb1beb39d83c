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

#ifndef OTA_POWER_HPP
#define OTA_POWER_HPP

#include "ota/ap_local.hpp"
#include "ota/moments.hpp"
#include "ota/types.hpp"

#include <stdexcept>
#include <vector>

namespace ota {

struct PowerPlan {
    RVec P[2];                // reports at eta = 1, phase 1 and 2
    std::vector<int> V[2];    // APs exceeding P_max at eta = 1
    double eta[2] = {0.0, 0.0};
};

// Average per-channel-use transmit power of every AP at eta = 1.
inline RVec power_report(const MomentModel &mm, int phase)
{
    if (phase == 1)
        return mm.P1;
    if (phase == 2)
        return mm.p_ul * mm.a + mm.b;
    throw std::invalid_argument("power_report: phase must be 1 or 2");
}

// eta = P_max / max_l P_l. Applied whether or not any AP violates the budget.
inline double compute_eta(const RVec &P, double P_max)
{
    if (P.size() == 0)
        throw std::invalid_argument("compute_eta: empty report");
    if ((P.array() < 0.0).any())
        throw std::invalid_argument("compute_eta: negative power report");
    const double mx = P.maxCoeff();
    if (!(mx > 0.0))
        throw std::invalid_argument("compute_eta: all power reports are zero");
    return P_max / mx;
}

inline double eta2_closed_form(const RVec &a, const RVec &b, double p_ul, double P_max)
{
    if ((a.array() < 0.0).any() || (b.array() < 0.0).any())
        throw std::invalid_argument("eta2_closed_form: a and b must be nonnegative");
    Eigen::Index r = 0;
    const double mx = (p_ul * a + b).maxCoeff(&r);
    if (!(mx > 0.0))
        throw std::invalid_argument("eta2_closed_form: all coefficients are zero");
    return P_max / (p_ul * a(r) + b(r));
}

inline std::vector<int> violators(const RVec &P, double P_max)
{
    std::vector<int> v;
    for (Eigen::Index l = 0; l < P.size(); ++l)
        if (P(l) > P_max)
            v.push_back(static_cast<int>(l));
    return v;
}

inline PowerPlan make_power_plan(const MomentModel &mm, double P_max)
{
    PowerPlan plan;
    for (int i = 0; i < 2; ++i) {
        plan.P[i] = power_report(mm, i + 1);
        plan.V[i] = violators(plan.P[i], P_max);
        plan.eta[i] = compute_eta(plan.P[i], P_max);
    }
    return plan;
}

// E||A||_F^2: off-diagonal payload entries count twice.
inline double expected_gramian_energy(const RVec &mu1, const RVec &c1, int K)
{
    double s = 0.0;
    for (int j = 0; j < K; ++j)
        for (int jp = j; jp < K; ++jp) {
            const int n = upper_index(j, jp, K);
            s += (j == jp ? 1.0 : 2.0) * (c1(n) + mu1(n) * mu1(n));
        }
    return s;
}

// E||t||^2 for one slot.
inline double expected_mf_energy(const RVec &c2) { return c2.sum(); }

struct FronthaulSnr {
    double rho_c1 = 0.0;
    double rho_c2 = 0.0;
};

inline FronthaulSnr fronthaul_snrs(const MomentModel &mm, double eta1, double eta2, double sigma2)
{
    const double K = mm.K;
    FronthaulSnr s;
    s.rho_c1 = eta1 * expected_gramian_energy(mm.mu1(), mm.c1(), mm.K) / (K * K * sigma2);
    s.rho_c2 = eta2 * expected_mf_energy(mm.c2) / (K * sigma2);
    return s;
}

} // namespace ota

#endif // OTA_POWER_HPP
