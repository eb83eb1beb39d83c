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

#ifndef OTA_ODS_HPP
#define OTA_ODS_HPP

#include "ota/ap_local.hpp"
#include "ota/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ota {

// Sign bit, NE exponent bits, NF fraction bits. The all-ones exponent is
// reserved, as in IEEE 754, so it never encodes a finite value.
struct FloatFormat {
    int NE = 8;
    int NF = 23;

    int bits() const { return 1 + NE + NF; }
    int bias() const { return (1 << (NE - 1)) - 1; }
    int emax() const { return ((1 << NE) - 2) - bias(); }
    int emin() const { return 1 - bias(); }
    double max_finite() const { return std::ldexp(2.0 - std::ldexp(1.0, -NF), emax()); }

    void validate() const
    {
        if (NE < 2 || NF < 1)
            throw std::invalid_argument("FloatFormat: NE >= 2 and NF >= 1 required");
        if (NE > 11 || NF > 52)
            throw std::invalid_argument("FloatFormat: wider than binary64");
    }
};

// Round to nearest representable value, ties to even. Subnormals below
// 2^emin use the fixed spacing 2^(emin - NF); overflow saturates.
inline double quantize(double x, const FloatFormat &f)
{
    if (x == 0.0 || !std::isfinite(x))
        return std::isfinite(x) ? x : std::copysign(f.max_finite(), x);
    const double ax = std::fabs(x);
    double q;
    if (ax < std::ldexp(1.0, f.emin())) {
        const int shift = f.emin() - f.NF;
        q = std::ldexp(std::nearbyint(std::ldexp(ax, -shift)), shift);
    } else {
        int e = std::ilogb(ax);
        if (e > f.emax())
            return std::copysign(f.max_finite(), x);
        const int shift = e - f.NF;
        q = std::ldexp(std::nearbyint(std::ldexp(ax, -shift)), shift);
        if (q > f.max_finite())
            q = f.max_finite();
    }
    return std::copysign(q, x);
}

inline cd quantize(cd x, const FloatFormat &f) { return cd(quantize(x.real(), f), quantize(x.imag(), f)); }

// Quantize x / scale and undo the scale; scale is a normalization known to
// both ends (derived from the statistics' second moments).
inline CMat quantize_scaled(const CMat &X, double scale, const FloatFormat &f)
{
    CMat Q(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.size(); ++i)
        Q(i) = scale * quantize(X(i) / scale, f);
    return Q;
}

// Exhaustive split of Nb bits into (NE, NF) minimizing the squared error on a
// calibration sample of already normalized values. Formats whose largest
// finite value is below headroom * max|sample| are only used when no format
// reaches that range; rare saturations cost far more than a coarser mantissa.
inline FloatFormat choose_format(int Nb, const std::vector<double> &sample, double headroom = 1.0)
{
    if (Nb < 4)
        throw std::invalid_argument("choose_format: Nb >= 4 required");
    double peak = 0.0;
    for (double x : sample)
        peak = std::max(peak, std::fabs(x));
    FloatFormat best, widest;
    double best_err = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int NE = 2; NE <= std::min(11, Nb - 2); ++NE) {
        FloatFormat f{NE, Nb - 1 - NE};
        if (f.NF > 52)
            continue;
        widest = f;
        if (f.max_finite() < headroom * peak)
            continue;
        double err = 0.0;
        for (double x : sample) {
            const double d = quantize(x, f) - x;
            err += d * d;
        }
        if (err < best_err) {
            best_err = err;
            best = f;
            found = true;
        }
    }
    return found ? best : widest;
}

struct WaterfillResult {
    RVec power;
    double level = 0.0;
    double rate = 0.0;  // bits per channel use
};

// Powers max(0, mu - 1/g_i) summing to P; the water level mu is found by
// bisection.
inline WaterfillResult waterfill(const RVec &gains, double P)
{
    if (!(P >= 0.0))
        throw std::invalid_argument("waterfill: negative budget");
    WaterfillResult r;
    r.power = RVec::Zero(gains.size());
    if (gains.size() == 0 || !(gains.maxCoeff() > 0.0) || P == 0.0)
        return r;
    auto total = [&](double mu) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < gains.size(); ++i)
            if (gains(i) > 0.0)
                s += std::max(0.0, mu - 1.0 / gains(i));
        return s;
    };
    double lo = 0.0;
    double hi = P + 1.0 / gains.maxCoeff();
    while (total(hi) < P)
        hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (total(mid) < P)
            lo = mid;
        else
            hi = mid;
    }
    r.level = 0.5 * (lo + hi);
    for (Eigen::Index i = 0; i < gains.size(); ++i)
        if (gains(i) > 0.0) {
            r.power(i) = std::max(0.0, r.level - 1.0 / gains(i));
            r.rate += std::log2(1.0 + r.power(i) * gains(i));
        }
    return r;
}

// Mode gains s_i^2 / sigma2 of the AP-to-CPU link G^H.
inline RVec mode_gains(const CMat &G, double sigma2)
{
    Eigen::SelfAdjointEigenSolver<CMat> es(G.adjoint() * G, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseMax(0.0) / sigma2;
}

struct ErgodicRate {
    double rate = 0.0;
    long used = 0;
    long skipped = 0;  // rank-deficient draws
};

// Ergodic waterfilling rate over draws produced by sampler().
template <class Sampler>
ErgodicRate waterfill_rate(Sampler &&sampler, double P_max, double sigma2, int draws)
{
    ErgodicRate er;
    double acc = 0.0;
    for (int i = 0; i < draws; ++i) {
        const CMat G = sampler();
        Eigen::JacobiSVD<CMat> svd(G);
        const RVec s = svd.singularValues();
        if (s.size() == 0 || !(s(s.size() - 1) > 1e-9 * s(0))) {
            ++er.skipped;
            continue;
        }
        acc += waterfill(s.cwiseAbs2() / sigma2, P_max).rate;
        ++er.used;
    }
    if (er.used == 0)
        throw SingularChannelError("waterfill_rate: no full-rank draw");
    er.rate = acc / er.used;
    return er;
}

inline ErgodicRate waterfill_rate(double G_beta, int N, int M, double P_max, double sigma2, int draws, Rng &rng)
{
    return waterfill_rate([&] { return complex_normal(N, M, rng, G_beta); }, P_max, sigma2, draws);
}

inline long channel_uses_ota(long Ns, int M)
{
    if (Ns < 1 || M < 1)
        throw std::invalid_argument("channel_uses_ota: Ns and M must be positive");
    return (Ns + M - 1) / M;
}

struct OdsPlan {
    RVec Rbar;
    RVec alpha;
    double R = 0.0;
    double B = 0.0;
    long upsilon_ods = 0;
    long upsilon_ota = 0;
};

// Equal-rate orthogonal split: alpha_l Rbar_l = R, sum alpha = 1. The channel
// use count is that of serving the APs one after another at full resources,
// sum_l ceil(B / Rbar_l), which equals B / R up to the ceilings.
inline OdsPlan allocate_resources(const RVec &Rbar, double B, long Ns, int M)
{
    if (Rbar.size() == 0 || !(Rbar.minCoeff() > 0.0))
        throw std::invalid_argument("allocate_resources: every per-AP rate must be positive");
    OdsPlan plan;
    plan.Rbar = Rbar;
    plan.B = B;
    plan.R = 1.0 / Rbar.cwiseInverse().sum();
    plan.alpha = plan.R * Rbar.cwiseInverse();
    for (Eigen::Index l = 0; l < Rbar.size(); ++l)
        plan.upsilon_ods += static_cast<long>(std::ceil(B / Rbar(l)));
    plan.upsilon_ota = channel_uses_ota(Ns, M);
    return plan;
}

inline double bits_per_ap(long Ns, int Nb) { return 2.0 * static_cast<double>(Ns) * Nb; }

inline double ota_extra_snr_factor(const OdsPlan &plan)
{
    if (plan.upsilon_ods < 1 || plan.upsilon_ota < 1)
        throw std::invalid_argument("ota_extra_snr_factor: channel use counts must be positive");
    return static_cast<double>(plan.upsilon_ods) / static_cast<double>(plan.upsilon_ota);
}

} // namespace ota

#endif // OTA_ODS_HPP
