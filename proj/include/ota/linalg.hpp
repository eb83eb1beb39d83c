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

#ifndef OTA_LINALG_HPP
#define OTA_LINALG_HPP

#include "ota/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <limits>
#include <string>

namespace ota {

inline bool is_hermitian(const CMat &A, double tol)
{
    if (A.rows() != A.cols())
        return false;
    return (A - A.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline double real_trace(const CMat &A) { return A.trace().real(); }

// Largest-to-smallest singular value ratio; infinity for rank-deficient input.
inline double condition_number(const CMat &A)
{
    Eigen::JacobiSVD<CMat> svd(A);
    const auto &s = svd.singularValues();
    if (s.size() == 0)
        return 1.0;
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    if (smin <= 0.0)
        return std::numeric_limits<double>::infinity();
    return smax / smin;
}

struct HermitianRoots {
    CMat sqrt;       // A^{1/2}
    CMat inv_sqrt;   // pseudo-inverse of A^{1/2}
    bool clamped;    // true if a negative eigenvalue was projected to zero
};

// Matrix square root of a Hermitian matrix via eigendecomposition. Negative
// eigenvalues are clamped to zero (the minimal PSD projection). Eigenvalues
// below rel_floor * max eigenvalue are treated as zero in the inverse root.
inline HermitianRoots hermitian_roots(const CMat &A, double rel_floor = 1e-14)
{
    const CMat H = 0.5 * (A + A.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(H);
    const RVec &ev = es.eigenvalues();
    const double emax = std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    RVec r(ev.size()), ir(ev.size());
    bool clamped = false;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        double e = ev(i);
        if (e < 0.0) {
            clamped = clamped || (e < -rel_floor * emax);
            e = 0.0;
        }
        r(i) = std::sqrt(e);
        ir(i) = (e > rel_floor * emax && e > 0.0) ? 1.0 / r(i) : 0.0;
    }
    const CMat &V = es.eigenvectors();
    return {V * r.asDiagonal() * V.adjoint(), V * ir.asDiagonal() * V.adjoint(), clamped};
}

// PSD square root with the covariance admissibility check: min eigenvalue must
// be >= -rel_tol * trace, otherwise NotPsdError.
inline CMat psd_sqrt(const CMat &R, double rel_tol = 1e-10)
{
    if (R.size() == 0)
        return R;
    const CMat H = 0.5 * (R + R.adjoint());
    Eigen::SelfAdjointEigenSolver<CMat> es(H);
    const RVec &ev = es.eigenvalues();
    const double tr = std::abs(H.trace().real());
    if (ev.minCoeff() < -rel_tol * tr)
        throw NotPsdError("covariance is not positive semidefinite (min eigenvalue " +
                          std::to_string(ev.minCoeff()) + ")");
    const RVec r = ev.cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * r.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace ota

#endif // OTA_LINALG_HPP
