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

#ifndef OTA_TYPES_HPP
#define OTA_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ota {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

using Rng = std::mt19937_64;

// Raised when a channel or Gramian is too ill-conditioned to invert.
class SingularChannelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a covariance-type matrix fails the Hermitian/PSD checks.
class NotPsdError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace detail

// Independent RNG stream derived from (seed, stream id). Streams with different
// ids are decorrelated through two rounds of splitmix64.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream)
{
    const std::uint64_t s = detail::splitmix64(detail::splitmix64(seed) ^ detail::splitmix64(stream + 0x632BE59BD9B4E019ull));
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

// Stream tags keep the geometry, moment and trial generators apart.
enum class StreamTag : std::uint64_t {
    geometry = 1,
    moments = 2,
    trial = 3,
    calibration = 4,
    rates = 5,
};

inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index)
{
    return make_stream(seed ^ (static_cast<std::uint64_t>(tag) << 56), index);
}

// Matrix with i.i.d. CN(0, variance) entries.
inline CMat complex_normal(Eigen::Index rows, Eigen::Index cols, Rng &rng, double variance = 1.0)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    CMat out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double re = nd(rng);
            const double im = nd(rng);
            out(r, c) = cd(re, im);
        }
    return out;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

} // namespace ota

#endif // OTA_TYPES_HPP
