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

#ifndef OTA_PARALLEL_HPP
#define OTA_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ota {

// Evaluates fn(first + i) for i in [0, count) on `workers` threads. Workers
// pull indices from a shared counter; results are stored by index, so the
// output never depends on scheduling.
template <class R, class F>
std::vector<R> parallel_map(std::uint64_t first, std::uint64_t count, int workers, F &&fn)
{
    std::vector<R> out(count);
    if (count == 0)
        return out;
    workers = std::max(1, std::min<int>(workers, static_cast<int>(std::min<std::uint64_t>(count, 1024))));
    if (workers == 1) {
        for (std::uint64_t i = 0; i < count; ++i)
            out[i] = fn(first + i);
        return out;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto work = [&] {
        while (true) {
            const std::uint64_t i = next.fetch_add(1);
            if (i >= count)
                return;
            try {
                out[i] = fn(first + i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err)
                    err = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back(work);
    for (auto &t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);
    return out;
}

inline int default_workers()
{
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

} // namespace ota

#endif // OTA_PARALLEL_HPP
