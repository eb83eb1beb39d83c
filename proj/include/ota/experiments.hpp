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

#ifndef OTA_EXPERIMENTS_HPP
#define OTA_EXPERIMENTS_HPP

#include "ota/config.hpp"
#include "ota/pipeline.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ota {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string &name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return static_cast<int>(i);
        throw std::out_of_range("Table: no column '" + name + "'");
    }

    double at(std::size_t row, const std::string &name) const { return rows.at(row).at(column(name)); }

    std::vector<double> column_values(const std::string &name) const
    {
        const int c = column(name);
        std::vector<double> v;
        for (const auto &r : rows)
            v.push_back(r.at(c));
        return v;
    }

    void write_csv(std::ostream &os) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            os << (i ? "," : "") << header[i];
        os << '\n';
        char buf[64];
        for (const auto &r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.10g", r[i]);
                os << (i ? "," : "") << buf;
            }
            os << '\n';
        }
    }
};

struct RunContext {
    Settings settings = Settings::defaults();
    int workers = 1;

    ScenarioConfig scenario() const { return settings.scenario(); }

    // The "drops" key overrides the experiment default when positive.
    int drops(int fallback) const
    {
        const long long d = settings.get_int("drops");
        return d > 0 ? static_cast<int>(d) : fallback;
    }

    EwhwEstimate unit_ewhw(const ScenarioConfig &cfg) const
    {
        return ota::unit_ewhw(cfg.N, cfg.M, static_cast<int>(settings.get_int("ewhw_trials")), cfg.seed);
    }
};

// Each experiment returns one table; the CLI writes it as CSV.
Table fig2_nmse(const RunContext &ctx);
Table fig3_ser(const RunContext &ctx);
Table fig4_se_cdf(const RunContext &ctx);
Table fig6_nmse_vs_nb(const RunContext &ctx);
Table fig7_cu_vs_nb(const RunContext &ctx);
Table fig7b_cu_vs_L(const RunContext &ctx);
Table fig9_ser_ods(const RunContext &ctx);
Table fig10_ser_impcsi(const RunContext &ctx);
Table asymptote_check(const RunContext &ctx);

struct Experiment {
    const char *name;
    const char *summary;
    Table (*run)(const RunContext &);
};

const std::vector<Experiment> &experiments();
const Experiment *find_experiment(const std::string &name);

} // namespace ota

#endif // OTA_EXPERIMENTS_HPP
