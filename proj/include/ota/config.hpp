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

#ifndef OTA_CONFIG_HPP
#define OTA_CONFIG_HPP

#include "ota/scenario.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ota {

struct KeyInfo {
    const char *key;
    const char *def;
    const char *help;
};

// Every recognised configuration key with its default. The first block
// mirrors ScenarioConfig; the rest steer the experiments.
inline const std::vector<KeyInfo> &known_keys()
{
    static const std::vector<KeyInfo> keys = {
        {"L", "16", "number of APs"},
        {"K", "8", "number of UEs"},
        {"N", "5", "antennas per AP"},
        {"M", "4", "CPU antennas"},
        {"p_ul", "1e-6", "UE transmit power [W]"},
        {"P_max", "1", "AP fronthaul power budget [W]"},
        {"sigma2", "1e-16", "noise power at APs and CPU [W]"},
        {"tau_p", "8", "pilot length"},
        {"tau_u", "10", "uplink data slots per block"},
        {"tau_c", "200", "coherence block length"},
        {"area_side", "200", "side of the square area [m]"},
        {"cpu_height", "5", "CPU height [m]"},
        {"ap_height", "10", "AP height [m]"},
        {"ue_height", "1.5", "UE height [m]"},
        {"pathloss_a", "-30.5", "pathloss intercept [dB]"},
        {"pathloss_b", "-36.7", "pathloss slope [dB/decade]"},
        {"pilot_power", "1e-6", "UE pilot power [W]"},
        {"ap_layout", "uniform", "uniform | grid"},
        {"seed", "1", "master RNG seed"},
        {"trials", "10000", "Monte Carlo trials (per grid point or in total, see experiment)"},
        {"drops", "0", "deployment drops; 0 selects the experiment default"},
        {"ewhw_trials", "10000", "draws for the E[W^H W] estimate"},
        {"p_max_grid", "0.1,0.2,0.5,1,2,5,10", "fig2_nmse P_max axis [W]"},
        {"rho_grid_db", "70,75,80,85,90,95,100,105,110", "rho_ul axis for SER experiments [dB]"},
        {"rho_db", "100", "rho_ul for fig4_se_cdf [dB]"},
        {"rho_ods_db", "110", "rho_ul for fig6/fig7 [dB]"},
        {"p_max_ods", "5", "P_max for the ODS experiments and fig10 [W]"},
        {"p_max_ser", "1,5", "P_max values of fig3_ser [W]"},
        {"p_max_rate", "5,0.1", "P_max values of fig4_se_cdf [W]"},
        {"min_errors", "200", "SER early stop: errors required in every series"},
        {"batch", "250", "SER trials per early-stop batch"},
        {"nb_grid", "8,10,12,14,16,18,20,22,24,26,28,30,32", "ODS bits per real symbol axis"},
        {"nb_list", "8,16", "ODS resolutions in fig9_ser_ods / fig7b_cu_vs_L"},
        {"L_grid", "4,8,16,32,64", "fig7b_cu_vs_L AP count axis"},
        {"rate_draws", "2000", "fronthaul draws per ergodic waterfilling rate"},
        {"pilot_snr_db", "90,100,107", "fig10 pilot power relative to sigma2 [dB]"},
        {"asym_grid_db", "20,30,40,50,60", "asymptote_check p_ul / sigma2 axis [dB]"},
    };
    return keys;
}

inline const KeyInfo *find_key(const std::string &k)
{
    for (const auto &ki : known_keys())
        if (k == ki.key)
            return &ki;
    return nullptr;
}

namespace detail {

inline std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string &key, const std::string &v)
{
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception &) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size())
        throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
    return d;
}

inline long long parse_int(const std::string &key, const std::string &v)
{
    std::size_t pos = 0;
    long long d = 0;
    try {
        d = std::stoll(v, &pos);
    } catch (const std::exception &) {
        pos = 0;
    }
    if (pos == 0 || pos != v.size())
        throw std::invalid_argument("config: key '" + key + "' expects an integer, got '" + v + "'");
    return d;
}

} // namespace detail

// Flat key=value settings. Later assignments override earlier ones, so a
// config file followed by --set overrides gives the documented precedence.
class Settings {
public:
    static Settings defaults()
    {
        Settings s;
        for (const auto &ki : known_keys())
            s.kv_[ki.key] = ki.def;
        return s;
    }

    void set(const std::string &key, const std::string &value)
    {
        if (!find_key(key))
            throw std::invalid_argument("config: unknown key '" + key + "'");
        kv_[key] = detail::trim(value);
    }

    // "key=value"
    void set_assignment(const std::string &kv)
    {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected key=value, got '" + kv + "'");
        set(detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
    }

    // '#' starts a comment; blank lines are ignored.
    void load_stream(std::istream &in, const std::string &origin = "<stream>")
    {
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            line = detail::trim(line);
            if (line.empty())
                continue;
            try {
                set_assignment(line);
            } catch (const std::invalid_argument &e) {
                throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    void load_file(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw std::invalid_argument("config: cannot open '" + path + "'");
        load_stream(in, path);
    }

    const std::string &get(const std::string &key) const
    {
        const auto it = kv_.find(key);
        if (it == kv_.end())
            throw std::invalid_argument("config: unknown key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string &key) const { return detail::parse_double(key, get(key)); }
    long long get_int(const std::string &key) const { return detail::parse_int(key, get(key)); }

    std::vector<double> get_list(const std::string &key) const
    {
        std::vector<double> out;
        std::stringstream ss(get(key));
        std::string item;
        while (std::getline(ss, item, ','))
            out.push_back(detail::parse_double(key, detail::trim(item)));
        if (out.empty())
            throw std::invalid_argument("config: key '" + key + "' needs at least one value");
        return out;
    }

    // Grids must be nonempty and strictly increasing.
    std::vector<double> get_grid(const std::string &key) const
    {
        const auto g = get_list(key);
        for (std::size_t i = 1; i < g.size(); ++i)
            if (!(g[i] > g[i - 1]))
                throw std::invalid_argument("config: grid '" + key + "' must be strictly increasing");
        return g;
    }

    ScenarioConfig scenario() const
    {
        ScenarioConfig c;
        c.L = static_cast<int>(get_int("L"));
        c.K = static_cast<int>(get_int("K"));
        c.N = static_cast<int>(get_int("N"));
        c.M = static_cast<int>(get_int("M"));
        c.p_ul = get_double("p_ul");
        c.P_max = get_double("P_max");
        c.sigma2 = get_double("sigma2");
        c.tau_p = static_cast<int>(get_int("tau_p"));
        c.tau_u = static_cast<int>(get_int("tau_u"));
        c.tau_c = static_cast<int>(get_int("tau_c"));
        c.area_side = get_double("area_side");
        c.cpu_height = get_double("cpu_height");
        c.ap_height = get_double("ap_height");
        c.ue_height = get_double("ue_height");
        c.pathloss_a = get_double("pathloss_a");
        c.pathloss_b = get_double("pathloss_b");
        c.pilot_power = get_double("pilot_power");
        const std::string &lay = get("ap_layout");
        if (lay == "uniform")
            c.ap_layout = ApLayout::uniform;
        else if (lay == "grid")
            c.ap_layout = ApLayout::grid;
        else
            throw std::invalid_argument("config: ap_layout must be 'uniform' or 'grid'");
        const long long seed = get_int("seed");
        if (seed < 0)
            throw std::invalid_argument("config: seed must be nonnegative");
        c.seed = static_cast<std::uint64_t>(seed);
        c.trials = static_cast<int>(get_int("trials"));
        return c;
    }

    // Parses every key once so type errors surface before a run starts.
    void validate() const
    {
        scenario().validate();
        for (const char *k : {"p_max_grid", "rho_grid_db", "nb_grid", "L_grid", "pilot_snr_db", "asym_grid_db"})
            get_grid(k);
        for (const char *k : {"p_max_ser", "p_max_rate", "nb_list"})
            get_list(k);
        for (const char *k : {"rho_db", "rho_ods_db", "p_max_ods"})
            get_double(k);
        for (const char *k : {"drops", "ewhw_trials", "min_errors", "batch", "rate_draws"})
            if (get_int(k) < 0)
                throw std::invalid_argument(std::string("config: '") + k + "' must be nonnegative");
        if (get_int("batch") < 1)
            throw std::invalid_argument("config: batch must be positive");
        if (get_int("ewhw_trials") < 1000)
            throw std::invalid_argument("config: ewhw_trials must be at least 1000");
    }

    const std::map<std::string, std::string> &values() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

} // namespace ota

#endif // OTA_CONFIG_HPP
