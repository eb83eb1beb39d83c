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

// Command-line experiment runner.

#include "ota/experiments.hpp"
#include "ota/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Overrides {
    std::string config;
    std::optional<long long> seed;
    std::optional<long long> trials;
    std::vector<std::string> sets;
};

ota::Settings load_settings(const Overrides &o)
{
    ota::Settings s = ota::Settings::defaults();
    if (!o.config.empty())
        s.load_file(o.config);
    if (o.seed)
        s.set("seed", std::to_string(*o.seed));
    if (o.trials)
        s.set("trials", std::to_string(*o.trials));
    for (const auto &kv : o.sets)
        s.set_assignment(kv);
    s.validate();
    return s;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Link-level simulator for OTA fronthaul in uplink cell-free massive MIMO"};
    app.require_subcommand(1);

    Overrides ro;
    std::string experiment, out;
    int workers = ota::default_workers();
    auto *run = app.add_subcommand("run", "run an experiment and write CSV");
    run->add_option("experiment", experiment, "experiment name (see 'sim list')")->required();
    run->add_option("--config", ro.config, "key=value config file")->check(CLI::ExistingFile);
    run->add_option("--seed", ro.seed, "master seed");
    run->add_option("--trials", ro.trials, "Monte Carlo trials");
    run->add_option("--out", out, "output CSV (default: stdout)");
    run->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    run->add_option("--set", ro.sets, "override key=value (repeatable)")->take_all();

    Overrides vo;
    auto *validate = app.add_subcommand("validate", "parse and check a config file");
    validate->add_option("--config", vo.config, "key=value config file")->required()->check(CLI::ExistingFile);
    validate->add_option("--set", vo.sets, "override key=value (repeatable)")->take_all();

    auto *list = app.add_subcommand("list", "list experiments and config keys");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*list) {
            std::cout << "experiments:\n";
            for (const auto &e : ota::experiments())
                std::cout << "  " << e.name << "  " << e.summary << '\n';
            std::cout << "config keys (default):\n";
            for (const auto &k : ota::known_keys())
                std::cout << "  " << k.key << " = " << k.def << "  # " << k.help << '\n';
            return 0;
        }
        if (*validate) {
            const ota::Settings s = load_settings(vo);
            std::cout << "config OK (" << s.values().size() << " keys)\n";
            return 0;
        }
        const ota::Experiment *e = ota::find_experiment(experiment);
        if (!e) {
            std::cerr << "sim: unknown experiment '" << experiment << "' (see 'sim list')\n";
            return 2;
        }
        ota::RunContext ctx;
        ctx.settings = load_settings(ro);
        ctx.workers = workers;
        const auto t0 = std::chrono::steady_clock::now();
        const ota::Table tab = e->run(ctx);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (out.empty()) {
            tab.write_csv(std::cout);
        } else {
            std::ofstream f(out);
            if (!f)
                throw std::runtime_error("cannot open '" + out + "' for writing");
            tab.write_csv(f);
            if (!f)
                throw std::runtime_error("write to '" + out + "' failed");
        }
        std::cerr << e->name << ": " << tab.rows.size() << " rows in " << secs << " s\n";
    } catch (const std::exception &ex) {
        std::cerr << "sim: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
