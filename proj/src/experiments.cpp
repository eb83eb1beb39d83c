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

#include "ota/experiments.hpp"

#include "ota/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>

namespace ota {

namespace detail {

// "%g" rendering used in column names.
inline std::string label(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

inline std::vector<Drop> make_drops(const ScenarioConfig &cfg, int D, const EwhwEstimate &unit)
{
    std::vector<Drop> d;
    d.reserve(D);
    for (int i = 0; i < D; ++i)
        d.push_back(make_drop(cfg, static_cast<std::uint64_t>(i), unit));
    return d;
}

inline MomentModel at_power(const MomentModel &mm, double p_ul)
{
    MomentModel m = mm;
    set_uplink_power(m, p_ul);
    return m;
}

// Error counts of S series at G grid points. fn(trial, active) returns G*S
// counts (zero for inactive points). A point stops once each of its series
// has min_errors errors; the check runs at batch boundaries only, so the
// counts do not depend on the worker count.
struct SerCounts {
    std::vector<long> trials;
    std::vector<std::vector<long>> errors;
};

template <class F>
SerCounts run_ser(int G, int S, long max_trials, long batch, long min_errors, int workers, F &&fn)
{
    SerCounts r;
    r.trials.assign(G, 0);
    r.errors.assign(G, std::vector<long>(S, 0));
    std::vector<char> active(G, 1);
    long done = 0;
    while (done < max_trials && std::find(active.begin(), active.end(), 1) != active.end()) {
        const long n = std::min(batch, max_trials - done);
        const auto res = parallel_map<std::vector<long>>(static_cast<std::uint64_t>(done), n, workers,
                                                         [&](std::uint64_t t) { return fn(t, active); });
        for (const auto &v : res)
            for (int g = 0; g < G; ++g) {
                if (!active[g])
                    continue;
                ++r.trials[g];
                for (int s = 0; s < S; ++s)
                    r.errors[g][s] += v[g * S + s];
            }
        done += n;
        for (int g = 0; g < G; ++g)
            if (active[g] && std::all_of(r.errors[g].begin(), r.errors[g].end(),
                                         [&](long e) { return e >= min_errors; }))
                active[g] = 0;
    }
    return r;
}

// Appends ser and its binomial standard error.
inline void push_ser(std::vector<double> &row, long errors, long symbols)
{
    const double n = static_cast<double>(symbols);
    const double p = n > 0 ? errors / n : 0.0;
    row.push_back(p);
    row.push_back(n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0);
}

inline void ser_header(Table &t, const std::string &name)
{
    t.header.push_back("ser_" + name);
    t.header.push_back("sem_" + name);
}

// Per-AP ergodic waterfilling rates of one drop.
inline RVec ap_rates(const Drop &d, double P_max, int draws)
{
    const ScenarioConfig &cfg = d.cfg;
    RVec R(cfg.L);
    for (int l = 0; l < cfg.L; ++l) {
        Rng rng = make_stream(cfg.seed, StreamTag::rates, (d.index << 24) ^ static_cast<std::uint64_t>(l));
        R(l) = waterfill_rate(d.sc.cov.G_beta(l), cfg.N, cfg.M, P_max, cfg.sigma2, draws, rng).rate;
    }
    return R;
}

// Resource plans of the two phases (Gramian, MF) for Nb bits per real symbol.
struct PhasePlans {
    OdsPlan ph[2];
};

inline PhasePlans phase_plans(const RVec &Rbar, int K, int tau_u, int M, int Nb)
{
    PhasePlans p;
    const long Ns[2] = {upper_length(K), static_cast<long>(K) * tau_u};
    for (int i = 0; i < 2; ++i)
        p.ph[i] = allocate_resources(Rbar, bits_per_ap(Ns[i], Nb), Ns[i], M);
    return p;
}


} // namespace detail

// NMSE of the recovered Gramian and MF output versus P_max, simulated and
// closed form, LS and LMMSE.
Table fig2_nmse(const RunContext &ctx)
{
    const ScenarioConfig cfg = ctx.scenario();
    const auto grid = ctx.settings.get_grid("p_max_grid");
    const int D = ctx.drops(1), G = static_cast<int>(grid.size());
    const auto drops = detail::make_drops(cfg, D, ctx.unit_ewhw(cfg));
    const Constellation c = qam4();
    const RVec w = gramian_weights(cfg.K);

    std::vector<std::vector<PowerPlan>> plans(D);
    std::vector<PayloadPrior> prior2(D);
    for (int d = 0; d < D; ++d) {
        prior2[d] = phase2_prior(drops[d].mm.c2, cfg.tau_u, cfg.M);
        for (double P : grid)
            plans[d].push_back(make_power_plan(drops[d].mm, P));
    }

    const double sp = std::sqrt(cfg.p_ul), s = std::sqrt(cfg.sigma2);
    const auto res = parallel_map<std::vector<double>>(0, cfg.trials, ctx.workers, [&](std::uint64_t t) {
        const int d = static_cast<int>(t % D);
        const Trial tr = realize_trial(drops[d], t / D, c);
        const CMat T = sp * tr.Ts + s * tr.Tn;
        std::vector<double> e(4 * G);
        for (int g = 0; g < G; ++g) {
            const PowerPlan &pl = plans[d][g];
            const TrialObservation o = observe(tr, cfg.p_ul, cfg.sigma2, pl.eta[0], pl.eta[1]);
            for (int ei = 0; ei < 2; ++ei) {
                const PayloadEstimates pe =
                    estimate_payloads(o, ei ? Estimator::LMMSE : Estimator::LS, drops[d].prior1, prior2[d]);
                e[4 * g + ei] = gramian_sq_error(pe.x1, tr.A, w);
                e[4 * g + 2 + ei] = mf_sq_error(pe.x2, T);
            }
        }
        return e;
    });

    Table tab;
    tab.header = {"p_max_w", "eta1", "eta2", "rho_c1_db", "rho_c2_db"};
    const char *names[4] = {"gram_ls", "gram_lmmse", "mf_ls", "mf_lmmse"};
    for (const char *n : names)
        for (const char *f : {"_mse", "_sem", "_theory", "_nmse_db", "_theory_db"})
            tab.header.push_back(std::string(n) + f);

    double e_gram = 0.0, e_mf = 0.0;
    for (const Drop &d : drops) {
        e_gram += expected_gramian_energy(d.mm.mu1(), d.mm.c1(), cfg.K) / D;
        e_mf += expected_mf_energy(d.mm.c2) / D;
    }
    for (int g = 0; g < G; ++g) {
        double eta1 = 0.0, eta2 = 0.0, rc1 = 0.0, rc2 = 0.0, th[4] = {0, 0, 0, 0};
        for (int d = 0; d < D; ++d) {
            const PowerPlan &pl = plans[d][g];
            const FronthaulSnr snr = fronthaul_snrs(drops[d].mm, pl.eta[0], pl.eta[1], cfg.sigma2);
            eta1 += pl.eta[0] / D;
            eta2 += pl.eta[1] / D;
            rc1 += snr.rho_c1 / D;
            rc2 += snr.rho_c2 / D;
            for (int ei = 0; ei < 2; ++ei) {
                const Estimator est = ei ? Estimator::LMMSE : Estimator::LS;
                th[ei] += mse_gramian_theory(est, drops[d].mm.c1(), pl.eta[0], cfg.sigma2, cfg.K) / D;
                th[2 + ei] += mse_mf_theory(est, drops[d].mm.c2, pl.eta[1], cfg.sigma2) / D;
            }
        }
        std::vector<double> row = {grid[g], eta1, eta2, linear_to_db(rc1), linear_to_db(rc2)};
        for (int sidx = 0; sidx < 4; ++sidx) {
            RunningStats rs;
            for (const auto &e : res)
                rs.add(e[4 * g + sidx]);
            const double energy = sidx < 2 ? e_gram : e_mf;
            row.insert(row.end(), {rs.mean, rs.sem(), th[sidx], linear_to_db(rs.mean / energy),
                                   linear_to_db(th[sidx] / energy)});
        }
        tab.rows.push_back(std::move(row));
    }
    return tab;
}

// 4-QAM SER versus rho_ul: wired baseline and the OTA chain with LS and LMMSE
// payload estimation at each P_max.
Table fig3_ser(const RunContext &ctx)
{
    const ScenarioConfig cfg = ctx.scenario();
    const auto rho = ctx.settings.get_grid("rho_grid_db");
    const auto pmax = ctx.settings.get_list("p_max_ser");
    const int D = ctx.drops(10), G = static_cast<int>(rho.size()), NP = static_cast<int>(pmax.size());
    const int S = 1 + 2 * NP;
    const auto drops = detail::make_drops(cfg, D, ctx.unit_ewhw(cfg));
    const Constellation c = qam4();

    struct Point {
        double p = 0.0;
        PayloadPrior prior2;
        std::vector<PowerPlan> plans;
    };
    std::vector<std::vector<Point>> pts(D, std::vector<Point>(G));
    for (int d = 0; d < D; ++d)
        for (int g = 0; g < G; ++g) {
            Point &pt = pts[d][g];
            pt.p = cfg.sigma2 * db_to_linear(rho[g]);
            const MomentModel mm = detail::at_power(drops[d].mm, pt.p);
            pt.prior2 = phase2_prior(mm.c2, cfg.tau_u, cfg.M);
            for (double P : pmax)
                pt.plans.push_back(make_power_plan(mm, P));
        }

    const double s = std::sqrt(cfg.sigma2);
    const auto counts = detail::run_ser(
        G, S, cfg.trials, ctx.settings.get_int("batch"), ctx.settings.get_int("min_errors"), ctx.workers,
        [&](std::uint64_t t, const std::vector<char> &active) {
            const int d = static_cast<int>(t % D);
            const Trial tr = realize_trial(drops[d], t / D, c);
            std::vector<long> e(G * S, 0);
            for (int g = 0; g < G; ++g) {
                if (!active[g])
                    continue;
                const Point &pt = pts[d][g];
                const CMat T = std::sqrt(pt.p) * tr.Ts + s * tr.Tn;
                e[g * S] = count_symbol_errors(detect_lmmse(tr.A, T, pt.p, cfg.sigma2), tr.sym, c);
                for (int j = 0; j < NP; ++j) {
                    const TrialObservation o = observe(tr, pt.p, cfg.sigma2, pt.plans[j].eta[0], pt.plans[j].eta[1]);
                    for (int ei = 0; ei < 2; ++ei) {
                        const PayloadEstimates pe =
                            estimate_payloads(o, ei ? Estimator::LMMSE : Estimator::LS, drops[d].prior1, pt.prior2);
                        const GlobalStats gs = reconstruct(pe.x1, pe.x2, cfg.K, cfg.tau_u);
                        e[g * S + 1 + 2 * j + ei] =
                            count_symbol_errors(detect_lmmse(gs.A_hat, gs.t_hat, pt.p, cfg.sigma2), tr.sym, c);
                    }
                }
            }
            return e;
        });

    Table tab;
    tab.header = {"rho_db", "trials"};
    detail::ser_header(tab, "wired");
    for (double P : pmax) {
        detail::ser_header(tab, "ls_p" + detail::label(P));
        detail::ser_header(tab, "lmmse_p" + detail::label(P));
    }
    const long sym = static_cast<long>(cfg.K) * cfg.tau_u;
    for (int g = 0; g < G; ++g) {
        std::vector<double> row = {rho[g], static_cast<double>(counts.trials[g])};
        for (int si = 0; si < S; ++si)
            detail::push_ser(row, counts.errors[g][si], counts.trials[g] * sym);
        tab.rows.push_back(std::move(row));
    }
    return tab;
}

// Empirical CDF of the per-UE spectral efficiency: wired UatF and
// side-information bounds, and OTA UatF at each P_max. Every column is sorted
// independently; row i sits at cdf = (i + 0.5) / n.
Table fig4_se_cdf(const RunContext &ctx)
{
    const ScenarioConfig cfg = ctx.scenario();
    const auto pmax = ctx.settings.get_list("p_max_rate");
    const int D = ctx.drops(20), NP = static_cast<int>(pmax.size());
    const long T = std::max<long>(1, cfg.trials / D);
    const double rho = db_to_linear(ctx.settings.get_double("rho_db"));
    const double p = cfg.sigma2 * rho;
    const EwhwEstimate unit = ctx.unit_ewhw(cfg);
    const Constellation c = qam4();
    const int len1 = upper_length(cfg.K);

    // [wired uatf, wired si, ota per P_max] x K
    const auto per_drop = parallel_map<std::vector<RVec>>(0, D, ctx.workers, [&](std::uint64_t di) {
        ScenarioConfig dc = cfg;
        dc.p_ul = p;
        const Drop d = make_drop(dc, di, unit);
        std::vector<PowerPlan> plans;
        for (double P : pmax)
            plans.push_back(make_power_plan(d.mm, P));
        UatfAccumulator wired(cfg.K);
        WiredSiAccumulator si(cfg.K);
        std::vector<UatfAccumulator> ota(NP, UatfAccumulator(cfg.K));
        for (long t = 0; t < T; ++t) {
            const Trial tr = realize_trial(d, static_cast<std::uint64_t>(t), c);
            const CMat v = zf_combiner_columns(tr.A);
            wired.add(v, tr.A);
            si.add(v, tr.A, rho);
            for (int j = 0; j < NP; ++j) {
                CpuObservation z1;
                z1.eta = plans[j].eta[0];
                z1.sigma2 = cfg.sigma2;
                z1.Z = std::sqrt(z1.eta) * tr.X1 + std::sqrt(cfg.sigma2) * tr.E1;
                const CMat x1 = lmmse_estimate(z1, d.prior1.mu, d.prior1.c);
                const CMat A_hat = devectorize_upper(dechunk(x1, len1), cfg.K);
                ota[j].add(zf_combiner_columns(A_hat), tr.A);
            }
        }
        std::vector<RVec> out;
        out.push_back(uatf_rate(wired, rho, 0.0, cfg.tau_p, cfg.tau_c));
        out.push_back(si.rate(cfg.tau_p, cfg.tau_c));
        for (int j = 0; j < NP; ++j)
            out.push_back(uatf_rate(ota[j], rho, 1.0 / plans[j].eta[1], cfg.tau_p, cfg.tau_c));
        return out;
    });

    Table tab;
    tab.header = {"cdf", "se_wired_uatf", "se_wired_si"};
    for (double P : pmax)
        tab.header.push_back("se_ota_p" + detail::label(P));
    const int cols = 2 + NP;
    std::vector<std::vector<double>> samples(cols);
    for (const auto &dr : per_drop)
        for (int j = 0; j < cols; ++j)
            for (Eigen::Index k = 0; k < dr[j].size(); ++k)
                samples[j].push_back(dr[j](k));
    for (auto &v : samples)
        std::sort(v.begin(), v.end());
    const std::size_t n = samples[0].size();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row = {(static_cast<double>(i) + 0.5) / static_cast<double>(n)};
        for (int j = 0; j < cols; ++j)
            row.push_back(samples[j][i]);
        tab.rows.push_back(std::move(row));
    }
    return tab;
}

// Quantization NMSE of the digitally summed statistics versus Nb, with the
// OTA LMMSE NMSE at the same operating point for reference.
Table fig6_nmse_vs_nb(const RunContext &ctx)
{
    ScenarioConfig cfg = ctx.scenario();
    cfg.p_ul = cfg.sigma2 * db_to_linear(ctx.settings.get_double("rho_ods_db"));
    const double P_max = ctx.settings.get_double("p_max_ods");
    const auto nb = ctx.settings.get_grid("nb_grid");
    const int D = ctx.drops(1), NB = static_cast<int>(nb.size());
    const auto drops = detail::make_drops(cfg, D, ctx.unit_ewhw(cfg));
    const Constellation c = qam4();
    const RVec w = gramian_weights(cfg.K);

    std::vector<std::vector<OdsQuantizer>> q(D);
    std::vector<PowerPlan> plans;
    std::vector<PayloadPrior> prior2;
    for (int d = 0; d < D; ++d) {
        plans.push_back(make_power_plan(drops[d].mm, P_max));
        prior2.push_back(phase2_prior(drops[d].mm.c2, cfg.tau_u, cfg.M));
        for (double b : nb) {
            Rng rng = make_stream(cfg.seed, StreamTag::calibration,
                                  (static_cast<std::uint64_t>(d) << 24) ^ static_cast<std::uint64_t>(b));
            q[d].push_back(make_ods_quantizer(drops[d].mm, static_cast<int>(b), rng));
        }
    }

    const double sp = std::sqrt(cfg.p_ul), s = std::sqrt(cfg.sigma2);
    const auto res = parallel_map<std::vector<double>>(0, cfg.trials, ctx.workers, [&](std::uint64_t t) {
        const int d = static_cast<int>(t % D);
        const Trial tr = realize_trial(drops[d], t / D, c);
        const CMat T = sp * tr.Ts + s * tr.Tn;
        std::vector<double> e(2 * NB + 2);
        for (int i = 0; i < NB; ++i) {
            const GlobalStats gs = ods_stats(tr, q[d][i], cfg.p_ul, cfg.sigma2);
            e[2 * i] = (gs.A_hat - tr.A).squaredNorm();
            e[2 * i + 1] = (gs.t_hat - T).squaredNorm() / static_cast<double>(cfg.tau_u);
        }
        const TrialObservation o = observe(tr, cfg.p_ul, cfg.sigma2, plans[d].eta[0], plans[d].eta[1]);
        const PayloadEstimates pe = estimate_payloads(o, Estimator::LMMSE, drops[d].prior1, prior2[d]);
        e[2 * NB] = gramian_sq_error(pe.x1, tr.A, w);
        e[2 * NB + 1] = mf_sq_error(pe.x2, T);
        return e;
    });

    double e_gram = 0.0, e_mf = 0.0;
    for (const Drop &d : drops) {
        e_gram += expected_gramian_energy(d.mm.mu1(), d.mm.c1(), cfg.K) / D;
        e_mf += expected_mf_energy(d.mm.c2) / D;
    }
    auto mean_of = [&](int idx) {
        RunningStats rs;
        for (const auto &e : res)
            rs.add(e[idx]);
        return rs.mean;
    };
    const double ota_gram = linear_to_db(mean_of(2 * NB) / e_gram);
    const double ota_mf = linear_to_db(mean_of(2 * NB + 1) / e_mf);

    Table tab;
    tab.header = {"nb", "ne_gram", "nf_gram", "ne_mf", "nf_mf", "nmse_gram_ods_db", "nmse_mf_ods_db",
                  "nmse_gram_ota_db", "nmse_mf_ota_db"};
    for (int i = 0; i < NB; ++i) {
        const OdsQuantizer &q0 = q[0][i];
        tab.rows.push_back({nb[i], double(q0.f1.NE), double(q0.f1.NF), double(q0.f2.NE), double(q0.f2.NF),
                            linear_to_db(mean_of(2 * i) / e_gram), linear_to_db(mean_of(2 * i + 1) / e_mf), ota_gram,
                            ota_mf});
    }
    return tab;
}

// Fronthaul channel uses per coherence block versus Nb, ODS against OTA,
// averaged over drops.
Table fig7_cu_vs_nb(const RunContext &ctx)
{
    const ScenarioConfig cfg = ctx.scenario();
    const double P_max = ctx.settings.get_double("p_max_ods");
    const auto nb = ctx.settings.get_grid("nb_grid");
    const int draws = static_cast<int>(ctx.settings.get_int("rate_draws"));
    const int D = ctx.drops(10);
    const EwhwEstimate unit = ctx.unit_ewhw(cfg);
    const auto rates = parallel_map<RVec>(0, D, ctx.workers, [&](std::uint64_t d) {
        return detail::ap_rates(make_drop(cfg, d, unit), P_max, draws);
    });

    Table tab;
    tab.header = {"nb", "upsilon_ota_gram", "upsilon_ods_gram", "upsilon_ota_mf", "upsilon_ods_mf", "upsilon_ota",
                  "upsilon_ods", "ratio"};
    for (double b : nb) {
        // integer sums first so a constant count averages to itself exactly
        long sum_ota[2] = {0, 0}, sum_ods[2] = {0, 0};
        for (const RVec &R : rates) {
            const detail::PhasePlans pp = detail::phase_plans(R, cfg.K, cfg.tau_u, cfg.M, static_cast<int>(b));
            for (int i = 0; i < 2; ++i) {
                sum_ota[i] += pp.ph[i].upsilon_ota;
                sum_ods[i] += pp.ph[i].upsilon_ods;
            }
        }
        double ota[2], ods[2];
        for (int i = 0; i < 2; ++i) {
            ota[i] = static_cast<double>(sum_ota[i]) / D;
            ods[i] = static_cast<double>(sum_ods[i]) / D;
        }
        tab.rows.push_back({b, ota[0], ods[0], ota[1], ods[1], ota[0] + ota[1], ods[0] + ods[1],
                            (ods[0] + ods[1]) / (ota[0] + ota[1])});
    }
    return tab;
}

// Fronthaul channel uses per coherence block versus the number of APs.
Table fig7b_cu_vs_L(const RunContext &ctx)
{
    const ScenarioConfig base = ctx.scenario();
    const double P_max = ctx.settings.get_double("p_max_ods");
    const auto Ls = ctx.settings.get_grid("L_grid");
    const auto nb = ctx.settings.get_list("nb_list");
    const int draws = static_cast<int>(ctx.settings.get_int("rate_draws"));
    const int D = ctx.drops(10);
    const EwhwEstimate unit = ctx.unit_ewhw(base);

    Table tab;
    tab.header = {"L", "upsilon_ota"};
    for (double b : nb)
        tab.header.push_back("upsilon_ods_nb" + detail::label(b));
    for (double Lv : Ls) {
        ScenarioConfig cfg = base;
        cfg.L = static_cast<int>(Lv);
        cfg.validate();
        const auto rates = parallel_map<RVec>(0, D, ctx.workers, [&](std::uint64_t d) {
            return detail::ap_rates(make_drop(cfg, d, unit), P_max, draws);
        });
        std::vector<double> row = {Lv, 0.0};
        for (double b : nb) {
            long ods = 0, ota = 0;
            for (const RVec &R : rates) {
                const detail::PhasePlans pp = detail::phase_plans(R, cfg.K, cfg.tau_u, cfg.M, static_cast<int>(b));
                ota += pp.ph[0].upsilon_ota + pp.ph[1].upsilon_ota;
                ods += pp.ph[0].upsilon_ods + pp.ph[1].upsilon_ods;
            }
            row[1] = static_cast<double>(ota) / D;
            row.push_back(static_cast<double>(ods) / D);
        }
        tab.rows.push_back(std::move(row));
    }
    return tab;
}

// SER of ODS at each Nb against OTA with and without the extra SNR that the
// ODS channel-use budget would buy. All series share the channel, symbol and
// noise realizations.
Table fig9_ser_ods(const RunContext &ctx)
{
    const ScenarioConfig cfg = ctx.scenario();
    const auto rho = ctx.settings.get_grid("rho_grid_db");
    const auto nb = ctx.settings.get_list("nb_list");
    const double P_max = ctx.settings.get_double("p_max_ods");
    const int draws = static_cast<int>(ctx.settings.get_int("rate_draws"));
    const int D = ctx.drops(10), G = static_cast<int>(rho.size()), NB = static_cast<int>(nb.size());
    const int S = 2 + 2 * NB;
    const auto drops = detail::make_drops(cfg, D, ctx.unit_ewhw(cfg));
    const Constellation c = qam4();

    std::vector<std::vector<double>> factor(D, std::vector<double>(2 * NB));
    for (int d = 0; d < D; ++d) {
        const RVec R = detail::ap_rates(drops[d], P_max, draws);
        for (int i = 0; i < NB; ++i) {
            const detail::PhasePlans pp = detail::phase_plans(R, cfg.K, cfg.tau_u, cfg.M, static_cast<int>(nb[i]));
            factor[d][2 * i] = ota_extra_snr_factor(pp.ph[0]);
            factor[d][2 * i + 1] = ota_extra_snr_factor(pp.ph[1]);
        }
    }
    struct Point {
        double p = 0.0;
        PayloadPrior prior2;
        PowerPlan plan;
        std::vector<OdsQuantizer> q;
    };
    std::vector<std::vector<Point>> pts(D, std::vector<Point>(G));
    for (int d = 0; d < D; ++d)
        for (int g = 0; g < G; ++g) {
            Point &pt = pts[d][g];
            pt.p = cfg.sigma2 * db_to_linear(rho[g]);
            const MomentModel mm = detail::at_power(drops[d].mm, pt.p);
            pt.prior2 = phase2_prior(mm.c2, cfg.tau_u, cfg.M);
            pt.plan = make_power_plan(mm, P_max);
            for (int i = 0; i < NB; ++i) {
                Rng rng = make_stream(cfg.seed, StreamTag::calibration,
                                      (static_cast<std::uint64_t>(d) << 24) ^ (static_cast<std::uint64_t>(g) << 12) ^
                                          static_cast<std::uint64_t>(nb[i]));
                pt.q.push_back(make_ods_quantizer(mm, static_cast<int>(nb[i]), rng));
            }
        }

    const double s = std::sqrt(cfg.sigma2);
    const auto counts = detail::run_ser(
        G, S, cfg.trials, ctx.settings.get_int("batch"), ctx.settings.get_int("min_errors"), ctx.workers,
        [&](std::uint64_t t, const std::vector<char> &active) {
            const int d = static_cast<int>(t % D);
            const Trial tr = realize_trial(drops[d], t / D, c);
            std::vector<long> e(G * S, 0);
            auto ota_errors = [&](const Point &pt, double f1, double f2) {
                const TrialObservation o = observe(tr, pt.p, cfg.sigma2, f1 * pt.plan.eta[0], f2 * pt.plan.eta[1]);
                const PayloadEstimates pe = estimate_payloads(o, Estimator::LMMSE, drops[d].prior1, pt.prior2);
                const GlobalStats gs = reconstruct(pe.x1, pe.x2, cfg.K, cfg.tau_u);
                return count_symbol_errors(detect_lmmse(gs.A_hat, gs.t_hat, pt.p, cfg.sigma2), tr.sym, c);
            };
            for (int g = 0; g < G; ++g) {
                if (!active[g])
                    continue;
                const Point &pt = pts[d][g];
                const CMat T = std::sqrt(pt.p) * tr.Ts + s * tr.Tn;
                e[g * S] = count_symbol_errors(detect_lmmse(tr.A, T, pt.p, cfg.sigma2), tr.sym, c);
                e[g * S + 1] = ota_errors(pt, 1.0, 1.0);
                for (int i = 0; i < NB; ++i) {
                    const GlobalStats gs = ods_stats(tr, pt.q[i], pt.p, cfg.sigma2);
                    e[g * S + 2 + 2 * i] =
                        count_symbol_errors(detect_lmmse(gs.A_hat, gs.t_hat, pt.p, cfg.sigma2), tr.sym, c);
                    e[g * S + 3 + 2 * i] = ota_errors(pt, factor[d][2 * i], factor[d][2 * i + 1]);
                }
            }
            return e;
        });

    Table tab;
    tab.header = {"rho_db", "trials"};
    detail::ser_header(tab, "wired");
    detail::ser_header(tab, "ota_no_extra");
    for (double b : nb) {
        detail::ser_header(tab, "ods_nb" + detail::label(b));
        detail::ser_header(tab, "ota_extra_nb" + detail::label(b));
    }
    const long sym = static_cast<long>(cfg.K) * cfg.tau_u;
    for (int g = 0; g < G; ++g) {
        std::vector<double> row = {rho[g], static_cast<double>(counts.trials[g])};
        for (int si = 0; si < S; ++si)
            detail::push_ser(row, counts.errors[g][si], counts.trials[g] * sym);
        tab.rows.push_back(std::move(row));
    }
    return tab;
}

// SER under imperfect access CSI at several pilot powers (relative to sigma2),
// OTA with LS payload estimation, against the perfect-CSI chain.
Table fig10_ser_impcsi(const RunContext &ctx)
{
    const ScenarioConfig cfg = ctx.scenario();
    const auto rho = ctx.settings.get_grid("rho_grid_db");
    const auto pilot_db = ctx.settings.get_list("pilot_snr_db");
    const double P_max = ctx.settings.get_double("p_max_ods");
    const int D = ctx.drops(10), G = static_cast<int>(rho.size()), NPi = static_cast<int>(pilot_db.size());
    const int S = 2 + NPi;
    const EwhwEstimate unit = ctx.unit_ewhw(cfg);
    const auto drops = detail::make_drops(cfg, D, unit);
    const Constellation c = qam4();

    struct Point {
        double p = 0.0;
        PowerPlan plan;
        std::vector<double> p_pilot;
        std::vector<PowerPlan> imp;  // plans of the whitened statistics
    };
    std::vector<std::vector<Point>> pts(D, std::vector<Point>(G));
    for (int d = 0; d < D; ++d)
        for (int g = 0; g < G; ++g) {
            Point &pt = pts[d][g];
            pt.p = cfg.sigma2 * db_to_linear(rho[g]);
            pt.plan = make_power_plan(detail::at_power(drops[d].mm, pt.p), P_max);
            for (double x : pilot_db) {
                const double pp = cfg.sigma2 * db_to_linear(x);
                const CovarianceSet cw = whitened_covariances(drops[d].sc.cov, pt.p, pp, cfg.tau_p, cfg.sigma2);
                pt.p_pilot.push_back(pp);
                pt.imp.push_back(make_power_plan(build_moment_model(cw, cfg.M, cfg.tau_u, pt.p, 1.0, unit), P_max));
            }
        }

    const double s = std::sqrt(cfg.sigma2);
    const auto counts = detail::run_ser(
        G, S, cfg.trials, ctx.settings.get_int("batch"), ctx.settings.get_int("min_errors"), ctx.workers,
        [&](std::uint64_t t, const std::vector<char> &active) {
            const int d = static_cast<int>(t % D);
            const std::uint64_t local = t / D;
            const Trial tr = realize_trial(drops[d], local, c);
            std::vector<long> e(G * S, 0);
            for (int g = 0; g < G; ++g) {
                if (!active[g])
                    continue;
                const Point &pt = pts[d][g];
                const CMat T = std::sqrt(pt.p) * tr.Ts + s * tr.Tn;
                e[g * S] = count_symbol_errors(detect_lmmse(tr.A, T, pt.p, cfg.sigma2), tr.sym, c);
                {
                    const TrialObservation o = observe(tr, pt.p, cfg.sigma2, pt.plan.eta[0], pt.plan.eta[1]);
                    const GlobalStats gs = reconstruct(ls_estimate(o.z1), ls_estimate(o.z2), cfg.K, cfg.tau_u);
                    e[g * S + 1] =
                        count_symbol_errors(detect_lmmse(gs.A_hat, gs.t_hat, pt.p, cfg.sigma2), tr.sym, c);
                }
                for (int j = 0; j < NPi; ++j) {
                    const ImpCsiTrial it = realize_impcsi_trial(drops[d], local, c, pt.p, pt.p_pilot[j]);
                    CpuObservation z1, z2;
                    z1.eta = pt.imp[j].eta[0];
                    z2.eta = pt.imp[j].eta[1];
                    z1.sigma2 = z2.sigma2 = cfg.sigma2;
                    z1.Z = std::sqrt(z1.eta) * it.X1 + s * it.E1;
                    z2.Z = std::sqrt(z2.eta) * it.X2 + s * it.E2;
                    const GlobalStats gs = reconstruct(ls_estimate(z1), ls_estimate(z2), cfg.K, cfg.tau_u);
                    e[g * S + 2 + j] = count_symbol_errors(detect_lmmse(gs.A_hat, gs.t_hat, pt.p, 1.0), it.sym, c);
                }
            }
            return e;
        });

    Table tab;
    tab.header = {"rho_db", "trials"};
    detail::ser_header(tab, "wired");
    detail::ser_header(tab, "ota_perfect_csi");
    for (double x : pilot_db)
        detail::ser_header(tab, "ota_pilot" + detail::label(x) + "db");
    const long sym = static_cast<long>(cfg.K) * cfg.tau_u;
    for (int g = 0; g < G; ++g) {
        std::vector<double> row = {rho[g], static_cast<double>(counts.trials[g])};
        for (int si = 0; si < S; ++si)
            detail::push_ser(row, counts.errors[g][si], counts.trials[g] * sym);
        tab.rows.push_back(std::move(row));
    }
    return tab;
}

// Data MSE with a perfect Gramian and the ZF combiner on a unit-gain i.i.d.
// deployment (sigma2 = 1), against the ZF expression and its high-power
// floor. E tr A^-1 and E tr A^-2 come from an independent Monte Carlo.
Table asymptote_check(const RunContext &ctx)
{
    ScenarioConfig cfg = ctx.scenario();
    cfg.sigma2 = 1.0;
    const auto grid = ctx.settings.get_grid("asym_grid_db");
    const EwhwEstimate unit = ctx.unit_ewhw(cfg);
    const CovarianceSet cov = CovarianceSet::diagonal(RMat::Ones(cfg.K, cfg.L), RVec::Ones(cfg.L), cfg.N);
    const Constellation c = qam4();

    const auto traces = parallel_map<std::pair<double, double>>(0, cfg.trials, ctx.workers, [&](std::uint64_t t) {
        Rng rng = make_stream(cfg.seed, StreamTag::calibration, t);
        const AccessChannels ch = sample_access(cov, rng);
        CMat A = CMat::Zero(cfg.K, cfg.K);
        for (const CMat &H : ch.H)
            A += H.adjoint() * H;
        const CMat Ai = A.inverse();
        return std::make_pair(Ai.trace().real(), (Ai * Ai).trace().real());
    });
    double tr_inv = 0.0, tr_inv2 = 0.0;
    for (const auto &x : traces) {
        tr_inv += x.first / traces.size();
        tr_inv2 += x.second / traces.size();
    }

    Table tab;
    tab.header = {"p_over_sigma2_db", "eta2", "a_r", "b_r", "mse_sim", "mse_sem", "mse_zf", "mse_floor",
                  "sim_over_floor"};
    for (double xdb : grid) {
        ScenarioConfig pc = cfg;
        pc.p_ul = db_to_linear(xdb);
        const Drop d = make_drop(pc, 0, cov, unit);
        const PowerPlan plan = make_power_plan(d.mm, pc.P_max);
        Eigen::Index r = 0;
        (pc.p_ul * d.mm.a + d.mm.b).maxCoeff(&r);
        const double a_r = d.mm.a(r), b_r = d.mm.b(r);
        const double eta2 = plan.eta[1];
        const auto err = parallel_map<double>(0, pc.trials, ctx.workers, [&](std::uint64_t t) {
            const Trial tr = realize_trial(d, t, c);
            const TrialObservation o = observe(tr, pc.p_ul, 1.0, plan.eta[0], eta2);
            const CMat t_hat = unstack_mf(dechunk(ls_estimate(o.z2), static_cast<Eigen::Index>(pc.K) * pc.tau_u),
                                          pc.K, pc.tau_u);
            const CMat s_hat = tr.A.ldlt().solve(t_hat) / std::sqrt(pc.p_ul);
            return (s_hat - symbol_matrix(tr.sym, c, pc.K, pc.tau_u)).squaredNorm() / pc.tau_u;
        });
        RunningStats rs;
        for (double e : err)
            rs.add(e);
        const double floor = data_mse_floor(tr_inv2, a_r, pc.P_max, 1.0);
        tab.rows.push_back({xdb, eta2, a_r, b_r, rs.mean, rs.sem(),
                            data_mse_zf(tr_inv, tr_inv2, a_r, b_r, pc.P_max, pc.p_ul, 1.0), floor, rs.mean / floor});
    }
    return tab;
}

const std::vector<Experiment> &experiments()
{
    static const std::vector<Experiment> list = {
        {"fig2_nmse", "Gramian/MF NMSE vs P_max, simulated and closed form", fig2_nmse},
        {"fig3_ser", "4-QAM SER vs rho_ul, wired and OTA (LS/LMMSE) at each P_max", fig3_ser},
        {"fig4_se_cdf", "per-UE SE CDF: wired UatF/SI and OTA UatF", fig4_se_cdf},
        {"fig6_nmse_vs_nb", "ODS quantization NMSE vs bits per real symbol", fig6_nmse_vs_nb},
        {"fig7_cu_vs_nb", "fronthaul channel uses vs bits per real symbol", fig7_cu_vs_nb},
        {"fig7b_cu_vs_L", "fronthaul channel uses vs number of APs", fig7b_cu_vs_L},
        {"fig9_ser_ods", "SER of ODS vs OTA with and without extra SNR", fig9_ser_ods},
        {"fig10_ser_impcsi", "SER under imperfect access CSI", fig10_ser_impcsi},
        {"asymptote_check", "data MSE with perfect Gramian vs the high-power floor", asymptote_check},
    };
    return list;
}

const Experiment *find_experiment(const std::string &name)
{
    for (const auto &e : experiments())
        if (name == e.name)
            return &e;
    return nullptr;
}

} // namespace ota
