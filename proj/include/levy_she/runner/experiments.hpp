#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "../analytic_bounds.hpp"
#include "../estimators.hpp"
#include "../inequality_lab.hpp"
#include "../simulator.hpp"
#include "artifacts.hpp"
#include "config.hpp"

namespace levy_she::runner {

using Json = nlohmann::ordered_json;

struct RunOutput {
    Table table;
    Json summary = Json::object();
    std::vector<std::pair<std::string, Plot>> plots;  // file stem, plot
};

// Replica or sweep-cell failure, carrying what is needed to reproduce it.
struct RunFault : std::runtime_error {
    RunFault(const std::string& what_, std::size_t index, std::uint64_t seed)
        : std::runtime_error(what_), index(index), seed(seed) {}
    std::size_t index;
    std::uint64_t seed;
};

namespace detail {

inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::vector<double> even_times(double horizon, int n) {
    std::vector<double> t;
    for (int i = 1; i <= n; ++i) t.push_back(horizon * i / n);
    return t;
}

inline SimOptions sim_options(const ExperimentConfig& c, std::vector<double> snapshots) {
    SimOptions o;
    o.horizon = c.numerics.horizon;
    o.snapshots = std::move(snapshots);
    o.length = c.numerics.length;
    o.cells = c.numerics.cells;
    o.drift = c.numerics.drift;
    o.symbol = c.numerics.symbol;
    o.gaussian_dt = c.numerics.gaussian_dt;
    return o;
}

template <class F>
void replicas(const ExperimentConfig& c, int threads, F&& fn) {
    try {
        parallel_for(c.numerics.replicas, threads, [&](std::size_t i) { fn(i); });
    } catch (const TaskFault& e) {
        throw RunFault("replica " + std::to_string(e.index) + " (seed " + std::to_string(c.numerics.seed) + ") failed: " + e.what(),
                       e.index, c.numerics.seed);
    }
}

inline double point_mean(const FieldState& s, const std::vector<std::size_t>& pts) {
    double m = 0.0;
    for (auto j : pts) m += s.values[j];
    return m / static_cast<double>(pts.size());
}

inline std::pair<double, double> mean_and_se(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double m = 0.0;
    for (double v : x) m += v;
    m /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return {m, x.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

inline ConstantsMode constants_for(const ExperimentConfig& c, double p) {
    return c.sweep.constants == "conservative" ? ConstantsMode::conservative(p) : ConstantsMode::normalized();
}

// simulate: ensemble mean of the field at the reference points; optional ordering check.
inline RunOutput run_simulate(const ExperimentConfig& c, int threads) {
    const auto snaps = c.numerics.snapshots.empty() ? std::vector<double>{c.numerics.horizon} : c.numerics.snapshots;
    const auto opt = sim_options(c, snaps);
    const auto pts = reference_points(make_grid(c.model, opt));
    const std::size_t R = c.numerics.replicas, T = snapshot_times(opt).size();
    std::vector<std::vector<double>> means(R);
    struct Order {
        std::size_t violations = 0, checks = 0;
        double min_gap = 0.0;
    };
    std::vector<Order> order(R);
    const bool compare = c.analysis.compare_initial.has_value();
    replicas(c, threads, [&](std::size_t i) {
        const auto rep = static_cast<std::uint32_t>(i);
        if (compare) {
            const auto r = comparison_run(c.model, *c.analysis.compare_initial, opt, c.numerics.seed, rep);
            for (const auto& s : r.first.snapshots) means[i].push_back(point_mean(s, pts));
            order[i] = {r.violations, r.checks, r.min_gap};
        } else {
            const auto tr = solve_event_driven(c.model, opt, c.numerics.seed, rep);
            for (const auto& s : tr.snapshots) means[i].push_back(point_mean(s, pts));
        }
    });

    RunOutput out;
    out.table.columns = {"record", "time", "replica", "value", "se", "n", "violations", "checks"};
    const auto times = snapshot_times(opt);
    Json mean_summary = Json::array();
    Series series{"ensemble mean", {}, {}};
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> col(R);
        for (std::size_t i = 0; i < R; ++i) col[i] = means[i][t];
        const auto [m, se] = mean_and_se(col);
        out.table.add({std::string("mean"), times[t], Cell{}, m, se, static_cast<long long>(R), Cell{}, Cell{}});
        mean_summary.push_back({{"time", times[t]}, {"mean", m}, {"se", se}});
        series.x.push_back(times[t]);
        series.y.push_back(m);
    }
    out.summary["mean"] = mean_summary;
    if (compare) {
        std::size_t v = 0, k = 0;
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < R; ++i) {
            out.table.add({std::string("ordering"), Cell{}, static_cast<long long>(i), order[i].min_gap, Cell{}, Cell{},
                           static_cast<long long>(order[i].violations), static_cast<long long>(order[i].checks)});
            v += order[i].violations;
            k += order[i].checks;
            gap = std::min(gap, order[i].min_gap);
        }
        out.summary["ordering"] = {{"violations", v}, {"checks", k}, {"min_gap", finite_or_null(gap)}, {"replicas", R}};
    }
    out.plots.push_back({"mean", Plot{"Ensemble mean at the reference points", "t", "mean", {series}}});
    return out;
}

// tails: Hill estimate of the upper tail of Y(t, 0) across replicas.
inline RunOutput run_tails(const ExperimentConfig& c, int threads) {
    const double t = c.analysis.tail_time > 0.0 ? c.analysis.tail_time : c.numerics.horizon;
    const auto opt = sim_options(c, {t});
    const auto g = make_grid(c.model, opt);
    const std::size_t center = c.model.d == 1 ? g.index(g.cells / 2) : g.index(g.cells / 2, g.cells / 2);
    std::vector<double> samples(c.numerics.replicas);
    replicas(c, threads, [&](std::size_t i) {
        const auto tr = solve_event_driven(c.model, opt, c.numerics.seed, static_cast<std::uint32_t>(i));
        samples[i] = tr.snapshots.back().values[center];
    });
    RunOutput out;
    out.table.columns = {"record", "replica", "k", "value", "ci_low", "ci_high"};
    for (std::size_t i = 0; i < samples.size(); ++i)
        out.table.add({std::string("sample"), static_cast<long long>(i), Cell{}, samples[i], Cell{}, Cell{}});
    const auto est = hill_tail_index(samples, c.analysis.hill_k);
    std::vector<std::size_t> ks;
    for (std::size_t k = 20; k < est.n; k = static_cast<std::size_t>(std::ceil(k * 1.5))) ks.push_back(k);
    Series s{"Hill alpha(k)", {}, {}};
    for (const auto& h : hill_plot(samples, ks)) {
        out.table.add({std::string("hill"), Cell{}, static_cast<long long>(h.k), h.alpha, h.ci_low, h.ci_high});
        s.x.push_back(static_cast<double>(h.k));
        s.y.push_back(h.alpha);
    }
    out.table.add({std::string("estimate"), Cell{}, static_cast<long long>(est.k), est.alpha, est.ci_low, est.ci_high});
    out.summary["time"] = t;
    out.summary["hill"] = {{"alpha", est.alpha}, {"ci_low", est.ci_low}, {"ci_high", est.ci_high}, {"k", est.k}, {"positive_samples", est.n}};
    out.plots.push_back({"hill", Plot{"Hill plot", "k", "alpha", {s}, true, false}});
    return out;
}

// moments: E|Y|^p over time with bootstrap errors and Lyapunov fits.
inline RunOutput run_moments(const ExperimentConfig& c, int threads) {
    const auto snaps = c.numerics.snapshots.empty() ? even_times(c.numerics.horizon, 20) : c.numerics.snapshots;
    const auto opt = sim_options(c, snaps);
    const auto pts = reference_points(make_grid(c.model, opt));
    PointEnsemble e;
    e.times = snapshot_times(opt);
    e.points = pts.size();
    e.data.resize(c.numerics.replicas);
    replicas(c, threads, [&](std::size_t i) {
        const auto tr = solve_event_driven(c.model, opt, c.numerics.seed, static_cast<std::uint32_t>(i));
        for (const auto& s : tr.snapshots)
            for (auto j : pts) e.data[i].push_back(s.values[j]);
    });
    const auto series = estimate_moments(e, c.analysis.orders, {c.numerics.bootstrap, c.numerics.seed, c.model.d});

    std::optional<SecondMomentOracle> oracle;
    if (c.model.d == 1 && c.model.sigma.kind == SigmaKind::pam && c.model.f.kind == InitialKind::constant && c.model.f.value == 1.0
        && c.model.noise.b == 0.0) {
        try {
            oracle = second_moment_oracle(c.model.noise, c.model.kappa, c.model.sigma.sigma0, c.numerics.horizon);
        } catch (const std::exception&) {
        }
    }

    RunOutput out;
    out.table.columns = {"record", "time", "p", "value", "se", "divergent", "unstable", "ci_low", "ci_high"};
    std::vector<Series> plot;
    for (std::size_t k = 0; k < series.orders.size(); ++k) {
        Series s{"p=" + format_double(series.orders[k]), {}, {}};
        for (std::size_t t = 0; t < series.times.size(); ++t) {
            const auto& m = series.cells[t][k];
            out.table.add({std::string("moment"), series.times[t], series.orders[k], m.estimate, m.stderr_, m.divergent_order, m.unstable,
                           Cell{}, Cell{}});
            s.x.push_back(series.times[t]);
            s.y.push_back(m.estimate);
        }
        plot.push_back(std::move(s));
    }
    if (oracle) {
        Series s{"oracle p=2", {}, {}, true};
        for (double t : series.times) {
            out.table.add({std::string("oracle"), t, 2.0, (*oracle)(t), Cell{}, Cell{}, Cell{}, Cell{}, Cell{}});
            s.x.push_back(t);
            s.y.push_back((*oracle)(t));
        }
        plot.push_back(std::move(s));
        out.summary["oracle_late_slope"] = oracle->late_slope();
        out.summary["oracle_slope_target"] = oracle->slope_target;
    }
    Json fits = Json::array();
    for (double p : series.orders) {
        try {
            const auto f = lyapunov_fit(series, p, {c.analysis.fit_t0, c.analysis.fit_t1});
            out.table.add({std::string("lyapunov"), Cell{}, p, f.gamma, Cell{}, Cell{}, Cell{}, f.ci_low, f.ci_high});
            fits.push_back({{"p", p}, {"gamma", f.gamma}, {"ci_low", f.ci_low}, {"ci_high", f.ci_high}, {"t0", f.t0}, {"t1", f.t1}});
        } catch (const std::exception& ex) {
            fits.push_back({{"p", p}, {"error", ex.what()}});
        }
    }
    out.summary["lyapunov"] = fits;
    out.summary["replicas"] = series.replicas;
    out.plots.push_back({"moments", Plot{"Moments E|Y(t,x)|^p", "t", "moment", plot, false, true}});
    return out;
}

// front: growth of sup_{|x| >= alpha t} E|Y|^p, accumulated in fixed replica blocks.
inline RunOutput run_front(const ExperimentConfig& c, int threads) {
    const auto snaps = c.numerics.snapshots.empty() ? even_times(c.numerics.horizon, 20) : c.numerics.snapshots;
    const auto opt = sim_options(c, snaps);
    const double p = c.analysis.orders.empty() ? 1.0 : c.analysis.orders.front();
    if (c.analysis.alphas.empty()) throw ConfigError("analysis.alphas", "front scan needs at least one speed");
    constexpr std::size_t kBlock = 16;
    const std::size_t R = c.numerics.replicas, B = (R + kBlock - 1) / kBlock;
    std::vector<FieldMoments> blocks(B);
    try {
        parallel_for(B, threads, [&](std::size_t b) {
            blocks[b].p = p;
            for (std::size_t i = b * kBlock; i < std::min(R, (b + 1) * kBlock); ++i) {
                try {
                    blocks[b].add(solve_event_driven(c.model, opt, c.numerics.seed, static_cast<std::uint32_t>(i)));
                } catch (const std::exception& e) {
                    throw std::runtime_error("replica " + std::to_string(i) + ": " + e.what());
                }
            }
        });
    } catch (const TaskFault& e) {
        throw RunFault(std::string(e.what()) + " (seed " + std::to_string(c.numerics.seed) + ")", e.index * kBlock, c.numerics.seed);
    }
    FieldMoments all = blocks.front();
    for (std::size_t b = 1; b < B; ++b) {
        for (std::size_t t = 0; t < all.times.size(); ++t)
            for (std::size_t i = 0; i < all.grid.size(); ++i) all.sums[t][i] += blocks[b].sums[t][i];
        all.replicas += blocks[b].replicas;
    }
    const auto scan = front_scan(all, c.analysis.alphas, {c.analysis.fit_t0, c.analysis.fit_t1});
    RunOutput out;
    out.table.columns = {"record", "alpha", "value"};
    Series s{"growth rate", {}, {}};
    for (std::size_t k = 0; k < scan.alphas.size(); ++k) {
        out.table.add({std::string("growth"), scan.alphas[k], scan.growth[k]});
        s.x.push_back(scan.alphas[k]);
        s.y.push_back(scan.growth[k]);
    }
    out.summary["p"] = p;
    out.summary["lower"] = scan.lower ? Json(*scan.lower) : Json(nullptr);
    out.summary["upper"] = scan.upper ? Json(*scan.upper) : Json(nullptr);
    try {
        const auto fb = front_rate_bounds(c.model.noise, {c.model.kappa, c.model.d}, std::max(p, 1.0 + 1e-9), 1.0,
                                          ConstantsMode::normalized(), {c.model.sigma.lipschitz(), 4.0, std::nullopt});
        out.summary["analytic_upper"] = finite_or_null(fb.upper);
        out.summary["analytic_lower"] = fb.lower_certified ? Json(fb.lower) : Json(nullptr);
    } catch (const std::exception& ex) {
        out.summary["analytic_error"] = ex.what();
    }
    out.plots.push_back({"front", Plot{"Front scan", "alpha", "growth rate", {s}}});
    return out;
}

struct BoundCell {
    double kappa = 0.0, p = 0.0;
    double log_beta0 = std::numeric_limits<double>::quiet_NaN();
    double log_beta1 = std::numeric_limits<double>::quiet_NaN();
    double log_front_upper = std::numeric_limits<double>::quiet_NaN();
    double C_beta_c = std::numeric_limits<double>::quiet_NaN();
    double gamma_upper = std::numeric_limits<double>::quiet_NaN();
    double renewal_mass = std::numeric_limits<double>::quiet_NaN();
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    double delta = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
};

inline std::vector<BoundCell> bound_grid(const ExperimentConfig& c, int threads) {
    const auto kappas = c.sweep.kappa.empty() ? std::vector<double>{c.model.kappa} : c.sweep.kappa;
    const auto& ps = c.sweep.p;
    std::vector<BoundCell> cells(kappas.size() * ps.size());
    parallel_for(cells.size(), threads, [&](std::size_t i) {
        auto& cell = cells[i];
        cell.kappa = kappas[i / ps.size()];
        cell.p = ps[i % ps.size()];
        const KernelParams k{cell.kappa, c.model.d};
        try {
            const auto mode = constants_for(c, cell.p);
            const auto up = beta0(c.model.noise, k, cell.p, c.sweep.c, c.sweep.L, mode);
            cell.log_beta0 = up.log_beta0(0.5 * cell.kappa * c.sweep.c * c.sweep.c * c.model.d);
            cell.gamma_upper = up.gamma_upper;
            cell.C_beta_c = stoch_young_constant(c.model.noise, k, cell.p, up.beta0, c.sweep.c, mode);
            cell.log_front_upper = front_rate_bounds(c.model.noise, k, cell.p, 1.0, mode, {c.sweep.L, 4.0, std::nullopt}).log_upper;
            if (cell.p > 1.0) {
                const auto low = c.sweep.epsilon
                                     ? malthusian_at(c.model.noise, k, cell.p, *c.sweep.epsilon,
                                                     c.sweep.delta ? *c.sweep.delta : default_delta(c.model.noise), mode)
                                     : optimized_malthusian(c.model.noise, k, cell.p, mode, c.sweep.delta);
                cell.log_beta1 = low.log_beta1;
                cell.renewal_mass = low.mass;
                cell.epsilon = low.epsilon;
                cell.delta = low.delta;
            }
        } catch (const std::exception& e) {
            cell.status = e.what();
        }
    });
    return cells;
}

inline Json fit_json(const RateFit& f, double target) {
    return {{"estimate", f.estimate}, {"target", target}, {"r2", f.r2}, {"warnings", f.warnings}};
}

// bounds: beta0, beta1 and front upper bounds over the (kappa, p) grid.
inline RunOutput run_bounds(const ExperimentConfig& c, int threads) {
    const auto cells = bound_grid(c, threads);
    RunOutput out;
    out.table.columns = {"kappa", "p", "beta0", "log_beta0", "C_beta_c", "gamma_upper", "beta1", "log_beta1", "renewal_mass",
                         "epsilon", "delta", "front_upper", "status"};
    std::map<double, std::pair<Series, Series>> curves;
    for (const auto& b : cells) {
        out.table.add({b.kappa, b.p, std::exp(b.log_beta0), b.log_beta0, b.C_beta_c, b.gamma_upper, std::exp(b.log_beta1), b.log_beta1,
                       b.renewal_mass, b.epsilon, b.delta, std::exp(b.log_front_upper), b.status});
        auto& [s0, s1] = curves[b.kappa];
        s0.label = "beta0 kappa=" + format_double(b.kappa);
        s1.label = "beta1 kappa=" + format_double(b.kappa);
        s1.dashed = true;
        s0.x.push_back(b.p);
        s0.y.push_back(std::exp(b.log_beta0));
        s1.x.push_back(b.p);
        s1.y.push_back(std::exp(b.log_beta1));
    }
    // Rate fits wherever the p-grid approaches 1 + 2/d.
    Json fits = Json::array();
    const double pc = p_critical(c.model.d);
    for (const auto& [kappa, _] : curves) {
        std::vector<double> p, l0, l1;
        for (const auto& b : cells)
            if (b.kappa == kappa && pc - b.p > 0.0 && pc - b.p < 0.3 && std::isfinite(b.log_beta0) && std::isfinite(b.log_beta1)) {
                p.push_back(b.p);
                l0.push_back(b.log_beta0);
                l1.push_back(b.log_beta1);
            }
        if (p.size() >= 2)
            fits.push_back({{"kappa", kappa},
                            {"beta0", fit_json(asymptotic_rate_p(p, l0, c.model.d), 2.0 / c.model.d)},
                            {"beta1", fit_json(asymptotic_rate_p(p, l1, c.model.d), 2.0 / c.model.d)}});
    }
    out.summary["p_rate_fits"] = fits;
    std::size_t failed = 0;
    for (const auto& b : cells) failed += b.status != "ok";
    out.summary["cells"] = cells.size();
    out.summary["failed_cells"] = failed;
    std::vector<Series> plot;
    for (auto& [_, pair] : curves) {
        plot.push_back(pair.first);
        plot.push_back(pair.second);
    }
    out.plots.push_back({"bounds", Plot{"Rate bounds against p", "p", "rate", plot, false, true}});
    return out;
}

// asymptotics: normalized p-rate fits and log-log kappa slopes with their targets.
inline RunOutput run_asymptotics(const ExperimentConfig& c, int threads) {
    const auto cells = bound_grid(c, threads);
    const int d = c.model.d;
    const double pc = p_critical(d);
    RunOutput out;
    out.table.columns = {"fit", "quantity", "kappa", "p", "estimate", "target", "r2", "warnings"};
    Json rows = Json::array();
    auto add = [&](const char* fit, const char* q, Cell kappa, Cell p, const RateFit& f, double target) {
        std::string w;
        for (const auto& s : f.warnings) w += (w.empty() ? "" : "; ") + s;
        out.table.add({std::string(fit), std::string(q), kappa, p, f.estimate, target, f.r2, w});
        rows.push_back({{"fit", fit}, {"quantity", q}, {"estimate", f.estimate}, {"target", target}, {"warnings", f.warnings}});
    };
    std::vector<double> kappas, ps;
    for (const auto& b : cells) {
        if (std::find(kappas.begin(), kappas.end(), b.kappa) == kappas.end()) kappas.push_back(b.kappa);
        if (std::find(ps.begin(), ps.end(), b.p) == ps.end()) ps.push_back(b.p);
    }
    for (double kappa : kappas) {
        std::vector<double> p, l0, l1;
        for (const auto& b : cells)
            if (b.kappa == kappa && pc - b.p > 0.0 && pc - b.p < 0.3 && std::isfinite(b.log_beta0) && std::isfinite(b.log_beta1)) {
                p.push_back(b.p);
                l0.push_back(b.log_beta0);
                l1.push_back(b.log_beta1);
            }
        if (p.size() < 2) continue;
        add("p_rate", "beta0", kappa, Cell{}, asymptotic_rate_p(p, l0, d), 2.0 / d);
        add("p_rate", "beta1", kappa, Cell{}, asymptotic_rate_p(p, l1, d), 2.0 / d);
    }
    if (kappas.size() >= 2)
        for (double p : ps) {
            std::vector<double> k, l1, lf;
            for (const auto& b : cells)
                if (b.p == p && std::isfinite(b.log_beta1) && std::isfinite(b.log_front_upper)) {
                    k.push_back(b.kappa);
                    l1.push_back(b.log_beta1);
                    lf.push_back(b.log_front_upper);
                }
            if (k.size() < 2) continue;
            add("kappa_slope", "beta1", Cell{}, p, asymptotic_rate_kappa(k, l1), -(p - 1.0) / (pc - p));
            add("kappa_slope", "front_upper", Cell{}, p, asymptotic_rate_kappa(k, lf), (1.0 + 1.0 / d - p) / (pc - p));
        }
    out.summary["fits"] = rows;
    return out;
}

// lab: every committed inequality suite.
inline RunOutput run_lab(const ExperimentConfig& c, int threads) {
    const auto seed = c.numerics.seed;
    std::vector<std::pair<std::string, SuiteReport>> suites(4);
    parallel_for(4, threads, [&](std::size_t i) {
        switch (i) {
            case 0: suites[i] = {"poimom", poimom_suite()}; break;
            case 1: suites[i] = {"split_pmoment", split_suite(c.analysis.split_cases, seed)}; break;
            case 2: suites[i] = {"poi_ineq", poi_ineq_suite(seed)}; break;
            default: suites[i] = {"decoupling", decoupling_suite(seed, c.analysis.decoupling_draws)};
        }
    });
    SuiteReport g;
    for (int d : {1, 2})
        for (double kappa : {1e-2, 0.1, 1.0})
            for (double f : {0.25, 0.5, 0.9, 0.99, 1.0, 1.01}) g.cases.push_back(g_power_moment_case({kappa, d}, f * p_critical(d)));
    suites.emplace_back("g_power_moment", g);

    RunOutput out;
    out.table.columns = {"suite", "case", "params", "method", "lhs", "rhs", "constant", "margin", "se", "holds"};
    Json summary = Json::object();
    std::size_t total = 0;
    for (const auto& [name, rep] : suites) {
        for (std::size_t i = 0; i < rep.cases.size(); ++i) {
            const auto& x = rep.cases[i];
            out.table.add({name, static_cast<long long>(i), x.params, std::string(to_string(x.method)), x.lhs, x.rhs, x.constant, x.margin,
                           x.se, x.holds});
        }
        const auto v = rep.violations();
        total += v;
        summary[name] = {{"cases", rep.cases.size()}, {"violations", v}, {"min_ratio", finite_or_null(rep.min_ratio())}};
    }
    out.summary["suites"] = summary;
    out.summary["violations"] = total;
    return out;
}

}  // namespace detail

inline RunOutput run(const ExperimentConfig& c, int threads = 1) {
    switch (c.kind) {
        case ExperimentKind::simulate: return detail::run_simulate(c, threads);
        case ExperimentKind::tails: return detail::run_tails(c, threads);
        case ExperimentKind::moments: return detail::run_moments(c, threads);
        case ExperimentKind::front: return detail::run_front(c, threads);
        case ExperimentKind::bounds: return detail::run_bounds(c, threads);
        case ExperimentKind::asymptotics: return detail::run_asymptotics(c, threads);
        default: return detail::run_lab(c, threads);
    }
}

inline void write_artifacts(const std::filesystem::path& dir, const ExperimentConfig& c, const RunOutput& out) {
    const auto hash = config_hash(c);
    std::filesystem::create_directories(dir);
    Json lock = {{"config_hash", hash}, {"module_version", kModuleVersion}, {"config", to_json(c)}};
    atomic_write(dir / "config.lock.json", lock.dump(2) + "\n");
    atomic_write(dir / "results.csv", out.table.to_csv(hash, c.numerics.seed, kModuleVersion));
    Json summary = {{"config_hash", hash}, {"seed", c.numerics.seed}, {"module_version", kModuleVersion}, {"kind", to_string(c.kind)}};
    for (const auto& [k, v] : out.summary.items()) summary[k] = v;
    atomic_write(dir / "summary.json", summary.dump(2) + "\n");
    for (const auto& [stem, plot] : out.plots) atomic_write(dir / (stem + ".svg"), render_svg(plot));
}

struct Comparison {
    std::string verdict;  // equal | statistically equivalent | different
    std::vector<std::string> parameter_diffs;
    std::size_t compared = 0, outside = 0, uncompared = 0;
};

namespace detail {

inline void flatten(const Json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else {
        out[prefix] = j.dump();
    }
}

}  // namespace detail

// Cell-wise diff of two artifact directories. Rows with a standard error are compared within 3 SE.
inline Comparison compare(const std::filesystem::path& a, const std::filesystem::path& b) {
    const auto la = Json::parse(read_file(a / "config.lock.json")), lb = Json::parse(read_file(b / "config.lock.json"));
    if (la["config"]["schema_version"] != lb["config"]["schema_version"]) throw ConfigError("schema_version", "artifact schema versions differ");
    Comparison cmp;
    std::map<std::string, std::string> fa, fb;
    detail::flatten(la["config"], "", fa);
    detail::flatten(lb["config"], "", fb);
    for (const auto& [k, v] : fa)
        if (k != "output_dir" && k != "numerics.seed" && (!fb.count(k) || fb[k] != v)) cmp.parameter_diffs.push_back(k);
    for (const auto& [k, v] : fb)
        if (!fa.count(k)) cmp.parameter_diffs.push_back(k);

    const auto ta = read_file(a / "results.csv"), tb = read_file(b / "results.csv");
    if (ta == tb) {
        cmp.verdict = "equal";
        return cmp;
    }
    const auto ra = parse_csv(ta), rb = parse_csv(tb);
    bool shape = ra.size() == rb.size() && !ra.empty() && ra[0] == rb[0];
    if (shape) {
        const auto& head = ra[0];
        auto col = [&](const std::string& name) -> long {
            for (std::size_t i = 0; i < head.size(); ++i)
                if (head[i] == name) return static_cast<long>(i);
            return -1;
        };
        const long v = col("value"), s = col("se");
        for (std::size_t r = 1; r < ra.size(); ++r) {
            if (ra[r].size() != rb[r].size()) {
                shape = false;
                break;
            }
            double sa = 0, sb = 0;
            const bool has_se = v >= 0 && s >= 0 && !ra[r][s].empty() && !rb[r][s].empty() && (sa = std::stod(ra[r][s])) > 0.0
                             && (sb = std::stod(rb[r][s])) > 0.0;
            if (!has_se) {
                ++cmp.uncompared;
                continue;
            }
            ++cmp.compared;
            if (std::abs(std::stod(ra[r][v]) - std::stod(rb[r][v])) > 3.0 * std::hypot(sa, sb)) ++cmp.outside;
        }
    }
    if (cmp.parameter_diffs.empty() && shape && cmp.compared > 0 && cmp.outside == 0)
        cmp.verdict = "statistically equivalent";
    else
        cmp.verdict = "different";
    return cmp;
}

// Command-line entry point: 0 success, 1 run fault, 2 config fault.
inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    if (argc >= 2 && std::string(argv[1]) == "compare") {
        if (argc != 4) {
            err << "usage: levy-she compare DIR_A DIR_B\n";
            return 2;
        }
        try {
            const auto c = compare(argv[2], argv[3]);
            out << c.verdict << "\n";
            for (const auto& p : c.parameter_diffs) out << "parameter differs: " << p << "\n";
            out << "cells compared: " << c.compared << ", outside 3 SE: " << c.outside << ", without SE: " << c.uncompared << "\n";
            return 0;
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return 1;
        }
    }

    CLI::App app{"levy-she: Levy-driven stochastic heat equation experiments"};
    std::string kind, file, outdir;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    app.add_option("kind", kind, "bounds | simulate | moments | tails | front | lab | asymptotics")->required();
    app.add_option("config", file, "YAML experiment config")->required();
    app.add_option("--seed", seed, "override numerics.seed");
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", outdir, "artifact directory (default: output_dir from the config)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    }
    ExperimentConfig cfg;
    try {
        const auto k = parse_kind(kind);
        if (!k) throw ConfigError("kind", "unknown experiment kind '" + kind + "'");
        cfg = load_config(file);
        if (cfg.kind != *k) throw ConfigError("kind", "config describes '" + std::string(to_string(cfg.kind)) + "', not '" + kind + "'");
        if (seed) cfg.numerics.seed = *seed;
        if (!outdir.empty()) cfg.output_dir = outdir;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    }
    try {
        const auto result = run(cfg, threads);
        write_artifacts(cfg.output_dir, cfg, result);
        out << "wrote " << cfg.output_dir << " (config " << config_hash(cfg) << ", seed " << cfg.numerics.seed << ")\n";
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const RunFault& e) {
        err << "run fault: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "run fault (seed " << cfg.numerics.seed << "): " << e.what() << "\n";
        return 1;
    }
}

}  // namespace levy_she::runner
