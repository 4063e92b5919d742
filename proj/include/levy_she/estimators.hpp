#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "analytic_bounds.hpp"
#include "errors.hpp"
#include "kernel.hpp"
#include "noise.hpp"
#include "rng.hpp"
#include "simulator.hpp"

namespace levy_she {

// Field values of every replica at a fixed point set: data[r][t * points + j].
struct PointEnsemble {
    std::vector<double> times;
    std::size_t points = 0;
    std::vector<std::vector<double>> data;

    std::size_t replicas() const { return data.size(); }
    double value(std::size_t r, std::size_t t, std::size_t j) const { return data[r][t * points + j]; }
};

// Torus center plus 4 symmetric points at a quarter of the half side.
inline std::vector<std::size_t> reference_points(const Grid& g) {
    const int c = g.cells / 2, off = std::max(1, g.cells / 8);
    if (g.d == 1) return {g.index(c), g.index(c - off), g.index(c + off), g.index(c - 2 * off), g.index(c + 2 * off)};
    return {g.index(c, c), g.index(c - off, c), g.index(c + off, c), g.index(c, c - off), g.index(c, c + off)};
}

inline void append_replica(PointEnsemble& e, const Trajectory& tr, const std::vector<std::size_t>& points) {
    if (e.data.empty()) {
        e.points = points.size();
        e.times.clear();
        for (const auto& s : tr.snapshots) e.times.push_back(s.time);
    } else if (tr.snapshots.size() != e.times.size() || points.size() != e.points) {
        throw DomainError("replica does not match the ensemble layout");
    }
    std::vector<double> row;
    row.reserve(e.times.size() * e.points);
    for (const auto& s : tr.snapshots)
        for (std::size_t j : points) row.push_back(s.values[j]);
    e.data.push_back(std::move(row));
}

struct MomentCell {
    double estimate = 0.0;
    double stderr_ = 0.0;
    bool divergent_order = false;  // p >= 1 + 2/d
    bool unstable = false;         // nested subsample means disagree by > 2 CIs, or the spread keeps growing
};

struct MomentSeries {
    std::vector<double> times;
    std::vector<double> orders;
    std::vector<std::vector<MomentCell>> cells;  // [t][p]
    std::size_t replicas = 0;
    // Bootstrap replicate estimates [b][t][p], shared by lyapunov_fit.
    std::vector<std::vector<std::vector<double>>> bootstrap;

    double estimate(std::size_t t, std::size_t p) const { return cells[t][p].estimate; }
    std::size_t order_index(double p) const {
        for (std::size_t k = 0; k < orders.size(); ++k)
            if (std::abs(orders[k] - p) < 1e-12) return k;
        throw DomainError("order " + std::to_string(p) + " was not estimated");
    }
};

struct MomentOptions {
    std::size_t resamples = 1000;
    std::uint64_t seed = 0;
    int d = 1;
};

namespace detail {

// Per-replica statistic: mean of |Y|^p over the point set.
inline std::vector<double> replica_stat(const PointEnsemble& e, std::size_t t, double p) {
    std::vector<double> s(e.replicas());
    for (std::size_t r = 0; r < e.replicas(); ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < e.points; ++j) acc += std::pow(std::abs(e.value(r, t, j)), p);
        s[r] = acc / static_cast<double>(e.points);
    }
    return s;
}

inline std::pair<double, double> mean_se(const std::vector<double>& x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += x[i];
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (x[i] - m) * (x[i] - m);
    v /= static_cast<double>(n > 1 ? n - 1 : 1);
    return {m, std::sqrt(v / static_cast<double>(n))};
}

inline double median_block_spread(const std::vector<double>& x, std::size_t blocks) {
    const std::size_t m = x.size() / blocks;
    std::vector<double> sd;
    for (std::size_t b = 0; b < blocks; ++b) {
        std::vector<double> part(x.begin() + static_cast<std::ptrdiff_t>(b * m), x.begin() + static_cast<std::ptrdiff_t>((b + 1) * m));
        sd.push_back(mean_se(part, m).second * std::sqrt(static_cast<double>(m)));
    }
    std::nth_element(sd.begin(), sd.begin() + static_cast<std::ptrdiff_t>(blocks / 2), sd.end());
    return sd[blocks / 2];
}

inline std::size_t draw_index(CounterStream& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
}

}  // namespace detail

inline MomentSeries estimate_moments(const PointEnsemble& e, const std::vector<double>& orders, const MomentOptions& opt = {}) {
    if (e.replicas() == 0) throw DomainError("empty ensemble");
    if (e.replicas() < 2) throw DomainError("moment estimation needs at least 2 replicas");
    const std::size_t n = e.replicas(), T = e.times.size(), P = orders.size();
    MomentSeries out;
    out.times = e.times;
    out.orders = orders;
    out.replicas = n;
    out.cells.assign(T, std::vector<MomentCell>(P));
    out.bootstrap.assign(opt.resamples, std::vector<std::vector<double>>(T, std::vector<double>(P)));

    // One index draw per (resample, slot), reused across every (t, p) cell.
    std::vector<std::vector<std::uint32_t>> idx(opt.resamples, std::vector<std::uint32_t>(n));
    for (std::size_t b = 0; b < opt.resamples; ++b) {
        CounterStream rng(opt.seed, static_cast<std::uint32_t>(b), 0, StreamPurpose::bootstrap);
        for (auto& i : idx[b]) i = static_cast<std::uint32_t>(detail::draw_index(rng, n));
    }
    const double pc = p_critical(opt.d);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < P; ++k) {
            if (!(orders[k] > 0.0)) throw DomainError("moment orders must be positive");
            const auto s = detail::replica_stat(e, t, orders[k]);
            auto& cell = out.cells[t][k];
            cell.estimate = detail::mean_se(s, n).first;
            cell.divergent_order = orders[k] >= pc;
            double bs = 0.0;
            for (std::size_t b = 0; b < opt.resamples; ++b) {
                double m = 0.0;
                for (auto i : idx[b]) m += s[i];
                m /= static_cast<double>(n);
                out.bootstrap[b][t][k] = m;
                bs += m;
            }
            if (opt.resamples > 1) {
                const double B = static_cast<double>(opt.resamples), mb = bs / B;
                double v = 0.0;
                for (std::size_t b = 0; b < opt.resamples; ++b) v += (out.bootstrap[b][t][k] - mb) * (out.bootstrap[b][t][k] - mb);
                cell.stderr_ = std::sqrt(v / (B - 1.0));
            }
            // Nested sizes: prefixes n/16 and n/4 against the full mean, and the median sample
            // spread of disjoint blocks of n/64 against blocks of n/4. A divergent moment makes
            // the means jump and the spread keep growing with the block size.
            if (n >= 256) {
                if (detail::median_block_spread(s, 4) > 2.0 * detail::median_block_spread(s, 64)) cell.unstable = true;
                for (std::size_t m : {n / 16, n / 4}) {
                    const auto [mm, se] = detail::mean_se(s, m);
                    const double ci = 1.96 * std::hypot(se, cell.stderr_);
                    if (std::abs(mm - cell.estimate) > 2.0 * ci) cell.unstable = true;
                }
            }
        }
    }
    return out;
}

struct LyapunovFit {
    double gamma = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double t0 = 0.0;
    double t1 = 0.0;
};

struct FitWindow {
    double t0 = -1.0;  // negative: discard the first 20% of the sampled horizon
    double t1 = -1.0;  // negative: last sampled time
};

namespace detail {

inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

inline LyapunovFit lyapunov_fit(const MomentSeries& s, double p, FitWindow w = {}) {
    if (s.times.empty()) throw DomainError("empty moment series");
    const double first = s.times.front(), last = s.times.back();
    const double t0 = w.t0 < 0.0 ? first + 0.2 * (last - first) : w.t0;
    const double t1 = w.t1 < 0.0 ? last : w.t1;
    if (t0 < first - 1e-12 || t1 > last + 1e-12 || !(t1 > t0)) throw DomainError("fit window outside the sampled times");
    const std::size_t k = s.order_index(p);
    std::vector<std::size_t> sel;
    for (std::size_t t = 0; t < s.times.size(); ++t)
        if (s.times[t] >= t0 - 1e-12 && s.times[t] <= t1 + 1e-12) sel.push_back(t);
    if (sel.size() < 5) throw DomainError("fit window needs at least 5 time points");
    std::vector<double> x, y;
    for (auto t : sel) {
        if (!(s.estimate(t, k) > 0.0)) throw DomainError("nonpositive moment estimate in the fit window");
        x.push_back(s.times[t]);
        y.push_back(std::log(s.estimate(t, k)));
    }
    LyapunovFit f{detail::ls_slope(x, y), 0.0, 0.0, t0, t1};
    f.ci_low = f.ci_high = f.gamma;
    if (!s.bootstrap.empty()) {
        std::vector<double> slopes;
        for (const auto& b : s.bootstrap) {
            std::vector<double> yb;
            bool ok = true;
            for (auto t : sel) {
                ok = ok && b[t][k] > 0.0;
                yb.push_back(std::log(std::max(b[t][k], std::numeric_limits<double>::min())));
            }
            if (ok) slopes.push_back(detail::ls_slope(x, yb));
        }
        if (slopes.size() >= 2) {
            f.ci_low = detail::quantile(slopes, 0.025);
            f.ci_high = detail::quantile(slopes, 0.975);
        }
    }
    return f;
}

// Synthetic series for fitting checks: every time a single replica with the given values.
inline MomentSeries deterministic_series(const std::vector<double>& times, double p, const std::vector<double>& values) {
    MomentSeries s;
    s.times = times;
    s.orders = {p};
    s.replicas = 1;
    for (double v : values) s.cells.push_back({MomentCell{v, 0.0, false, false}});
    return s;
}

struct HillEstimate {
    double alpha = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t k = 0;
    std::size_t n = 0;
};

inline std::size_t default_hill_k(std::size_t n) {
    return static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0)));
}

// Hill estimator over the top k order statistics; k = 0 picks ceil(n^{2/3}).
inline HillEstimate hill_tail_index(const std::vector<double>& samples, std::size_t k = 0) {
    std::vector<double> x;
    x.reserve(samples.size());
    for (double v : samples)
        if (v > 0.0 && std::isfinite(v)) x.push_back(v);
    if (x.size() < 10000) throw DomainError("Hill estimator needs at least 10000 positive samples");
    if (k == 0) k = default_hill_k(x.size());
    if (k < 20 || k >= x.size()) throw DomainError("Hill estimator needs 20 <= k < n");
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k), x.end(), std::greater<double>());
    const double threshold = x[k];
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::log(x[i] / threshold);
    HillEstimate h;
    h.alpha = static_cast<double>(k) / s;
    h.k = k;
    h.n = x.size();
    const double z = boost::math::quantile(boost::math::normal(), 0.975);
    h.ci_low = h.alpha * (1.0 - z / std::sqrt(static_cast<double>(k)));
    h.ci_high = h.alpha * (1.0 + z / std::sqrt(static_cast<double>(k)));
    return h;
}

// Hill estimates over a k grid, for stability plots.
inline std::vector<HillEstimate> hill_plot(const std::vector<double>& samples, const std::vector<std::size_t>& ks) {
    std::vector<HillEstimate> out;
    for (auto k : ks) out.push_back(hill_tail_index(samples, k));
    return out;
}

// Per-cell E|Y(t, x)|^p over replicas, accumulated one trajectory at a time.
struct FieldMoments {
    Grid grid;
    double p = 1.0;
    std::vector<double> times;
    std::vector<std::vector<double>> sums;  // [t][cell]
    std::size_t replicas = 0;

    void add(const Trajectory& tr) {
        if (replicas == 0) {
            grid = tr.snapshots.front().grid;
            for (const auto& s : tr.snapshots) times.push_back(s.time);
            sums.assign(times.size(), std::vector<double>(grid.size(), 0.0));
        }
        if (tr.snapshots.size() != times.size()) throw DomainError("trajectory does not match the accumulated times");
        for (std::size_t t = 0; t < times.size(); ++t)
            for (std::size_t i = 0; i < grid.size(); ++i) sums[t][i] += std::pow(std::abs(tr.snapshots[t].values[i]), p);
        ++replicas;
    }
    double mean(std::size_t t, std::size_t i) const { return sums[t][i] / static_cast<double>(replicas); }
};

struct FrontScan {
    std::vector<double> alphas;
    std::vector<double> growth;  // mean over the window of (1/t) log sup_{|x| >= alpha t} E|Y|^p
    std::optional<double> lower;  // largest alpha with positive growth
    std::optional<double> upper;  // smallest alpha with negative growth
};

inline FrontScan front_scan(const FieldMoments& m, const std::vector<double>& alphas, FitWindow w = {}) {
    if (m.replicas == 0) throw DomainError("empty ensemble");
    const double first = m.times.front(), last = m.times.back();
    const double t0 = w.t0 < 0.0 ? first + 0.2 * (last - first) : w.t0;
    const double t1 = w.t1 < 0.0 ? last : w.t1;
    std::vector<std::size_t> sel;
    for (std::size_t t = 0; t < m.times.size(); ++t)
        if (m.times[t] >= t0 - 1e-12 && m.times[t] <= t1 + 1e-12 && m.times[t] > 0.0) sel.push_back(t);
    if (sel.empty()) throw DomainError("front window contains no positive sampled time");
    const Grid& g = m.grid;
    auto radius = [&](std::size_t i) {
        if (g.d == 1) return std::abs(g.coordinate(static_cast<int>(i)));
        const int a = static_cast<int>(i) / g.cells, b = static_cast<int>(i) % g.cells;
        return std::hypot(g.coordinate(a), g.coordinate(b));
    };
    FrontScan out;
    out.alphas = alphas;
    std::sort(out.alphas.begin(), out.alphas.end());
    for (double a : out.alphas) {
        if (!(a > 0.0)) throw DomainError("front speeds must be positive");
        double acc = 0.0;
        for (auto t : sel) {
            const double r = a * m.times[t];
            if (r > 0.5 * g.length - g.dx()) throw DomainError("cone alpha t lies beyond the torus");
            double sup = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (radius(i) >= r) sup = std::max(sup, m.mean(t, i));
            acc += std::log(sup) / m.times[t];
        }
        out.growth.push_back(acc / static_cast<double>(sel.size()));
    }
    for (std::size_t k = 0; k < out.alphas.size(); ++k) {
        if (out.growth[k] > 0.0) out.lower = out.alphas[k];
        if (out.growth[k] < 0.0 && !out.upper) out.upper = out.alphas[k];
    }
    return out;
}

// v = rho^2 + int z^2 lambda(dz) over the simulated jumps.
inline double noise_second_moment_density(const LevyNoiseSpec& s) {
    const double m2 = tail_pmoment(s, 2.0, s.delta_sim);
    if (!std::isfinite(m2)) throw DivergenceError("second moment of lambda is infinite");
    return s.rho * s.rho + m2;
}

struct SecondMomentOracle {
    RenewalSolution solution;
    double slope_target = 0.0;  // v^2 sigma0^4 / (4 kappa)

    double operator()(double t) const { return solution(t); }
    double late_slope(double fraction = 0.3) const { return solution.late_log_slope(fraction); }
};

// M(t) = 1 + v sigma0^2 int_0^t (4 pi kappa (t - s))^{-1/2} M(s) ds for d = 1 PAM with f = 1.
inline SecondMomentOracle second_moment_oracle(double kappa, double sigma0, double v, double horizon, std::size_t steps = 4000) {
    if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
    if (!std::isfinite(v) || v < 0.0) throw DivergenceError("second moment of the noise must be finite");
    const double c = v * sigma0 * sigma0 / std::sqrt(4.0 * std::numbers::pi * kappa);
    SecondMomentOracle o;
    o.slope_target = v * v * std::pow(sigma0, 4) / (4.0 * kappa);
    if (c == 0.0) {
        o.solution.h = horizon / static_cast<double>(steps);
        o.solution.i.assign(steps + 1, 1.0);
        return o;
    }
    PowerExpKernel w(c, 0.5, 0.0);
    o.solution = renewal_solve([](double) { return 1.0; }, w, horizon, steps);
    return o;
}

inline SecondMomentOracle second_moment_oracle(const LevyNoiseSpec& s, double kappa, double sigma0, double horizon,
                                               std::size_t steps = 4000) {
    if (detail::lambda_mean_drift(s) != 0.0) throw DomainError("second moment oracle needs a mean-zero noise");
    return second_moment_oracle(kappa, sigma0, noise_second_moment_density(s), horizon, steps);
}

}  // namespace levy_she
