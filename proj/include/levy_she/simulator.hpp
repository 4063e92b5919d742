#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "errors.hpp"
#include "kernel.hpp"
#include "noise.hpp"
#include "rng.hpp"

namespace levy_she {

enum class SigmaKind { pam, lipschitz_floor, constant };

// pam: sigma0 x. lipschitz_floor: L_sigma x + (L - L_sigma) x / (1 + |x|), so that
// L_sigma |x| <= |sigma(x)| and sigma is L-Lipschitz and non-decreasing. constant: sigma = value.
struct SigmaSpec {
    SigmaKind kind = SigmaKind::pam;
    double sigma0 = 1.0;
    double L = 1.0;
    double L_sigma = 0.0;
    double value = 1.0;

    static SigmaSpec pam(double s0) { return {SigmaKind::pam, s0, std::abs(s0), std::abs(s0), 0.0}; }
    static SigmaSpec lipschitz_floor(double L, double L_sigma) { return {SigmaKind::lipschitz_floor, 0.0, L, L_sigma, 0.0}; }
    static SigmaSpec constant(double v = 1.0) { return {SigmaKind::constant, 0.0, 0.0, 0.0, v}; }

    double operator()(double x) const {
        switch (kind) {
            case SigmaKind::pam: return sigma0 * x;
            case SigmaKind::lipschitz_floor: return L_sigma * x + (L - L_sigma) * x / (1.0 + std::abs(x));
            default: return value;
        }
    }
    double lipschitz() const { return kind == SigmaKind::pam ? std::abs(sigma0) : kind == SigmaKind::constant ? 0.0 : L; }
    double floor() const { return kind == SigmaKind::pam ? std::abs(sigma0) : kind == SigmaKind::constant ? 0.0 : L_sigma; }
    bool nondecreasing() const { return kind != SigmaKind::pam || sigma0 >= 0.0; }
};

enum class InitialKind { constant, exponential_decay, indicator };

struct InitialSpec {
    InitialKind kind = InitialKind::constant;
    double value = 1.0;      // constant level, or amplitude of the other kinds
    double rate = 1.0;       // exponential decay rate c
    std::array<double, 3> lower{-0.5, -0.5, -0.5};
    std::array<double, 3> upper{0.5, 0.5, 0.5};

    static InitialSpec constant(double v) { return {InitialKind::constant, v}; }
    static InitialSpec exponential_decay(double amplitude, double c) { return {InitialKind::exponential_decay, amplitude, c}; }

    double operator()(std::span<const double> x) const {
        switch (kind) {
            case InitialKind::constant: return value;
            case InitialKind::exponential_decay: {
                double r2 = 0.0;
                for (double xi : x) r2 += xi * xi;
                return value * std::exp(-rate * std::sqrt(r2));
            }
            default:
                for (std::size_t i = 0; i < x.size(); ++i)
                    if (x[i] < lower[i] || x[i] > upper[i]) return 0.0;
                return value;
        }
    }
    double inf_value() const { return kind == InitialKind::constant ? value : 0.0; }
    bool nonnegative() const { return value >= 0.0; }
};

struct ModelConfig {
    int d = 1;
    double kappa = 1.0;
    SigmaSpec sigma;
    InitialSpec f;
    LevyNoiseSpec noise;
};

inline void validate(const ModelConfig& c, const std::string& path = "model") {
    if (c.d < 1 || c.d > 2) throw ConfigError(path + ".d", "simulation supports d = 1 and d = 2");
    if (!(c.kappa > 0.0) || !std::isfinite(c.kappa)) throw ConfigError(path + ".kappa", "must be positive");
    if (c.sigma.kind == SigmaKind::lipschitz_floor && !(c.sigma.L >= c.sigma.L_sigma && c.sigma.L_sigma >= 0.0))
        throw ConfigError(path + ".sigma", "needs L >= L_sigma >= 0");
    if (c.f.kind == InitialKind::exponential_decay && !(c.f.rate >= 0.0)) throw ConfigError(path + ".f.rate", "must be nonnegative");
    validate(c.noise, "noise");
    if (c.noise.rho != 0.0 && c.d != 1) throw ConfigError("noise.rho", "Gaussian part is only supported for d = 1");
}

// Periodic grid on [-L/2, L/2)^d with nodes x_j = (j - N/2) dx.
struct Grid {
    int d = 1;
    int cells = 256;
    double length = 1.0;

    double dx() const { return length / cells; }
    double cell_volume() const { return std::pow(dx(), d); }
    std::size_t size() const { return d == 1 ? static_cast<std::size_t>(cells) : static_cast<std::size_t>(cells) * cells; }
    double coordinate(int j) const { return (j - cells / 2) * dx(); }
    int nearest(double x) const {
        long j = std::lround(x / dx()) + cells / 2;
        j %= cells;
        if (j < 0) j += cells;
        return static_cast<int>(j);
    }
    std::size_t index(int i, int j = 0) const { return d == 1 ? static_cast<std::size_t>(i) : static_cast<std::size_t>(i) * cells + j; }
    std::size_t center() const { return d == 1 ? index(cells / 2) : index(cells / 2, cells / 2); }
};

struct FieldState {
    Grid grid;
    double time = 0.0;
    std::vector<double> values;

    double mass() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * grid.cell_volume();
    }
    bool finite() const {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }
};

inline FieldState sample_initial(const InitialSpec& f, const Grid& g) {
    FieldState s{g, 0.0, std::vector<double>(g.size())};
    if (g.d == 1) {
        for (int i = 0; i < g.cells; ++i) {
            double x[1] = {g.coordinate(i)};
            s.values[g.index(i)] = f(x);
        }
    } else {
        for (int i = 0; i < g.cells; ++i)
            for (int j = 0; j < g.cells; ++j) {
                double x[2] = {g.coordinate(i), g.coordinate(j)};
                s.values[g.index(i, j)] = f(x);
            }
    }
    return s;
}

namespace detail {

struct FftPlans {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
};

// The FFTW planner is not thread-safe; execution with the new-array interface is.
inline FftPlans fft_plans(int d, int n) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, FftPlans> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find({d, n});
    if (it != cache.end()) return it->second;
    const std::size_t real_size = d == 1 ? n : static_cast<std::size_t>(n) * n;
    const std::size_t spec_size = d == 1 ? n / 2 + 1 : static_cast<std::size_t>(n) * (n / 2 + 1);
    double* in = fftw_alloc_real(real_size);
    fftw_complex* out = fftw_alloc_complex(spec_size);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    FftPlans p;
    if (d == 1) {
        p.forward = fftw_plan_dft_r2c_1d(n, in, out, flags);
        p.backward = fftw_plan_dft_c2r_1d(n, out, in, flags);
    } else {
        p.forward = fftw_plan_dft_r2c_2d(n, n, in, out, flags);
        p.backward = fftw_plan_dft_c2r_2d(n, n, out, in, flags);
    }
    fftw_free(in);
    fftw_free(out);
    cache[{d, n}] = p;
    return p;
}

}  // namespace detail

enum class HeatSymbol { automatic, continuum, lattice };

// Periodic heat semigroup e^{t kappa Delta / 2}, optionally times a constant factor.
// In automatic mode, gaps with sqrt(kappa gap) >= 2 dx use the continuum multiplier
// e^{-kappa |k|^2 dt / 2}; shorter gaps use the lattice Laplacian symbol, whose kernel is positive.
// The gap defaults to dt; substeps of one gap pass the full gap so they compose exactly.
class HeatPropagator {
  public:
    explicit HeatPropagator(const Grid& g, HeatSymbol symbol = HeatSymbol::automatic)
        : grid_(g), symbol_(symbol), plans_(detail::fft_plans(g.d, g.cells)) {
        if (g.cells < 2 || g.cells % 2 != 0) throw ConfigError("grid.cells", "must be even and at least 2");
        const std::size_t n = g.cells;
        spectrum_.resize(g.d == 1 ? n / 2 + 1 : n * (n / 2 + 1));
        k2_cont_.resize(spectrum_.size());
        k2_latt_.resize(spectrum_.size());
        const double dx = g.dx();
        auto wave = [&](int m) { return 2.0 * std::numbers::pi * m / g.length; };
        auto latt = [&](int m) { return (2.0 - 2.0 * std::cos(wave(m) * dx)) / (dx * dx); };
        if (g.d == 1) {
            for (int m = 0; m <= g.cells / 2; ++m) {
                k2_cont_[m] = wave(m) * wave(m);
                k2_latt_[m] = latt(m);
            }
        } else {
            const int h = g.cells / 2 + 1;
            for (int i = 0; i < g.cells; ++i) {
                const int mi = i <= g.cells / 2 ? i : i - g.cells;
                for (int j = 0; j < h; ++j) {
                    k2_cont_[static_cast<std::size_t>(i) * h + j] = wave(mi) * wave(mi) + wave(j) * wave(j);
                    k2_latt_[static_cast<std::size_t>(i) * h + j] = latt(mi) + latt(j);
                }
            }
        }
    }

    const Grid& grid() const { return grid_; }

    bool continuum(double kappa, double gap) const {
        if (symbol_ != HeatSymbol::automatic) return symbol_ == HeatSymbol::continuum;
        return std::sqrt(kappa * gap) >= 2.0 * grid_.dx();
    }

    void apply(std::vector<double>& y, double kappa, double dt, double factor = 1.0, double gap = -1.0) {
        if (!(dt >= 0.0)) throw DomainError("heat propagation needs dt >= 0");
        if (dt == 0.0) {
            if (factor != 1.0)
                for (double& v : y) v *= factor;
            return;
        }
        const auto& k2 = continuum(kappa, gap < 0.0 ? dt : gap) ? k2_cont_ : k2_latt_;
        auto* spec = reinterpret_cast<fftw_complex*>(spectrum_.data());
        fftw_execute_dft_r2c(plans_.forward, y.data(), spec);
        const double norm = factor / static_cast<double>(grid_.size());
        for (std::size_t m = 0; m < spectrum_.size(); ++m) spectrum_[m] *= norm * std::exp(-0.5 * kappa * dt * k2[m]);
        fftw_execute_dft_c2r(plans_.backward, spec, y.data());
    }

  private:
    Grid grid_;
    HeatSymbol symbol_;
    detail::FftPlans plans_;
    std::vector<std::complex<double>> spectrum_;
    std::vector<double> k2_cont_, k2_latt_;
};

inline FieldState heat_propagate(const FieldState& s, double kappa, double dt) {
    FieldState out = s;
    HeatPropagator(s.grid).apply(out.values, kappa, dt);
    out.time = s.time + dt;
    return out;
}

// Torus side 12 sqrt(kappa horizon), so that 6 sqrt(kappa horizon) <= L/2.
inline double default_torus_length(double kappa, double horizon) { return 12.0 * std::sqrt(kappa * horizon); }

enum class DriftMode { automatic, rk4, cable };

struct SimOptions {
    double horizon = 1.0;
    std::vector<double> snapshots;  // empty: horizon only
    double length = 0.0;            // 0: default_torus_length
    int cells = 0;                  // 0: 256 for d = 1, 64 for d = 2
    DriftMode drift = DriftMode::automatic;
    HeatSymbol symbol = HeatSymbol::automatic;
    double gaussian_dt = 1e-3;      // Gaussian increments are applied on this time grid
    double max_expected_jumps = 1e8;
};

inline Grid make_grid(const ModelConfig& c, const SimOptions& o) {
    Grid g;
    g.d = c.d;
    g.cells = o.cells > 0 ? o.cells : (c.d == 1 ? 256 : 64);
    g.length = o.length > 0.0 ? o.length : default_torus_length(c.kappa, o.horizon);
    return g;
}

inline std::vector<double> snapshot_times(const SimOptions& o) {
    std::vector<double> t = o.snapshots.empty() ? std::vector<double>{o.horizon} : o.snapshots;
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    for (double s : t)
        if (!(s >= 0.0) || s > o.horizon) throw ConfigError("simulation.snapshots", "times must lie in [0, horizon]");
    return t;
}

// Jumps of one replica over [0, horizon) on the torus. Slab s = [s, s+1) is sampled from the
// stream (seed, replica, box = s), so realizations do not depend on the horizon.
class JumpRealization {
  public:
    static constexpr std::uint32_t kGaussianBoxOffset = 1u << 31;

    JumpRealization(const LevyNoiseSpec& spec, const Grid& g, double horizon, std::uint64_t seed, std::uint32_t replica)
        : seed_(seed), replica_(replica), rho_(spec.rho), grid_(g) {
        LevyNoiseSpec jumps_only = spec;
        jumps_only.rho = 0.0;
        const double rate = retained_rate(spec);
        const double expected = rate * std::pow(g.length, g.d) * horizon;
        if (expected > 1e8) throw ConfigError("noise", "expected jump count " + std::to_string(expected) + " is infeasible");
        if (rate == 0.0) return;
        SpaceTimeBox box;
        box.d = g.d;
        box.cells = 1;
        for (int i = 0; i < g.d; ++i) {
            box.lower[i] = -0.5 * g.length;
            box.upper[i] = 0.5 * g.length;
        }
        const auto slabs = static_cast<std::uint32_t>(std::ceil(horizon));
        for (std::uint32_t s = 0; s < slabs; ++s) {
            box.t0 = s;
            box.t1 = s + 1.0;
            CounterStream rng(seed, replica, s, StreamPurpose::noise);
            for (const auto& e : sample_box(jumps_only, box, rng).jumps)
                if (e.t < horizon) jumps_.push_back(e);
        }
    }

    const std::vector<JumpEvent>& jumps() const { return jumps_; }

    // rho W over [k dt, (k+1) dt) per cell, d = 1.
    std::vector<double> gaussian_increment(std::uint32_t k, double dt) const {
        LevyNoiseSpec g;
        g.rho = rho_;
        g.compensate = false;
        SpaceTimeBox box{k * dt, (k + 1) * dt, 1, {-0.5 * grid_.length}, {0.5 * grid_.length}, grid_.cells};
        CounterStream rng(seed_, replica_, kGaussianBoxOffset + k, StreamPurpose::noise);
        return sample_box(g, box, rng).gaussian;
    }

  private:
    std::uint64_t seed_;
    std::uint32_t replica_;
    double rho_;
    Grid grid_;
    std::vector<JumpEvent> jumps_;
};

struct Trajectory {
    std::vector<FieldState> snapshots;
    std::size_t jumps = 0;
};

// Jump-chain solver: heat flow plus drift ODE between events, grid-Dirac updates at jumps.
class EventDrivenSolver {
  public:
    EventDrivenSolver(const ModelConfig& c, const Grid& g, DriftMode mode, HeatSymbol symbol = HeatSymbol::automatic)
        : cfg_(c), heat_(g, symbol), b_(effective_drift(c.noise)), mode_(mode) {
        if (mode_ == DriftMode::automatic)
            mode_ = c.sigma.kind == SigmaKind::lipschitz_floor ? DriftMode::rk4 : DriftMode::cable;
        if (mode_ == DriftMode::cable && c.sigma.kind == SigmaKind::lipschitz_floor)
            throw ConfigError("simulation.drift", "cable form needs linear or constant sigma");
        state_ = sample_initial(c.f, g);
    }

    const FieldState& state() const { return state_; }
    FieldState& state() { return state_; }
    double drift() const { return b_; }

    void advance_to(double t) {
        const double h = t - state_.time;
        if (h < 0.0) throw DomainError("solver cannot move backwards in time");
        if (h == 0.0) return;
        auto& y = state_.values;
        const auto& s = cfg_.sigma;
        if (b_ == 0.0) {
            heat_.apply(y, cfg_.kappa, h);
        } else if (mode_ == DriftMode::cable) {
            if (s.kind == SigmaKind::pam) {
                // Multiplication by e^{b sigma0 h} commutes with the heat flow.
                heat_.apply(y, cfg_.kappa, h, std::exp(b_ * s.sigma0 * h));
            } else {
                heat_.apply(y, cfg_.kappa, h);
                for (double& v : y) v += b_ * s.value * h;
            }
        } else {
            const double L = std::max(s.lipschitz(), 1e-300);
            const double cap = 0.01 / (std::abs(b_) * L);
            const auto n = static_cast<std::size_t>(std::ceil(h / cap));
            const double dt = h / static_cast<double>(n);
            for (std::size_t k = 0; k < n; ++k) {
                heat_.apply(y, cfg_.kappa, dt, 1.0, h);
                for (double& v : y) v = rk4(v, dt);
            }
        }
        state_.time = t;
        check();
    }

    void apply_jump(const JumpEvent& e) {
        const Grid& g = state_.grid;
        const std::size_t idx = g.d == 1 ? g.index(g.nearest(e.x[0])) : g.index(g.nearest(e.x[0]), g.nearest(e.x[1]));
        double& v = state_.values[idx];
        v += cfg_.sigma(v) * e.z / g.cell_volume();
        check();
    }

    void apply_gaussian(const std::vector<double>& w) {
        const double vol = state_.grid.cell_volume();
        for (std::size_t i = 0; i < w.size(); ++i) state_.values[i] += cfg_.sigma(state_.values[i]) * w[i] / vol;
        check();
    }

  private:
    double rk4(double y, double h) const {
        auto f = [&](double u) { return b_ * cfg_.sigma(u); };
        const double k1 = f(y), k2 = f(y + 0.5 * h * k1), k3 = f(y + 0.5 * h * k2), k4 = f(y + h * k3);
        return y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    void check() const {
        if (!state_.finite()) throw SimulationFault(state_.time, "field became non-finite");
    }

    ModelConfig cfg_;
    HeatPropagator heat_;
    FieldState state_;
    double b_;
    DriftMode mode_;
};

namespace detail {

struct Event {
    double t;
    int kind;  // 0 snapshot, 1 jump, 2 Gaussian step end
    std::size_t index;
};

inline std::vector<Event> event_list(const JumpRealization& noise, const std::vector<double>& snaps, double horizon,
                                     double rho, double gaussian_dt) {
    std::vector<Event> ev;
    for (std::size_t i = 0; i < snaps.size(); ++i) ev.push_back({snaps[i], 0, i});
    for (std::size_t i = 0; i < noise.jumps().size(); ++i) ev.push_back({noise.jumps()[i].t, 1, i});
    if (rho != 0.0) {
        const auto steps = static_cast<std::size_t>(std::floor(horizon / gaussian_dt + 1e-9));
        for (std::size_t k = 0; k < steps; ++k) ev.push_back({(k + 1) * gaussian_dt, 2, k});
    }
    std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
        return a.t < b.t || (a.t == b.t && a.kind < b.kind);
    });
    return ev;
}

}  // namespace detail

inline Trajectory solve_event_driven(const ModelConfig& c, const SimOptions& o, std::uint64_t seed, std::uint32_t replica) {
    validate(c);
    const Grid g = make_grid(c, o);
    const auto snaps = snapshot_times(o);
    JumpRealization noise(c.noise, g, o.horizon, seed, replica);
    EventDrivenSolver solver(c, g, o.drift, o.symbol);
    Trajectory tr;
    tr.jumps = noise.jumps().size();
    for (const auto& e : detail::event_list(noise, snaps, o.horizon, c.noise.rho, o.gaussian_dt)) {
        solver.advance_to(e.t);
        if (e.kind == 0) tr.snapshots.push_back(solver.state());
        else if (e.kind == 1) solver.apply_jump(noise.jumps()[e.index]);
        else solver.apply_gaussian(noise.gaussian_increment(static_cast<std::uint32_t>(e.index), o.gaussian_dt));
    }
    return tr;
}

// Explicit Euler scheme driven by the same jump realization as the event-driven solver.
inline Trajectory solve_finite_difference(const ModelConfig& c, const SimOptions& o, double dt, std::uint64_t seed,
                                          std::uint32_t replica) {
    validate(c);
    const Grid g = make_grid(c, o);
    const double dx = g.dx();
    if (!(dt > 0.0) || dt > dx * dx / (2.0 * c.kappa * c.d) * (1.0 + 1e-12))
        throw ConfigError("simulation.dt", "explicit scheme needs 0 < dt <= dx^2 / (2 kappa d)");
    const auto snaps = snapshot_times(o);
    JumpRealization noise(c.noise, g, o.horizon, seed, replica);
    const double b = effective_drift(c.noise);
    const double vol = g.cell_volume();
    FieldState s = sample_initial(c.f, g);
    std::vector<double> next(s.values.size()), forcing(s.values.size());
    const auto steps = static_cast<std::size_t>(std::llround(o.horizon / dt));
    std::size_t next_jump = 0, next_snap = 0;
    Trajectory tr;
    tr.jumps = noise.jumps().size();
    auto record = [&](double t) {
        while (next_snap < snaps.size() && snaps[next_snap] <= t + 0.5 * dt) {
            FieldState copy = s;
            copy.time = snaps[next_snap];
            tr.snapshots.push_back(std::move(copy));
            ++next_snap;
        }
    };
    record(0.0);
    const int n = g.cells;
    const double lap = 0.5 * c.kappa / (dx * dx);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t1 = (k + 1) * dt;
        std::fill(forcing.begin(), forcing.end(), b * dt);
        if (c.noise.rho != 0.0) {
            // Gaussian increments on the Euler grid itself.
            auto w = noise.gaussian_increment(static_cast<std::uint32_t>(k), dt);
            for (std::size_t i = 0; i < w.size(); ++i) forcing[i] += w[i] / vol;
        }
        while (next_jump < noise.jumps().size() && noise.jumps()[next_jump].t < t1) {
            const auto& e = noise.jumps()[next_jump++];
            const std::size_t idx = g.d == 1 ? g.index(g.nearest(e.x[0])) : g.index(g.nearest(e.x[0]), g.nearest(e.x[1]));
            forcing[idx] += e.z / vol;
        }
        if (g.d == 1) {
            for (int i = 0; i < n; ++i) {
                const double y = s.values[i];
                const double l = s.values[(i + n - 1) % n] + s.values[(i + 1) % n] - 2.0 * y;
                next[i] = y + dt * lap * l + c.sigma(y) * forcing[i];
            }
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double y = s.values[g.index(i, j)];
                    const double l = s.values[g.index((i + n - 1) % n, j)] + s.values[g.index((i + 1) % n, j)]
                                   + s.values[g.index(i, (j + n - 1) % n)] + s.values[g.index(i, (j + 1) % n)] - 4.0 * y;
                    next[g.index(i, j)] = y + dt * lap * l + c.sigma(y) * forcing[g.index(i, j)];
                }
        }
        s.values.swap(next);
        s.time = t1;
        if (!s.finite()) throw SimulationFault(t1, "field became non-finite");
        record(t1);
    }
    return tr;
}

struct PicardResult {
    std::vector<FieldState> iterates;     // Y^{(n)} at the horizon, n = 0..n_iters
    std::vector<double> sup_differences;  // sup |Y^{(n)} - Y^{(n-1)}| at the horizon, n >= 1
};

// Picard iterates Y^{(n)} = Y0 + g * sigma(Y^{(n-1)}) Lambda on a fixed realization. The drift
// convolution uses the trapezoid rule on a grid of step at most h refined by the jump times.
inline PicardResult picard_reference(const ModelConfig& c, const SimOptions& o, int n_iters, std::uint64_t seed,
                                     std::uint32_t replica, double h = 1e-3) {
    validate(c);
    if (c.noise.rho != 0.0) throw ConfigError("noise.rho", "Picard reference needs pure jump noise");
    const Grid g = make_grid(c, o);
    JumpRealization noise(c.noise, g, o.horizon, seed, replica);
    const double b = effective_drift(c.noise);
    const double vol = g.cell_volume();

    std::vector<double> times;
    const auto n_uniform = static_cast<std::size_t>(std::ceil(o.horizon / h));
    for (std::size_t k = 0; k <= n_uniform; ++k) times.push_back(std::min(o.horizon, k * o.horizon / n_uniform));
    std::vector<int> jump_at(times.size(), -1);
    for (std::size_t i = 0; i < noise.jumps().size(); ++i) times.push_back(noise.jumps()[i].t);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    jump_at.assign(times.size(), -1);
    for (std::size_t i = 0; i < noise.jumps().size(); ++i) {
        auto it = std::lower_bound(times.begin(), times.end(), noise.jumps()[i].t);
        jump_at[static_cast<std::size_t>(it - times.begin())] = static_cast<int>(i);
    }
    // Length of the inter-jump gap containing each grid interval, so that the heat symbol
    // matches the event-driven solver.
    std::vector<double> gap(times.size(), 0.0);
    for (std::size_t k = 1, start = 0; k < times.size(); ++k) {
        if (jump_at[k] >= 0 || k + 1 == times.size()) {
            for (std::size_t m = start + 1; m <= k; ++m) gap[m] = times[k] - times[start];
            start = k;
        }
    }

    HeatPropagator heat(g, o.symbol);
    const FieldState f = sample_initial(c.f, g);
    const std::size_t K = times.size();
    // Left limits and post-jump values of the previous iterate at every grid time.
    std::vector<std::vector<double>> prev_left(K), prev_right(K), cur_left(K), cur_right(K);
    {
        std::vector<double> y = f.values;
        for (std::size_t k = 0; k < K; ++k) {
            if (k > 0) heat.apply(y, c.kappa, times[k] - times[k - 1], 1.0, gap[k]);
            prev_left[k] = y;
            prev_right[k] = y;
        }
    }
    PicardResult res;
    res.iterates.push_back(FieldState{g, o.horizon, prev_left.back()});
    std::vector<double> s0(f.values.size()), s1(f.values.size());
    for (int it = 1; it <= n_iters; ++it) {
        std::vector<double> y = f.values;
        cur_left[0] = y;
        cur_right[0] = y;
        for (std::size_t k = 1; k < K; ++k) {
            const double dt = times[k] - times[k - 1];
            if (b != 0.0) {
                for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.5 * dt * b * c.sigma(prev_right[k - 1][i]);
            }
            heat.apply(y, c.kappa, dt, 1.0, gap[k]);
            if (b != 0.0) {
                for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.5 * dt * b * c.sigma(prev_left[k][i]);
            }
            cur_left[k] = y;
            if (jump_at[k] >= 0) {
                const auto& e = noise.jumps()[static_cast<std::size_t>(jump_at[k])];
                const std::size_t idx = g.d == 1 ? g.index(g.nearest(e.x[0])) : g.index(g.nearest(e.x[0]), g.nearest(e.x[1]));
                y[idx] += c.sigma(prev_left[k][idx]) * e.z / vol;
            }
            cur_right[k] = y;
        }
        double sup = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) sup = std::max(sup, std::abs(cur_right.back()[i] - prev_right.back()[i]));
        res.sup_differences.push_back(sup);
        res.iterates.push_back(FieldState{g, o.horizon, cur_right.back()});
        std::swap(prev_left, cur_left);
        std::swap(prev_right, cur_right);
    }
    return res;
}

struct ComparisonResult {
    Trajectory first, second;
    std::size_t violations = 0;
    std::size_t checks = 0;
    double min_gap = std::numeric_limits<double>::infinity();
};

// Two solutions with f1 >= f2 >= 0 driven by one realization, compared after every event.
inline ComparisonResult comparison_run(const ModelConfig& c1, const InitialSpec& f2, const SimOptions& o,
                                       std::uint64_t seed, std::uint32_t replica) {
    validate(c1);
    if (!c1.noise.nonnegative || !is_nonnegative(c1.noise))
        throw ConfigError("noise.nonnegative", "comparison principle needs nonnegative jumps and rho = 0");
    if (!c1.sigma.nondecreasing()) throw ConfigError("model.sigma", "comparison principle needs a non-decreasing sigma");
    ModelConfig c2 = c1;
    c2.f = f2;
    const Grid g = make_grid(c1, o);
    const auto v1 = sample_initial(c1.f, g).values, v2 = sample_initial(f2, g).values;
    for (std::size_t i = 0; i < v1.size(); ++i)
        if (!(v1[i] >= v2[i]) || !(v2[i] >= 0.0)) throw ConfigError("model.f", "comparison needs f1 >= f2 >= 0");
    const auto snaps = snapshot_times(o);
    JumpRealization noise(c1.noise, g, o.horizon, seed, replica);
    EventDrivenSolver a(c1, g, o.drift, o.symbol), b(c2, g, o.drift, o.symbol);
    ComparisonResult res;
    res.first.jumps = res.second.jumps = noise.jumps().size();
    auto compare = [&]() {
        const auto& x = a.state().values;
        const auto& y = b.state().values;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double gap = x[i] - y[i];
            res.min_gap = std::min(res.min_gap, gap);
            if (gap < 0.0) ++res.violations;
        }
        ++res.checks;
    };
    compare();
    for (const auto& e : detail::event_list(noise, snaps, o.horizon, 0.0, o.gaussian_dt)) {
        a.advance_to(e.t);
        b.advance_to(e.t);
        if (e.kind == 0) {
            res.first.snapshots.push_back(a.state());
            res.second.snapshots.push_back(b.state());
        } else {
            a.apply_jump(noise.jumps()[e.index]);
            b.apply_jump(noise.jumps()[e.index]);
        }
        compare();
    }
    return res;
}

// Binary replica file: magic, header with config hash and seed, then time-indexed snapshots.
struct ReplicaHeader {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::uint32_t replica = 0;
    Grid grid;
};

inline constexpr char kReplicaMagic[8] = {'L', 'S', 'H', 'E', 'R', 'E', 'P', '1'};

namespace detail {

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("replica file truncated");
    return v;
}

}  // namespace detail

inline void write_replica_file(const std::filesystem::path& path, const ReplicaHeader& h, const std::vector<FieldState>& snaps) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp);
        os.write(kReplicaMagic, sizeof kReplicaMagic);
        detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(h.config_hash.size()));
        os.write(h.config_hash.data(), static_cast<std::streamsize>(h.config_hash.size()));
        detail::put(os, h.seed);
        detail::put(os, h.replica);
        detail::put<std::int32_t>(os, h.grid.d);
        detail::put<std::int32_t>(os, h.grid.cells);
        detail::put(os, h.grid.length);
        detail::put<std::uint64_t>(os, snaps.size());
        for (const auto& s : snaps) {
            detail::put(os, s.time);
            os.write(reinterpret_cast<const char*>(s.values.data()), static_cast<std::streamsize>(s.values.size() * sizeof(double)));
        }
        if (!os) throw std::runtime_error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::pair<ReplicaHeader, std::vector<FieldState>> read_replica_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kReplicaMagic, 8) != 0) throw std::runtime_error("not a replica file: " + path.string());
    ReplicaHeader h;
    h.config_hash.resize(detail::get<std::uint32_t>(is));
    is.read(h.config_hash.data(), static_cast<std::streamsize>(h.config_hash.size()));
    h.seed = detail::get<std::uint64_t>(is);
    h.replica = detail::get<std::uint32_t>(is);
    h.grid.d = detail::get<std::int32_t>(is);
    h.grid.cells = detail::get<std::int32_t>(is);
    h.grid.length = detail::get<double>(is);
    const auto n = detail::get<std::uint64_t>(is);
    std::vector<FieldState> snaps;
    for (std::uint64_t k = 0; k < n; ++k) {
        FieldState s{h.grid, detail::get<double>(is), std::vector<double>(h.grid.size())};
        is.read(reinterpret_cast<char*>(s.values.data()), static_cast<std::streamsize>(s.values.size() * sizeof(double)));
        if (!is) throw std::runtime_error("replica file truncated");
        snaps.push_back(std::move(s));
    }
    return {h, snaps};
}

}  // namespace levy_she
