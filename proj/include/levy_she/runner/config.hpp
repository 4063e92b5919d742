#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>
#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "../errors.hpp"
#include "../simulator.hpp"

namespace levy_she::runner {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kModuleVersion = "0.1.0";

enum class ExperimentKind { bounds, simulate, moments, tails, front, lab, asymptotics };

inline const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::bounds: return "bounds";
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::moments: return "moments";
        case ExperimentKind::tails: return "tails";
        case ExperimentKind::front: return "front";
        case ExperimentKind::lab: return "lab";
        default: return "asymptotics";
    }
}

inline std::optional<ExperimentKind> parse_kind(const std::string& s) {
    for (auto k : {ExperimentKind::bounds, ExperimentKind::simulate, ExperimentKind::moments, ExperimentKind::tails,
                   ExperimentKind::front, ExperimentKind::lab, ExperimentKind::asymptotics})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

struct Numerics {
    double horizon = 1.0;
    std::vector<double> snapshots;
    std::size_t replicas = 100;
    std::uint64_t seed = 1;
    int cells = 0;
    double length = 0.0;
    DriftMode drift = DriftMode::automatic;
    HeatSymbol symbol = HeatSymbol::automatic;
    double gaussian_dt = 1e-3;
    std::size_t bootstrap = 1000;
};

struct Sweep {
    std::vector<double> p;
    std::vector<double> kappa;
    std::optional<double> epsilon;
    std::optional<double> delta;
    double c = 0.0;
    double L = 1.0;
    std::string constants = "normalized";
};

struct Analysis {
    std::optional<InitialSpec> compare_initial;  // simulate: second initial datum for the ordering check
    double tail_time = -1.0;                     // tails: snapshot used, default horizon
    std::size_t hill_k = 0;
    std::vector<double> orders{1.0, 2.0};
    std::vector<double> alphas;
    double fit_t0 = -1.0;
    double fit_t1 = -1.0;
    std::size_t split_cases = 10000;
    std::size_t decoupling_draws = 100000;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    ExperimentKind kind = ExperimentKind::simulate;
    ModelConfig model;
    Numerics numerics;
    Sweep sweep;
    Analysis analysis;
    std::string output_dir = "out";
};

namespace detail {

// Walks a YAML mapping, tracking the field path and rejecting unknown keys.
class Reader {
  public:
    Reader(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_, "expected a mapping");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return node_ && node_.IsMap() && node_[key] && !node_[key].IsNull();
    }
    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(node_[key], at(key));
    }
    template <class T>
    T require(const std::string& key) {
        if (!has(key)) throw ConfigError(at(key), "required field is missing");
        return convert<T>(node_[key], at(key));
    }
    template <class T>
    std::vector<T> list(const std::string& key) {
        std::vector<T> out;
        if (!has(key)) return out;
        const auto n = node_[key];
        if (!n.IsSequence()) throw ConfigError(at(key), "expected a list");
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(convert<T>(n[i], at(key) + "[" + std::to_string(i) + "]"));
        return out;
    }
    YAML::Node child(const std::string& key) {
        seen_.insert(key);
        return node_ && node_.IsMap() ? node_[key] : YAML::Node();
    }

    void finish() const {
        if (!node_ || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key)) throw ConfigError(at(key), "unknown field");
        }
    }

    template <class T>
    static T convert(const YAML::Node& n, const std::string& path) {
        if (!n.IsScalar()) throw ConfigError(path, "expected a scalar");
        try {
            return n.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(path, "cannot parse '" + n.Scalar() + "'");
        }
    }

  private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

inline SigmaSpec parse_sigma(YAML::Node n, const std::string& path) {
    Reader r(n, path);
    const auto kind = r.get<std::string>("kind", "pam");
    SigmaSpec s;
    if (kind == "pam") {
        s = SigmaSpec::pam(r.get("sigma0", 1.0));
    } else if (kind == "lipschitz_floor") {
        s = SigmaSpec::lipschitz_floor(r.require<double>("L"), r.require<double>("L_sigma"));
    } else if (kind == "constant") {
        s = SigmaSpec::constant(r.get("value", 1.0));
    } else {
        throw ConfigError(r.at("kind"), "expected pam, lipschitz_floor or constant");
    }
    r.finish();
    return s;
}

inline InitialSpec parse_initial(YAML::Node n, const std::string& path) {
    Reader r(n, path);
    const auto kind = r.get<std::string>("kind", "constant");
    InitialSpec f;
    if (kind == "constant") {
        f = InitialSpec::constant(r.get("value", 1.0));
    } else if (kind == "exponential_decay") {
        f = InitialSpec::exponential_decay(r.get("value", 1.0), r.require<double>("rate"));
    } else if (kind == "indicator") {
        f.kind = InitialKind::indicator;
        f.value = r.get("value", 1.0);
        const auto lo = r.list<double>("lower"), hi = r.list<double>("upper");
        if (lo.size() > 3 || hi.size() > 3) throw ConfigError(r.at("lower"), "at most 3 coordinates");
        for (std::size_t i = 0; i < lo.size(); ++i) f.lower[i] = lo[i];
        for (std::size_t i = 0; i < hi.size(); ++i) f.upper[i] = hi[i];
    } else {
        throw ConfigError(r.at("kind"), "expected constant, exponential_decay or indicator");
    }
    r.finish();
    return f;
}

inline LevyNoiseSpec parse_noise(YAML::Node n, const std::string& path) {
    Reader r(n, path);
    LevyNoiseSpec s;
    s.b = r.get("b", 0.0);
    s.rho = r.get("rho", 0.0);
    s.delta_sim = r.get("delta_sim", 0.0);
    s.compensate = r.get("compensate", true);
    s.nonnegative = r.get("nonnegative", false);
    if (auto js = r.child("jumps"); js && !js.IsNull()) {
        if (!js.IsSequence()) throw ConfigError(r.at("jumps"), "expected a list");
        for (std::size_t i = 0; i < js.size(); ++i) {
            Reader a(js[i], r.at("jumps") + "[" + std::to_string(i) + "]");
            s.atoms.push_back({a.require<double>("size"), a.require<double>("rate")});
            a.finish();
        }
    }
    if (auto fs = r.child("families"); fs && !fs.IsNull()) {
        if (!fs.IsSequence()) throw ConfigError(r.at("families"), "expected a list");
        for (std::size_t i = 0; i < fs.size(); ++i) {
            Reader a(fs[i], r.at("families") + "[" + std::to_string(i) + "]");
            JumpFamily f;
            const auto kind = a.require<std::string>("kind");
            if (kind == "exponential") f.kind = FamilyKind::exponential;
            else if (kind == "two_sided_exponential") f.kind = FamilyKind::two_sided_exponential;
            else if (kind == "pareto") f.kind = FamilyKind::pareto;
            else if (kind == "tempered_stable") f.kind = FamilyKind::tempered_stable;
            else throw ConfigError(a.at("kind"), "unknown jump family '" + kind + "'");
            f.intensity = a.get("intensity", f.intensity);
            f.theta = a.get("theta", f.theta);
            f.alpha = a.get("alpha", f.alpha);
            f.cutoff = a.get("cutoff", f.cutoff);
            a.finish();
            s.families.push_back(f);
        }
    }
    r.finish();
    return s;
}

inline DriftMode parse_drift(const std::string& s, const std::string& path) {
    if (s == "automatic") return DriftMode::automatic;
    if (s == "rk4") return DriftMode::rk4;
    if (s == "cable") return DriftMode::cable;
    throw ConfigError(path, "expected automatic, rk4 or cable");
}

inline HeatSymbol parse_symbol(const std::string& s, const std::string& path) {
    if (s == "automatic") return HeatSymbol::automatic;
    if (s == "continuum") return HeatSymbol::continuum;
    if (s == "lattice") return HeatSymbol::lattice;
    throw ConfigError(path, "expected automatic, continuum or lattice");
}

inline const char* to_string(DriftMode m) {
    return m == DriftMode::automatic ? "automatic" : m == DriftMode::rk4 ? "rk4" : "cable";
}
inline const char* to_string(HeatSymbol s) {
    return s == HeatSymbol::automatic ? "automatic" : s == HeatSymbol::continuum ? "continuum" : "lattice";
}

}  // namespace detail

// Parses and validates; every failure is a ConfigError carrying the field path.
inline ExperimentConfig parse_config(const YAML::Node& root) {
    detail::Reader r(root, "");
    ExperimentConfig c;
    c.schema_version = r.require<int>("schema_version");
    if (c.schema_version != kSchemaVersion)
        throw ConfigError("schema_version", "unsupported version " + std::to_string(c.schema_version));
    const auto kind = r.require<std::string>("kind");
    const auto k = parse_kind(kind);
    if (!k) throw ConfigError("kind", "unknown experiment kind '" + kind + "'");
    c.kind = *k;
    c.output_dir = r.get<std::string>("output_dir", c.output_dir);

    {
        detail::Reader m(r.child("model"), "model");
        c.model.d = m.get("d", 1);
        c.model.kappa = m.get("kappa", 1.0);
        if (auto s = m.child("sigma"); s) c.model.sigma = detail::parse_sigma(s, "model.sigma");
        if (auto f = m.child("f"); f) c.model.f = detail::parse_initial(f, "model.f");
        m.finish();
    }
    c.model.noise = detail::parse_noise(r.child("noise"), "noise");
    {
        detail::Reader n(r.child("numerics"), "numerics");
        auto& x = c.numerics;
        x.horizon = n.get("horizon_t", x.horizon);
        x.snapshots = n.list<double>("snapshots_t");
        const auto reps = n.get<long long>("replicas", static_cast<long long>(x.replicas));
        if (reps < 1) throw ConfigError("numerics.replicas", "must be at least 1");
        x.replicas = static_cast<std::size_t>(reps);
        x.seed = n.get<std::uint64_t>("seed", x.seed);
        x.cells = n.get("cells", x.cells);
        x.length = n.get("length", x.length);
        x.drift = detail::parse_drift(n.get<std::string>("drift", "automatic"), "numerics.drift");
        x.symbol = detail::parse_symbol(n.get<std::string>("heat_symbol", "automatic"), "numerics.heat_symbol");
        x.gaussian_dt = n.get("gaussian_dt", x.gaussian_dt);
        x.bootstrap = n.get<std::size_t>("bootstrap", x.bootstrap);
        n.finish();
        if (!(x.horizon > 0.0)) throw ConfigError("numerics.horizon_t", "must be positive");
        for (std::size_t i = 0; i < x.snapshots.size(); ++i)
            if (!(x.snapshots[i] >= 0.0 && x.snapshots[i] <= x.horizon))
                throw ConfigError("numerics.snapshots_t[" + std::to_string(i) + "]", "must lie in [0, horizon_t]");
        if (x.cells < 0 || (x.cells % 2) != 0) throw ConfigError("numerics.cells", "must be a nonnegative even number");
        if (!(x.gaussian_dt > 0.0)) throw ConfigError("numerics.gaussian_dt", "must be positive");
    }
    {
        detail::Reader s(r.child("sweep"), "sweep");
        auto& x = c.sweep;
        x.p = s.list<double>("p");
        x.kappa = s.list<double>("kappa");
        if (s.has("epsilon")) x.epsilon = s.require<double>("epsilon");
        if (s.has("delta")) x.delta = s.require<double>("delta");
        x.c = s.get("c", x.c);
        x.L = s.get("L", x.L);
        x.constants = s.get<std::string>("constants", x.constants);
        s.finish();
        if (x.constants != "normalized" && x.constants != "conservative")
            throw ConfigError("sweep.constants", "expected normalized or conservative");
        for (std::size_t i = 0; i < x.kappa.size(); ++i)
            if (!(x.kappa[i] > 0.0)) throw ConfigError("sweep.kappa[" + std::to_string(i) + "]", "must be positive");
        for (std::size_t i = 0; i < x.p.size(); ++i)
            if (!(x.p[i] > 0.0)) throw ConfigError("sweep.p[" + std::to_string(i) + "]", "must be positive");
    }
    {
        detail::Reader a(r.child("analysis"), "analysis");
        auto& x = c.analysis;
        if (auto f = a.child("compare_initial"); f && !f.IsNull()) x.compare_initial = detail::parse_initial(f, "analysis.compare_initial");
        x.tail_time = a.get("tail_time_t", x.tail_time);
        x.hill_k = a.get<std::size_t>("hill_k", x.hill_k);
        if (a.has("orders")) x.orders = a.list<double>("orders");
        x.alphas = a.list<double>("alphas");
        x.fit_t0 = a.get("fit_t0", x.fit_t0);
        x.fit_t1 = a.get("fit_t1", x.fit_t1);
        x.split_cases = a.get<std::size_t>("split_cases", x.split_cases);
        x.decoupling_draws = a.get<std::size_t>("decoupling_draws", x.decoupling_draws);
        a.finish();
    }
    r.finish();

    const bool needs_model = c.kind != ExperimentKind::lab;
    if (needs_model) {
        if (c.kind == ExperimentKind::bounds || c.kind == ExperimentKind::asymptotics) {
            validate(c.model.noise, "noise");
            if (c.model.d < 1 || c.model.d > 3) throw ConfigError("model.d", "must be 1, 2 or 3");
            if (!(c.model.kappa > 0.0)) throw ConfigError("model.kappa", "must be positive");
            if (c.sweep.p.empty()) throw ConfigError("sweep.p", "needs at least one order");
        } else {
            validate(c.model);
        }
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) throw ConfigError("", "config file not found: " + file.string());
    try {
        return parse_config(YAML::LoadFile(file.string()));
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", std::string("malformed YAML: ") + e.what());
    }
}

namespace detail {

inline nlohmann::ordered_json to_json(const InitialSpec& f) {
    nlohmann::ordered_json j;
    switch (f.kind) {
        case InitialKind::constant: j = {{"kind", "constant"}, {"value", f.value}}; break;
        case InitialKind::exponential_decay: j = {{"kind", "exponential_decay"}, {"value", f.value}, {"rate", f.rate}}; break;
        default:
            j = {{"kind", "indicator"}, {"value", f.value}, {"lower", f.lower}, {"upper", f.upper}};
    }
    return j;
}

inline nlohmann::ordered_json to_json(const SigmaSpec& s) {
    switch (s.kind) {
        case SigmaKind::pam: return {{"kind", "pam"}, {"sigma0", s.sigma0}};
        case SigmaKind::lipschitz_floor: return {{"kind", "lipschitz_floor"}, {"L", s.L}, {"L_sigma", s.L_sigma}};
        default: return {{"kind", "constant"}, {"value", s.value}};
    }
}

}  // namespace detail

// Fully resolved configuration, defaults included.
inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    using J = nlohmann::ordered_json;
    J noise = {{"b", c.model.noise.b},
               {"rho", c.model.noise.rho},
               {"jumps", J::array()},
               {"families", J::array()},
               {"delta_sim", c.model.noise.delta_sim},
               {"compensate", c.model.noise.compensate},
               {"nonnegative", c.model.noise.nonnegative}};
    for (const auto& a : c.model.noise.atoms) noise["jumps"].push_back({{"size", a.size}, {"rate", a.rate}});
    for (const auto& f : c.model.noise.families)
        noise["families"].push_back({{"kind", levy_she::to_string(f.kind)},
                                     {"intensity", f.intensity},
                                     {"theta", f.theta},
                                     {"alpha", f.alpha},
                                     {"cutoff", f.cutoff}});
    J sweep = {{"p", c.sweep.p}, {"kappa", c.sweep.kappa}, {"c", c.sweep.c}, {"L", c.sweep.L}, {"constants", c.sweep.constants}};
    sweep["epsilon"] = c.sweep.epsilon ? J(*c.sweep.epsilon) : J(nullptr);
    sweep["delta"] = c.sweep.delta ? J(*c.sweep.delta) : J(nullptr);
    J analysis = {{"compare_initial", c.analysis.compare_initial ? detail::to_json(*c.analysis.compare_initial) : J(nullptr)},
                  {"tail_time_t", c.analysis.tail_time},
                  {"hill_k", c.analysis.hill_k},
                  {"orders", c.analysis.orders},
                  {"alphas", c.analysis.alphas},
                  {"fit_t0", c.analysis.fit_t0},
                  {"fit_t1", c.analysis.fit_t1},
                  {"split_cases", c.analysis.split_cases},
                  {"decoupling_draws", c.analysis.decoupling_draws}};
    return {{"schema_version", c.schema_version},
            {"kind", to_string(c.kind)},
            {"model",
             {{"d", c.model.d}, {"kappa", c.model.kappa}, {"sigma", detail::to_json(c.model.sigma)}, {"f", detail::to_json(c.model.f)}}},
            {"noise", noise},
            {"numerics",
             {{"horizon_t", c.numerics.horizon},
              {"snapshots_t", c.numerics.snapshots},
              {"replicas", c.numerics.replicas},
              {"seed", c.numerics.seed},
              {"cells", c.numerics.cells},
              {"length", c.numerics.length},
              {"drift", detail::to_string(c.numerics.drift)},
              {"heat_symbol", detail::to_string(c.numerics.symbol)},
              {"gaussian_dt", c.numerics.gaussian_dt},
              {"bootstrap", c.numerics.bootstrap}}},
            {"sweep", sweep},
            {"analysis", analysis},
            {"output_dir", c.output_dir}};
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

// Hash of the resolved config without seed and output directory, first 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
    auto j = to_json(c);
    j["numerics"].erase("seed");
    j.erase("output_dir");
    return sha256_hex(j.dump()).substr(0, 16);
}

}  // namespace levy_she::runner
