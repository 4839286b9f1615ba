#include "potts/app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "potts/dynamics.hpp"
#include "potts/errors.hpp"
#include "potts/gates.hpp"
#include "potts/landscape.hpp"
#include "potts/spectral.hpp"
#include "potts/state_space.hpp"

#ifndef POTTS_VERSION
#define POTTS_VERSION "unknown"
#endif

namespace fs = std::filesystem;

namespace potts {

namespace {

const std::vector<std::string> kCommands{"check", "landscape", "gates", "simulate", "spectral", "refpath"};

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw ConfigError("config field '" + field + "': " + what);
}

const Json* find(const Json& j, const std::string& key) {
    if (!j.is_object()) return nullptr;
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

template <class T>
T get_or(const Json& j, const std::string& key, const std::string& path, T fallback) {
    const Json* v = find(j, key);
    if (!v) return fallback;
    try {
        return v->get<T>();
    } catch (const Json::exception&) {
        field_error(path + key, "has the wrong type");
    }
}

std::uint64_t get_u64(const Json& j, const std::string& key, const std::string& path, std::uint64_t fallback) {
    const Json* v = find(j, key);
    if (!v) return fallback;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer() && v->get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v->get<std::int64_t>());
    // Large budgets are often written as 1e12.
    if (v->is_number_float() && v->get<double>() >= 0 && v->get<double>() < 1.8e19 &&
        std::floor(v->get<double>()) == v->get<double>())
        return static_cast<std::uint64_t>(v->get<double>());
    field_error(path + key, "must be a non-negative integer");
}

// Couplings as rational strings ("12/11", "0.25") stay exact; plain numbers become doubles.
struct Number {
    double value = 0.0;
    std::optional<Rational> exact;
};

Number get_number(const Json& j, const std::string& key, const std::string& path) {
    const Json* v = find(j, key);
    if (!v) field_error(path + key, "is required");
    if (v->is_number()) return {v->get<double>(), std::nullopt};
    if (v->is_string()) {
        try {
            Rational r = Rational::parse(v->get<std::string>());
            return {r.to_double(), r};
        } catch (const std::exception& e) {
            field_error(path + key, std::string("is not a rational: ") + e.what());
        }
    }
    field_error(path + key, "must be a number or a rational string");
}

CouplingParams parse_couplings(const Json& model) {
    try {
        if (const Json* c = find(model, "couplings")) {
            static const char* names[6] = {"J11", "J22", "J33", "J12", "J13", "J23"};
            std::array<Number, 6> n;
            bool exact = true;
            for (int i = 0; i < 6; ++i) {
                n[static_cast<std::size_t>(i)] = get_number(*c, names[i], "model.couplings.");
                exact = exact && n[static_cast<std::size_t>(i)].exact.has_value();
            }
            if (exact) {
                std::array<Rational, 6> r;
                for (std::size_t i = 0; i < 6; ++i) r[i] = *n[i].exact;
                return CouplingParams(r);
            }
            std::array<double, 6> d;
            for (std::size_t i = 0; i < 6; ++i) d[i] = n[i].value;
            return CouplingParams(d);
        }
        if (const Json* g = find(model, "gammas")) {
            Number g1 = get_number(*g, "gamma1", "model.gammas.");
            Number g12 = get_number(*g, "gamma12", "model.gammas.");
            Number g23 = get_number(*g, "gamma23", "model.gammas.");
            Number j22 = get_number(*g, "J22", "model.gammas.");
            if (g1.exact && g12.exact && g23.exact && j22.exact)
                return CouplingParams::from_gammas(*g1.exact, *g12.exact, *g23.exact, *j22.exact);
            return CouplingParams::from_gammas(g1.value, g12.value, g23.value, j22.value);
        }
    } catch (const std::invalid_argument& e) {
        field_error("model", e.what());
    }
    field_error("model", "needs a 'couplings' or 'gammas' block");
}

std::string fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fmt(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json finite_or_string(double v) {
    if (std::isfinite(v)) return v;
    return fmt(v);
}

Configuration parse_state(const std::string& text, const TorusLattice& lat, const std::string& field) {
    if (text == "1" || text == "2" || text == "3") return Configuration(lat, static_cast<Spin>(text[0] - '0'));
    try {
        return Configuration::parse(lat, text);
    } catch (const std::exception& e) {
        field_error(field, e.what());
    }
}

Spin parse_spin(const Json& block, const std::string& key, const std::string& path, Spin fallback) {
    const Json* v = find(block, key);
    if (!v) return fallback;
    int s = v->is_string() ? std::atoi(v->get<std::string>().c_str()) : v->is_number_integer() ? v->get<int>() : 0;
    if (s < 1 || s > 3) field_error(path + key, "must be a spin 1, 2 or 3");
    return static_cast<Spin>(s);
}

std::string safe_name(std::string s) {
    for (char& c : s)
        if (c == ':' || c == ',') c = '_';
    return s;
}

// Collects artifacts for one run; everything is written only after the command succeeded.
class Artifacts {
public:
    Artifacts(const ExperimentConfig& cfg) : cfg_(cfg), hash_(config_hash(cfg.raw)) {}
    const std::string& hash() const { return hash_; }

    void json(const std::string& name, Json j) {
        j["config_hash"] = hash_;
        files_.emplace_back(name, j.dump(2) + "\n");
    }
    void csv(const std::string& name, const std::string& body) {
        files_.emplace_back(name, "# config_hash=" + hash_ + "\n" + body);
    }
    RunResult commit(int exit_code, std::string message, Json seeds) {
        fs::create_directories(cfg_.out_dir);
        RunResult r;
        r.exit_code = exit_code;
        r.message = std::move(message);
        for (auto& [name, body] : files_) {
            write_atomic(cfg_.out_dir / name, body);
            r.artifacts.push_back(name);
        }
        r.manifest = {{"version", version_string()},
                      {"command", cfg_.command},
                      {"config_hash", hash_},
                      {"seeds", std::move(seeds)},
                      {"artifacts", r.artifacts},
                      {"status", exit_code == 0 ? "ok" : "assertion-failure"},
                      {"message", r.message}};
        write_atomic(cfg_.out_dir / "manifest.json", r.manifest.dump(2) + "\n");
        r.artifacts.push_back("manifest.json");
        return r;
    }

private:
    const ExperimentConfig& cfg_;
    std::string hash_;
    std::vector<std::pair<std::string, std::string>> files_;
};

Json model_json(const ExperimentConfig& cfg) {
    const auto& p = cfg.params;
    Json j = {{"rows", cfg.lattice.rows()},
              {"cols", cfg.lattice.cols()},
              {"J", p.values()},
              {"gamma1", p.gamma1()},
              {"gamma12", p.gamma12()},
              {"gamma23", p.gamma23()}};
    return j;
}

// ---------------------------------------------------------------- check

RunResult cmd_check(const ExperimentConfig& cfg) {
    Artifacts art(cfg);
    double tol = get_or<double>(cfg.block, "tolerance", "check.", 1e-9);
    bool require = get_or<bool>(cfg.block, "require_all", "check.", true);
    DerivedConstants dc = derive_constants(cfg.params);
    AssumptionReport a = check_assumptions(cfg.params, cfg.lattice, tol);
    Json j = {{"model", model_json(cfg)},
              {"ell_star", dc.ell_star},
              {"gamma_star", dc.gamma_star},
              {"ratio", dc.ratio},
              {"conditions",
               {{"A", {{"ok", a.condA}, {"value", a.condA_value}}},
                {"B", {{"ok", a.condB}, {"residual", a.condB_residual}}},
                {"C", {{"ok", a.condC}, {"slack", a.condC_slack}}},
                {"lattice_margin", {{"ok", a.lattice_margin}, {"lhs", a.margin_lhs}, {"rhs", a.margin_rhs}}}}},
              {"exact", a.exact},
              {"all", a.all()}};
    if (dc.gamma_star_exact) j["gamma_star_exact"] = dc.gamma_star_exact->str();
    art.json("check.json", j);
    bool fail = require && !a.all();
    return art.commit(fail ? kExitAssertion : kExitOk, fail ? "assumptions not all satisfied" : "all conditions hold",
                      Json::object());
}

// ---------------------------------------------------------------- landscape

RunResult cmd_landscape(const ExperimentConfig& cfg) {
    Artifacts art(cfg);
    EnumeratedSpace sp(cfg.lattice, cfg.params, cfg.budgets.states);
    std::vector<double> V = all_stability_levels(sp);
    MinimaReport mr = local_minima_and_plateaux(sp);
    double hmin = *std::min_element(sp.energies().begin(), sp.energies().end());

    Json minima = Json::array();
    double vmax = -1.0;
    for (auto x : mr.local_minima) {
        minima.push_back({{"config", sp.config(x).str()}, {"energy", sp.energy(x)}, {"stability_level", finite_or_string(V[x])}});
        if (!energy_equal(sp.energy(x), hmin) && std::isfinite(V[x])) vmax = std::max(vmax, V[x]);
    }
    Json plateaux = Json::array();
    for (const auto& p : mr.plateaux) {
        Json members = Json::array();
        for (auto x : p) members.push_back(sp.config(x).str());
        plateaux.push_back({{"energy", sp.energy(p.front())}, {"members", members}});
    }
    // Metastable set: maximizers of V over non-ground states.
    Json metastable = Json::array();
    double vtop = -1.0;
    for (std::uint32_t x = 0; x < sp.size(); ++x)
        if (!energy_equal(sp.energy(x), hmin) && std::isfinite(V[x])) vtop = std::max(vtop, V[x]);
    for (std::uint32_t x = 0; x < sp.size(); ++x)
        if (!energy_equal(sp.energy(x), hmin) && std::isfinite(V[x]) && energy_equal(V[x], vtop))
            metastable.push_back(sp.config(x).str());
    Json ground = Json::array();
    std::vector<std::uint32_t> ground_idx;
    for (std::uint32_t x = 0; x < sp.size(); ++x)
        if (energy_equal(sp.energy(x), hmin)) {
            ground.push_back(sp.config(x).str());
            ground_idx.push_back(x);
        }

    Json pairs = get_or<Json>(cfg.block, "pairs", "landscape.", Json::array({{"2", "1"}, {"3", "1"}, {"2", "3"}}));
    Json heights = Json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!pairs[i].is_array() || pairs[i].size() != 2 || !pairs[i][0].is_string() || !pairs[i][1].is_string())
            field_error("landscape.pairs[" + std::to_string(i) + "]", "must be a pair of state strings");
        Configuration a = parse_state(pairs[i][0], cfg.lattice, "landscape.pairs");
        Configuration b = parse_state(pairs[i][1], cfg.lattice, "landscape.pairs");
        CommHeight ch = comm_height(a, b, sp);
        heights.push_back({{"a", a.str()}, {"b", b.str()}, {"phi", finite_or_string(ch.phi)}, {"status", to_string(ch.status)}});
    }

    Json saddles_json;
    if (const Json* sb = find(cfg.block, "saddles")) {
        std::string from = get_or<std::string>(*sb, "from", "landscape.saddles.", "2");
        std::string to = get_or<std::string>(*sb, "to", "landscape.saddles.", "1");
        SaddleOptions so;
        so.essential = get_or<bool>(*sb, "essential", "landscape.saddles.", true);
        so.max_expansions = cfg.budgets.saddle_expansions;
        std::vector<std::uint32_t> A{sp.index(parse_state(from, cfg.lattice, "landscape.saddles.from"))};
        std::vector<std::uint32_t> B{sp.index(parse_state(to, cfg.lattice, "landscape.saddles.to"))};
        SaddleReport rep = minimal_saddles(sp, A, B, so);
        Json list = Json::array();
        for (std::size_t i = 0; i < rep.saddles.size(); ++i)
            list.push_back({{"config", sp.config(rep.saddles[i]).str()}, {"essential", rep.essential.empty() ? -1 : rep.essential[i]}});
        saddles_json = {{"phi", finite_or_string(rep.phi)}, {"saddles", list}, {"truncated", rep.truncated}, {"expansions", rep.expansions}};
    }

    Json j = {{"model", model_json(cfg)},
              {"state_count", sp.size()},
              {"ground_energy", hmin},
              {"global_minima", ground},
              {"local_minima", minima},
              {"plateaux", plateaux},
              {"metastable", {{"stability_level", vtop}, {"states", metastable}}},
              {"max_depth_to_ground", critical_depth(sp)},
              {"comm_heights", heights}};
    if (!saddles_json.is_null()) j["saddles"] = saddles_json;
    art.json("landscape.json", j);

    std::string csv = "config,energy,stability_level\n";
    for (std::uint32_t x = 0; x < sp.size(); ++x) csv += sp.config(x).str() + "," + fmt(sp.energy(x)) + "," + fmt(V[x]) + "\n";
    art.csv("stability_levels.csv", csv);
    return art.commit(kExitOk, "landscape enumerated", Json::object());
}

// ---------------------------------------------------------------- gates

RunResult cmd_gates(const ExperimentConfig& cfg) {
    Artifacts art(cfg);
    Json fams = get_or<Json>(cfg.block, "families", "gates.", Json::array({"W21", "W31", "23union"}));
    Json out = Json::array();
    for (const auto& name : fams) {
        if (!name.is_string()) field_error("gates.families", "entries must be family names");
        GateFamily f;
        try {
            f = GateFamily::parse(name.get<std::string>());
            FamilyEnumeration e = enumerate_family(f, cfg.lattice, cfg.params, cfg.budgets.family_members);
            std::string csv = "config,descriptor\n";
            for (std::size_t i = 0; i < e.members.size(); ++i) csv += e.members[i].str() + "," + e.descriptors[i].str() + "\n";
            std::string file = "gate_" + safe_name(f.name()) + ".csv";
            art.csv(file, csv);
            out.push_back({{"family", f.name()}, {"members", e.members.size()}, {"truncated", e.truncated}, {"file", file}});
        } catch (const std::invalid_argument& ex) {
            field_error("gates.families", name.get<std::string>() + ": " + ex.what());
        }
    }
    Json j = {{"model", model_json(cfg)}, {"families", out}};
    bool fail = false;
    if (get_or<bool>(cfg.block, "slice", "gates.", false)) {
        SliceOptions so;
        so.seed = cfg.seed;
        so.window = get_or<int>(cfg.block, "slice_window", "gates.", 0);
        SliceReport r = critical_slice_check(cfg.params, cfg.lattice, so);
        j["slice"] = {{"ones", r.ones},
                      {"checked", r.checked},
                      {"at_level", r.at_level},
                      {"gate_members", r.gate_members},
                      {"below_level", r.below_level},
                      {"level_nonmembers", r.level_nonmembers},
                      {"members_off_level", r.members_off_level},
                      {"min_excess", finite_or_string(r.min_excess)},
                      {"truncated", r.truncated},
                      {"ok", r.ok()}};
        fail = !r.ok();
    }
    art.json("gates.json", j);
    return art.commit(fail ? kExitAssertion : kExitOk, fail ? "critical slice violations" : "families enumerated",
                      {{"slice", cfg.seed}});
}

// ---------------------------------------------------------------- simulate

Engine parse_engine(const Json& block) {
    std::string e = get_or<std::string>(block, "engine", "simulate.", "rejection-free");
    if (e == "rejection-free") return Engine::RejectionFree;
    if (e == "metropolis") return Engine::Metropolis;
    field_error("simulate.engine", "must be 'rejection-free' or 'metropolis'");
}

std::vector<double> require_grid(const ExperimentConfig& cfg) {
    if (cfg.beta_grid.empty()) field_error("beta_grid", "must list at least one beta");
    return cfg.beta_grid;
}

RunResult simulate_hitting_grid(const ExperimentConfig& cfg, Artifacts& art) {
    const Json& b = cfg.block;
    Spin start = parse_spin(b, "start", "simulate.", 2);
    Json tj = get_or<Json>(b, "target", "simulate.", Json::array({"1"}));
    std::vector<Spin> targets;
    for (const auto& t : tj) {
        int s = t.is_string() ? std::atoi(t.get<std::string>().c_str()) : t.is_number_integer() ? t.get<int>() : 0;
        if (s < 1 || s > 3 || s == start) field_error("simulate.target", "must list spins other than the start");
        targets.push_back(static_cast<Spin>(s));
    }
    int replicas = get_or<int>(b, "replicas", "simulate.", 200);
    if (replicas < 1) field_error("simulate.replicas", "must be positive");
    HittingOptions base;
    base.max_steps = static_cast<std::int64_t>(get_u64(b, "max_steps", "simulate.", 1'000'000'000'000ULL));
    base.engine = parse_engine(b);
    base.classify = get_or<bool>(b, "classify", "simulate.", true);
    std::vector<double> grid = require_grid(cfg);

    DerivedConstants dc = derive_constants(cfg.params);
    Configuration s0(cfg.lattice, start);
    TargetFn target = target_monochromatic(targets);
    std::string csv;
    Json rows = Json::array(), seeds = Json::array();
    std::vector<double> xs, ys;
    std::vector<HittingRecord> last;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        HittingOptions o = base;
        o.beta = grid[i];
        o.seed = cfg.seed + i;
        seeds.push_back(o.seed);
        auto recs = hitting_replicas(s0, target, cfg.params, o, replicas, cfg.threads);
        csv += records_csv(recs, i == 0);
        auto med = censored_median(recs);
        int censored = static_cast<int>(std::count_if(recs.begin(), recs.end(), [](const auto& r) { return r.censored; }));
        Json row = {{"beta", grid[i]}, {"replicas", replicas}, {"censored", censored}, {"seed", o.seed}};
        if (med) {
            row["median_tau"] = *med;
            row["log_median_tau"] = std::log(*med);
            xs.push_back(grid[i]);
            ys.push_back(std::log(*med));
        } else {
            row["median_tau"] = nullptr;
        }
        rows.push_back(row);
        if (i + 1 == grid.size()) last = std::move(recs);
    }
    Json j = {{"model", model_json(cfg)}, {"mode", "hitting"}, {"ell_star", dc.ell_star}, {"gamma_star", dc.gamma_star}, {"rows", rows}};
    if (xs.size() >= 2) {
        LineFit f = fit_line(xs, ys);
        j["fit"] = {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}, {"slope_over_gamma_star", f.slope / dc.gamma_star}};
    }
    // First saddle-level hits at the largest beta.
    if (base.classify) {
        std::map<std::string, int> level, gate;
        int level_hits = 0, vis_m1 = 0, vis_23 = 0;
        for (const auto& r : last) {
            if (r.first_level_hit) {
                ++level_hits;
                ++level[to_string(r.first_level_hit->cls)];
            }
            if (r.first_gate_hit) ++gate[to_string(r.first_gate_hit->cls)];
            vis_m1 += r.visited_w_m1;
            vis_23 += r.visited_w23;
        }
        j["gate_statistics"] = {{"beta", grid.back()},
                                {"first_level_hits", level_hits},
                                {"first_level_classes", level},
                                {"first_gate_classes", gate},
                                {"visited_w_m1", vis_m1},
                                {"visited_w23", vis_23}};
    }
    art.json("simulate.json", j);
    art.csv("hitting.csv", csv);
    return art.commit(kExitOk, "hitting times recorded", {{"per_beta", seeds}, {"streams", "replica index"}});
}

RunResult simulate_recurrence(const ExperimentConfig& cfg, Artifacts& art) {
    const Json& b = cfg.block;
    RecurrenceOptions o;
    o.betas = require_grid(cfg);
    o.replicas = get_or<int>(b, "replicas", "simulate.", 1000);
    o.epsilon = get_or<double>(b, "epsilon", "simulate.", 0.5);
    o.seed = cfg.seed;
    o.max_steps = static_cast<std::int64_t>(get_u64(b, "max_steps", "simulate.", 0));
    o.threads = cfg.threads;
    auto rows = recurrence_experiment(cfg.params, cfg.lattice, o);
    Json out = Json::array();
    std::string csv;
    int violations = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out.push_back({{"beta", r.beta},
                       {"bound", r.bound},
                       {"replicas", r.replicas},
                       {"excluded", r.excluded},
                       {"violations", r.violations},
                       {"max_tau", r.max_tau},
                       {"median_tau", r.median_tau}});
        violations += r.violations;
        csv += records_csv(r.records, i == 0);
    }
    art.json("recurrence.json", {{"model", model_json(cfg)}, {"mode", "recurrence"}, {"epsilon", o.epsilon}, {"rows", out}});
    art.csv("recurrence.csv", csv);
    return art.commit(violations ? kExitAssertion : kExitOk,
                      violations ? std::to_string(violations) + " replicas exceeded the bound" : "all replicas within the bound",
                      {{"base", cfg.seed}, {"starts", "Philox(seed ^ 0x5DEECE66D, replica)"}, {"streams", "replica index"}});
}

RunResult simulate_split(const ExperimentConfig& cfg, Artifacts& art) {
    const Json& b = cfg.block;
    SplitOptions o;
    o.beta = require_grid(cfg).back();
    o.replicas = get_or<int>(b, "replicas", "simulate.", 200);
    o.seed = cfg.seed;
    o.max_steps = static_cast<std::int64_t>(get_u64(b, "max_steps", "simulate.", 1'000'000'000'000ULL));
    o.threads = cfg.threads;
    SplitReport r = transition_split_experiment(cfg.params, cfg.lattice, o);
    auto prop = [](const Proportion& p) {
        auto [lo, hi] = p.wilson();
        return Json{{"count", p.count}, {"total", p.total}, {"value", p.value()}, {"wilson95", {lo, hi}}};
    };
    art.json("split.json", {{"model", model_json(cfg)},
                            {"mode", "split"},
                            {"beta", o.beta},
                            {"direct", prop(r.direct)},
                            {"via_23", prop(r.via_23)},
                            {"unclassified", r.unclassified}});
    art.csv("split.csv", records_csv(r.records));
    return art.commit(kExitOk, "split recorded", {{"base", cfg.seed}, {"streams", "replica index"}});
}

RunResult cmd_simulate(const ExperimentConfig& cfg) {
    Artifacts art(cfg);
    std::string mode = get_or<std::string>(cfg.block, "mode", "simulate.", "hitting");
    if (mode == "hitting") return simulate_hitting_grid(cfg, art);
    if (mode == "recurrence") return simulate_recurrence(cfg, art);
    if (mode == "split") return simulate_split(cfg, art);
    field_error("simulate.mode", "must be hitting, recurrence or split");
}

// ---------------------------------------------------------------- spectral

RunResult cmd_spectral(const ExperimentConfig& cfg) {
    Artifacts art(cfg);
    const Json& b = cfg.block;
    std::vector<double> eps = get_or<std::vector<double>>(b, "epsilons", "spectral.", {0.25});
    for (double e : eps)
        if (!(e > 0.0 && e < 1.0)) field_error("spectral.epsilons", "entries must lie in (0, 1)");
    SpectralOptions so;
    std::string m = get_or<std::string>(b, "method", "spectral.", "auto");
    if (m == "auto") so.method = GapMethod::Auto;
    else if (m == "dense") so.method = GapMethod::Dense;
    else if (m == "lanczos") so.method = GapMethod::Lanczos;
    else if (m == "high-precision") so.method = GapMethod::HighPrecision;
    else field_error("spectral.method", "must be auto, dense, lanczos or high-precision");
    so.digits = get_or<int>(b, "digits", "spectral.", 0);
    so.slow_modes = get_or<int>(b, "slow_modes", "spectral.", so.slow_modes);
    bool mixing = get_or<bool>(b, "mixing", "spectral.", true);
    std::vector<double> grid = require_grid(cfg);

    auto sp = std::make_shared<const EnumeratedSpace>(cfg.lattice, cfg.params, cfg.budgets.states);
    double depth = critical_depth(*sp);
    std::string csv = "beta,rho,log_rho,log_rho_over_beta,method,digits";
    for (double e : eps) csv += ",tmix_" + fmt(e);
    csv += "\n";
    Json rows = Json::array();
    for (double beta : grid) {
        Kernel k = build_kernel(sp, beta);
        SpectralResult r = spectral_gap(k, so);
        Json row = {{"beta", beta},
                    {"rho", r.rho},
                    {"log_rho", r.log_rho},
                    {"neg_log_rho_over_beta", beta > 0 ? -r.log_rho / beta : 0.0},
                    {"method", to_string(r.method)},
                    {"digits", r.digits},
                    {"residual", r.residual},
                    {"eigenvalues", r.eigenvalues},
                    {"complete_spectrum", r.full}};
        std::string line = fmt(beta) + "," + fmt(r.rho) + "," + fmt(r.log_rho) + "," +
                           fmt(beta > 0 ? r.log_rho / beta : 0.0) + "," + to_string(r.method) + "," + std::to_string(r.digits);
        if (mixing) {
            GibbsMeasure mu = gibbs_measure(*sp, beta);
            Json tm = Json::object();
            for (double e : eps) {
                MixingResult mr;
                if (r.method == GapMethod::HighPrecision) {
                    mr = mixing_time_spectral(k, mu, r, e);
                    if (mr.method == "spectral-upper-bound" && sp->size() <= 729) {
                        SpectralOptions dense = so;
                        dense.method = GapMethod::Dense;
                        mr = mixing_time(k, mu, e, dense);
                    }
                } else {
                    mr = mixing_time(k, mu, e, so);
                }
                Json t = {{"n", mr.n}, {"exact", mr.exact}, {"lower_bound_only", mr.lower_bound_only}, {"method", mr.method}};
                if (mr.exact) t["n"] = static_cast<std::uint64_t>(mr.n);
                tm[fmt(e)] = t;
                line += "," + fmt(mr.n);
            }
            row["tmix"] = tm;
        }
        rows.push_back(row);
        csv += line + "\n";
    }
    art.json("spectral.json", {{"model", model_json(cfg)}, {"max_depth_to_ground", depth}, {"rows", rows}});
    art.csv("spectral.csv", csv);
    return art.commit(kExitOk, "spectra computed", Json::object());
}

// ---------------------------------------------------------------- refpath

std::string path_csv(const LatticePath& p, const CouplingParams& params) {
    std::string out = "step,config,energy\n";
    for (std::size_t i = 0; i < p.steps.size(); ++i)
        out += std::to_string(i) + "," + p.steps[i].str() + "," + fmt(energy(p.steps[i], params)) + "\n";
    return out;
}

RunResult cmd_refpath(const ExperimentConfig& cfg) {
    Artifacts art(cfg);
    const Json& b = cfg.block;
    const auto& par = cfg.params;
    DerivedConstants dc = derive_constants(par);
    double h2 = energy(Configuration(cfg.lattice, Spin{2}), par);
    double level = h2 + dc.gamma_star;
    double tol = get_or<double>(b, "tolerance", "refpath.", 1e-9);
    auto exact = [&](double h) { return std::abs(h - level) <= tol * std::max(1.0, std::abs(level)); };

    Configuration anchor(cfg.lattice, Spin{2});
    try {
        if (const Json* a = find(b, "anchor")) {
            anchor = Configuration::parse(cfg.lattice, a->get<std::string>());
        } else {
            FamilyEnumeration w = enumerate_family(GateFamily::w_m1(2), cfg.lattice, par, cfg.budgets.family_members);
            if (w.members.empty()) field_error("refpath", "W21 is empty on this lattice");
            anchor = w.members.front();
        }
    } catch (const Json::exception&) {
        field_error("refpath.anchor", "must be a configuration string");
    } catch (const std::invalid_argument& e) {
        field_error("refpath.anchor", e.what());
    }
    LatticePath p21 = reference_path_m_to_1(2, anchor, par);
    auto am21 = path_argmax(p21, par);
    bool anchor_only = am21.size() == 1 && p21.steps[am21[0]] == anchor;

    std::string fam_name = get_or<std::string>(b, "family", "refpath.", "P23");
    GateFamily fam;
    LatticePath p23;
    Configuration designated(cfg.lattice, Spin{2});
    try {
        fam = GateFamily::parse(fam_name);
        if (const Json* d = find(b, "designated")) {
            designated = Configuration::parse(cfg.lattice, d->get<std::string>());
        } else {
            FamilyEnumeration e = enumerate_family(fam, cfg.lattice, par, cfg.budgets.family_members);
            if (e.members.empty()) field_error("refpath.family", fam_name + " is empty on this lattice");
            designated = e.members.front();
        }
        p23 = steered_path_2_to_3(designated, fam, par);
    } catch (const Json::exception&) {
        field_error("refpath.designated", "must be a configuration string");
    } catch (const std::invalid_argument& e) {
        field_error("refpath.family", e.what());
    }
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < p23.steps.size(); ++i)
        if (gate_membership(p23.steps[i], fam, par).member) hits.push_back(i);
    bool meets_once = hits.size() == 1 && p23.steps[hits[0]] == designated;

    Json j = {{"model", model_json(cfg)},
              {"ell_star", dc.ell_star},
              {"gamma_star", dc.gamma_star},
              {"H2", h2},
              {"level", level},
              {"path_2_to_1",
               {{"steps", p21.steps.size()},
                {"valid", is_valid_path(p21)},
                {"height", p21.height},
                {"excess", p21.height - h2},
                {"exact", exact(p21.height)},
                {"anchor", anchor.str()},
                {"argmax", am21},
                {"argmax_is_anchor", anchor_only}}},
              {"path_2_to_3",
               {{"steps", p23.steps.size()},
                {"valid", is_valid_path(p23)},
                {"height", p23.height},
                {"excess", p23.height - h2},
                {"exact", exact(p23.height)},
                {"family", fam.name()},
                {"designated", designated.str()},
                {"family_hits", hits},
                {"meets_family_only_at_designated", meets_once}}}};
    art.json("refpath.json", j);
    art.csv("refpath_2_to_1.csv", path_csv(p21, par));
    art.csv("refpath_2_to_3.csv", path_csv(p23, par));
    bool ok = exact(p21.height) && exact(p23.height) && anchor_only && meets_once && is_valid_path(p21) && is_valid_path(p23);
    return art.commit(ok ? kExitOk : kExitAssertion, ok ? "both paths reach the barrier exactly" : "reference path check failed",
                      Json::object());
}

}  // namespace

Json parse_config_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        // nlohmann reports the byte offset; translate it to line and column.
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
    }
}

Json load_config_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void apply_override(Json& cfg, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    std::string key = assignment.substr(0, eq), value = assignment.substr(eq + 1);
    Json v;
    try {
        v = Json::parse(value);
    } catch (const Json::parse_error&) {
        v = value;
    }
    Json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        auto dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
        if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = v;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = Json::object();
        start = dot + 1;
    }
}

ExperimentConfig parse_config(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    c.raw = j;
    c.command = get_or<std::string>(j, "command", "", "");
    if (std::find(kCommands.begin(), kCommands.end(), c.command) == kCommands.end())
        field_error("command", "must be one of check, landscape, gates, simulate, spectral, refpath");
    const Json* model = find(j, "model");
    if (!model || !model->is_object()) field_error("model", "is required");
    int rows = get_or<int>(*model, "rows", "model.", 0), cols = get_or<int>(*model, "cols", "model.", 0);
    if (rows < 2 || cols < 2) field_error("model.rows/cols", "must both be at least 2");
    c.lattice = TorusLattice(rows, cols);
    c.params = parse_couplings(*model);
    c.seed = get_u64(j, "seed", "", 1);
    if (const Json* b = find(j, "budgets")) {
        c.budgets.states = get_u64(*b, "states", "budgets.", c.budgets.states);
        c.budgets.search_states = get_u64(*b, "search_states", "budgets.", c.budgets.search_states);
        c.budgets.saddle_expansions = get_u64(*b, "saddle_expansions", "budgets.", c.budgets.saddle_expansions);
        c.budgets.family_members = get_u64(*b, "family_members", "budgets.", c.budgets.family_members);
    }
    c.beta_grid = get_or<std::vector<double>>(j, "beta_grid", "", {});
    for (double b : c.beta_grid)
        if (!(b >= 0.0) || !std::isfinite(b)) field_error("beta_grid", "entries must be finite and non-negative");
    if (const Json* o = find(j, "output")) c.out_dir = get_or<std::string>(*o, "dir", "output.", "out");
    c.threads = get_or<int>(j, "threads", "", 1);
    if (c.threads < 1) field_error("threads", "must be positive");
    if (const Json* b = find(j, c.command)) {
        if (!b->is_object()) field_error(c.command, "must be an object");
        c.block = *b;
    }
    return c;
}

std::string config_hash(const Json& cfg) {
    // Output location and worker count do not change results.
    Json h = cfg;
    h.erase("output");
    h.erase("threads");
    return fnv1a(h.dump());
}

std::string version_string() { return POTTS_VERSION; }

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("fit_line needs two or more points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return f;
}

RunResult run(const ExperimentConfig& cfg) {
    if (cfg.command == "check") return cmd_check(cfg);
    if (cfg.command == "landscape") return cmd_landscape(cfg);
    if (cfg.command == "gates") return cmd_gates(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "spectral") return cmd_spectral(cfg);
    return cmd_refpath(cfg);
}

}  // namespace potts
