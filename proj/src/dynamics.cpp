#include "potts/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>
#include <thread>

namespace potts {

AcceptanceTable::AcceptanceTable(const CouplingParams& params, double beta) : beta_(beta), delta_(params) {
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be nonnegative");
    for (Spin c : kSpins) {
        for (int a1 = 0; a1 <= 4; ++a1) {
            for (int a2 = 0; a1 + a2 <= 4; ++a2) {
                std::array<int, 3> counts{a1, a2, 4 - a1 - a2};
                int env = LocalDeltaTable::env_index(c, counts);
                double leave = 0.0;
                for (Spin s : kSpins) {
                    double a = 0.0;
                    if (s != c) {
                        double d = delta_(c, s, counts);
                        a = d <= 0.0 ? 1.0 : std::exp(-beta * d);
                        leave += a;
                    }
                    acc_[static_cast<std::size_t>(env)][s - 1] = a;
                }
                leave_[static_cast<std::size_t>(env)] = leave;
            }
        }
    }
}

ChainState::ChainState(Configuration start, const CouplingParams& params, Philox r)
    : sigma(std::move(start)), census(edge_census(sigma)), rng(r) {
    energy = energy_from_census(census, params, sigma.lattice());
}

void ChainState::apply_flip(int v, Spin s, const CouplingParams& params) {
    census_apply_flip(census, sigma, v, s);
    sigma.set(v, s);
    energy = energy_from_census(census, params, sigma.lattice());
}

bool step(ChainState& st, const AcceptanceTable& acc, const CouplingParams& params) {
    ++st.step;
    int n = st.sigma.size();
    auto k = static_cast<int>(st.rng.below(static_cast<std::uint64_t>(3 * n)));
    int v = k / 3;
    Spin s = static_cast<Spin>(k % 3 + 1);
    Spin c = st.sigma[v];
    if (s == c) return false;
    int env = LocalDeltaTable::env_index(c, neighbor_counts(st.sigma, v));
    double a = acc.accept(env, s);
    if (a < 1.0 && !(st.rng.uniform() < a)) return false;
    st.apply_flip(v, s, params);
    return true;
}

TargetFn target_monochromatic(std::vector<Spin> spins) {
    return [spins = std::move(spins)](const ChainState& st) {
        for (Spin s : spins) {
            if (st.census.spins(s) == st.sigma.size()) return true;
        }
        return false;
    };
}

namespace {

// Site classes by local environment for the rejection-free engine.  The total leaving
// weight is updated incrementally and recomputed exactly every few thousand moves.
class ClassIndex {
public:
    ClassIndex(const Configuration& sigma, const AcceptanceTable& acc)
        : acc_(acc), env_(static_cast<std::size_t>(sigma.size())), pos_(env_.size()) {
        for (int e = 0; e < LocalDeltaTable::kEnvCount; ++e) {
            if (acc.leave(e) > 0.0) active_.push_back(e);
        }
        for (int v = 0; v < sigma.size(); ++v) insert(v, env_of(sigma, v));
        refresh();
    }
    static int env_of(const Configuration& sigma, int v) {
        return LocalDeltaTable::env_index(sigma[v], neighbor_counts(sigma, v));
    }
    void update(const Configuration& sigma, int v) {
        int e = env_of(sigma, v);
        int old = env_[static_cast<std::size_t>(v)];
        if (e == old) return;
        remove(v);
        insert(v, e);
        total_ += acc_.leave(e) - acc_.leave(old);
    }
    void refresh() {
        total_ = 0.0;
        for (int e : active_) total_ += static_cast<double>(count(e)) * acc_.leave(e);
    }
    double total() const { return total_; }
    // Class holding the point u in [0, total), by a scan over the active classes.
    int select(double u) const {
        int chosen = -1;
        for (int e : active_) {
            double part = static_cast<double>(count(e)) * acc_.leave(e);
            if (part <= 0.0) continue;
            chosen = e;
            if (u < part) break;
            u -= part;
        }
        return chosen;
    }
    std::size_t count(int e) const { return members_[static_cast<std::size_t>(e)].size(); }
    int member(int e, std::size_t k) const { return members_[static_cast<std::size_t>(e)][k]; }

private:
    void insert(int v, int e) {
        auto& m = members_[static_cast<std::size_t>(e)];
        env_[static_cast<std::size_t>(v)] = e;
        pos_[static_cast<std::size_t>(v)] = static_cast<int>(m.size());
        m.push_back(v);
    }
    void remove(int v) {
        auto& m = members_[static_cast<std::size_t>(env_[static_cast<std::size_t>(v)])];
        int p = pos_[static_cast<std::size_t>(v)];
        int last = m.back();
        m[static_cast<std::size_t>(p)] = last;
        pos_[static_cast<std::size_t>(last)] = p;
        m.pop_back();
    }

    const AcceptanceTable& acc_;
    std::vector<int> env_;
    std::vector<int> pos_;
    std::vector<int> active_;
    std::array<std::vector<int>, LocalDeltaTable::kEnvCount> members_;
    double total_ = 0.0;
};

struct LevelWatch {
    const CouplingParams& params;
    double level21;
    double level23;
    double tol;
    int ell;
    int w_ones;
    std::set<int> region_sizes;

    LevelWatch(const CouplingParams& p, const TorusLattice& lat) : params(p) {
        DerivedConstants dc = derive_constants(p);
        double h2 = -2.0 * lat.size() * p.value(Pair::J22);
        level21 = h2 + dc.gamma_star;
        level23 = h2 + 2.0 * (lat.rows() + 1) * p.gamma23();
        tol = 1e-6 * std::abs(dc.gamma_star);
        ell = dc.ell_star;
        w_ones = ell * (ell - 1) + 1;
        if (lat.rows() <= lat.cols()) {
            for (const auto& t : family_templates(GateFamily::w23_union(), lat, ell)) {
                region_sizes.insert(t.a * t.b + (t.kind == RectDescriptor::Kind::R ? 0 : t.l));
            }
        }
    }
    bool at21(double h) const { return std::abs(h - level21) <= tol; }
    bool at23(double h) const { return std::abs(h - level23) <= tol; }

    GateClassification classify(const ChainState& st) const {
        auto n1 = st.census.spins(1), n2 = st.census.spins(2), n3 = st.census.spins(3);
        if (n1 == w_ones && (n2 == 0 || n3 == 0)) return classify_gate(st.sigma, params);
        if (n1 == 0 && (region_sizes.count(static_cast<int>(n2)) || region_sizes.count(static_cast<int>(n3)))) {
            return classify_gate(st.sigma, params);
        }
        return {};
    }
};

void observe(HittingRecord& rec, const ChainState& st, const LevelWatch* watch) {
    rec.max_energy = std::max(rec.max_energy, st.energy);
    if (!watch) return;
    bool at21 = watch->at21(st.energy);
    bool at23 = watch->at23(st.energy);
    if (!at21 && !at23) return;
    // Skip classification once nothing new can be learned from this state.
    bool ones = st.census.spins(1) > 0;
    bool need = (at21 && !rec.first_level_hit) || !rec.first_gate_hit || (ones ? !rec.visited_w_m1 : !rec.visited_w23);
    if (!need) return;
    GateClassification g = watch->classify(st);
    auto hit = [&]() { return GateHit{st.step, g.cls, g.family, st.sigma.str()}; };
    if (at21 && !rec.first_level_hit) rec.first_level_hit = hit();
    if (g.cls != GateClass::None) {
        if (!rec.first_gate_hit) rec.first_gate_hit = hit();
        if (g.cls == GateClass::W23) rec.visited_w23 = true;
        else rec.visited_w_m1 = true;
    }
}

}  // namespace

HittingRecord simulate_hitting(const Configuration& start, const TargetFn& target, const CouplingParams& params,
                               const HittingOptions& opt) {
    if (!(opt.beta > 0.0)) throw std::invalid_argument("beta must be positive");
    ChainState st(start, params, Philox(opt.seed, opt.stream));
    if (target(st)) throw std::invalid_argument("start configuration already lies in the target");
    AcceptanceTable acc(params, opt.beta);
    std::optional<LevelWatch> watch;
    if (opt.classify) watch.emplace(params, start.lattice());
    const LevelWatch* w = watch ? &*watch : nullptr;

    HittingRecord rec;
    rec.seed = opt.seed;
    rec.stream = opt.stream;
    rec.beta = opt.beta;
    rec.max_energy = st.energy;
    observe(rec, st, w);

    if (opt.engine == Engine::Metropolis) {
        while (st.step < opt.max_steps) {
            if (!step(st, acc, params)) continue;
            ++rec.moves;
            observe(rec, st, w);
            if (target(st)) {
                rec.tau = st.step;
                return rec;
            }
        }
        rec.tau = opt.max_steps;
        rec.censored = true;
        return rec;
    }

    // Rejection-free: geometric holding time, then a move drawn in proportion to its rate.
    ClassIndex classes(st.sigma, acc);
    const double proposals = 3.0 * st.sigma.size();
    const TorusLattice& lat = start.lattice();
    while (true) {
        if ((rec.moves & 4095) == 0) classes.refresh();
        double total = classes.total();
        double p_move = total / proposals;
        if (!(p_move > 0.0)) {
            rec.tau = opt.max_steps;
            rec.censored = true;
            return rec;
        }
        double hold = p_move >= 1.0 ? 1.0 : 1.0 + std::floor(std::log(st.rng.uniform_pos()) / std::log1p(-p_move));
        if (hold > static_cast<double>(opt.max_steps - st.step)) {
            rec.tau = opt.max_steps;
            rec.censored = true;
            st.step = opt.max_steps;
            return rec;
        }
        st.step += static_cast<std::int64_t>(hold);
        int chosen = classes.select(st.rng.uniform() * total);
        int v = classes.member(chosen, static_cast<std::size_t>(st.rng.below(classes.count(chosen))));
        Spin c = st.sigma[v];
        Spin s1 = c == 1 ? 2 : 1;
        Spin s2 = c == 3 ? 2 : 3;
        Spin s = st.rng.uniform() * acc.leave(chosen) < acc.accept(chosen, s1) ? s1 : s2;
        st.apply_flip(v, s, params);
        classes.update(st.sigma, v);
        for (int nb : lat.neighbors(v)) classes.update(st.sigma, nb);
        ++rec.moves;
        observe(rec, st, w);
        if (target(st)) {
            rec.tau = st.step;
            return rec;
        }
    }
}

std::vector<HittingRecord> hitting_replicas(const Configuration& start, const TargetFn& target,
                                            const CouplingParams& params, const HittingOptions& base, int replicas,
                                            int threads) {
    std::vector<HittingRecord> out(static_cast<std::size_t>(std::max(0, replicas)));
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int k = next++; k < replicas; k = next++) {
            HittingOptions o = base;
            o.stream = static_cast<std::uint64_t>(k);
            out[static_cast<std::size_t>(k)] = simulate_hitting(start, target, params, o);
        }
    };
    int n = std::max(1, std::min(threads, replicas));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return out;
}

std::optional<double> censored_median(const std::vector<HittingRecord>& recs) {
    if (recs.empty()) return std::nullopt;
    std::vector<double> t;
    std::size_t uncensored = 0;
    for (const auto& r : recs) {
        t.push_back(r.censored ? std::numeric_limits<double>::infinity() : static_cast<double>(r.tau));
        uncensored += !r.censored;
    }
    if (2 * uncensored <= recs.size()) return std::nullopt;
    std::sort(t.begin(), t.end());
    std::size_t n = t.size();
    return n % 2 ? t[n / 2] : 0.5 * (t[n / 2 - 1] + t[n / 2]);
}

std::vector<RecurrenceRow> recurrence_experiment(const CouplingParams& params, const TorusLattice& lat,
                                                 const RecurrenceOptions& opt) {
    DerivedConstants dc = derive_constants(params);
    double exponent_base = 2.0 * (dc.ell_star - 1) * (params.gamma23() + params.gamma1());
    std::vector<RecurrenceRow> rows;
    for (double beta : opt.betas) {
        RecurrenceRow row;
        row.beta = beta;
        row.bound = std::exp(beta * (exponent_base + opt.epsilon));
        std::int64_t cap = opt.max_steps;
        if (cap <= 0) {
            double twice = 2.0 * row.bound;
            cap = twice >= 9.0e18 ? std::numeric_limits<std::int64_t>::max() / 2 : static_cast<std::int64_t>(twice) + 1;
        }
        std::vector<Configuration> starts;
        for (int k = 0; k < opt.replicas; ++k) {
            Philox g(opt.seed ^ 0x5DEECE66DULL, static_cast<std::uint64_t>(k));
            std::vector<Spin> spins(static_cast<std::size_t>(lat.size()));
            for (auto& s : spins) s = static_cast<Spin>(1 + g.below(3));
            starts.emplace_back(lat, std::move(spins));
        }
        std::vector<HittingRecord> recs(starts.size());
        std::vector<char> excluded(starts.size(), 0);
        std::atomic<int> next{0};
        auto target = target_monochromatic({1, 2, 3});
        auto worker = [&]() {
            for (int k = next++; k < opt.replicas; k = next++) {
                auto idx = static_cast<std::size_t>(k);
                if (starts[idx].is_monochromatic()) {
                    excluded[idx] = 1;
                    continue;
                }
                HittingOptions o;
                o.beta = beta;
                o.max_steps = cap;
                o.seed = opt.seed;
                o.stream = static_cast<std::uint64_t>(k);
                o.classify = false;
                recs[idx] = simulate_hitting(starts[idx], target, params, o);
            }
        };
        int n = std::max(1, std::min(opt.threads, opt.replicas));
        std::vector<std::thread> pool;
        for (int t = 1; t < n; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        for (std::size_t k = 0; k < recs.size(); ++k) {
            if (excluded[k]) {
                ++row.excluded;
                continue;
            }
            ++row.replicas;
            const auto& r = recs[k];
            if (r.censored || static_cast<double>(r.tau) > row.bound) ++row.violations;
            row.max_tau = std::max(row.max_tau, r.tau);
            row.records.push_back(r);
        }
        row.median_tau = censored_median(row.records).value_or(std::numeric_limits<double>::infinity());
        rows.push_back(std::move(row));
    }
    return rows;
}

std::pair<double, double> Proportion::wilson(double z) const {
    if (total == 0) return {0.0, 1.0};
    double n = total;
    double p = value();
    double denom = 1.0 + z * z / n;
    double centre = (p + z * z / (2 * n)) / denom;
    double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

SplitReport transition_split_experiment(const CouplingParams& params, const TorusLattice& lat,
                                        const SplitOptions& opt) {
    HittingOptions base;
    base.beta = opt.beta;
    base.max_steps = opt.max_steps;
    base.seed = opt.seed;
    SplitReport rep;
    rep.records = hitting_replicas(Configuration(lat, 2), target_monochromatic({1}), params, base, opt.replicas,
                                   opt.threads);
    for (const auto& r : rep.records) {
        GateClass c = r.first_gate_hit ? r.first_gate_hit->cls : GateClass::None;
        if (c == GateClass::W21) {
            ++rep.direct.count;
        } else if (c == GateClass::W23) {
            ++rep.via_23.count;
        } else {
            ++rep.unclassified;
            continue;
        }
        ++rep.direct.total;
        ++rep.via_23.total;
    }
    return rep;
}

std::string records_csv(const std::vector<HittingRecord>& recs, bool header) {
    std::string out;
    if (header) {
        out += "seed,stream,beta,tau,censored,first_gate_family,max_energy,first_gate_class,first_gate_step,"
               "first_level_class,first_level_step,moves\n";
    }
    char buf[512];
    for (const auto& r : recs) {
        std::string gate_family = r.first_gate_hit ? "\"" + r.first_gate_hit->family + "\"" : "";
        std::string gate_class = r.first_gate_hit ? to_string(r.first_gate_hit->cls) : "";
        long long gate_step = r.first_gate_hit ? r.first_gate_hit->step : -1;
        std::string level_class = r.first_level_hit ? to_string(r.first_level_hit->cls) : "";
        long long level_step = r.first_level_hit ? r.first_level_hit->step : -1;
        std::snprintf(buf, sizeof buf, "%llu,%llu,%.17g,%lld,%d,%s,%.17g,%s,%lld,%s,%lld,%lld\n",
                      static_cast<unsigned long long>(r.seed), static_cast<unsigned long long>(r.stream), r.beta,
                      static_cast<long long>(r.tau), r.censored ? 1 : 0, gate_family.c_str(), r.max_energy,
                      gate_class.c_str(), gate_step, level_class.c_str(), level_step,
                      static_cast<long long>(r.moves));
        out += buf;
    }
    return out;
}

}  // namespace potts
