#include "potts/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <unordered_set>

namespace potts {

namespace {

double tol_at(double h) { return kEnergyTol * std::max(1.0, std::abs(h)); }
bool strictly_below(double a, double b) { return a < b && !energy_equal(a, b); }

template <class Graph>
struct SearchResult {
    SearchStatus status = SearchStatus::Undecided;
    double key = std::numeric_limits<double>::infinity();
    int target = -1;
    std::vector<typename Graph::Node> nodes;
    std::vector<int> parent;
    std::size_t visited = 0;
    bool budget_hit = false;

    std::vector<typename Graph::Node> trace() const {
        std::vector<typename Graph::Node> out;
        for (int id = target; id >= 0; id = parent[static_cast<std::size_t>(id)]) out.push_back(nodes[static_cast<std::size_t>(id)]);
        std::reverse(out.begin(), out.end());
        return out;
    }
};

// Best-first minimax search: a node's key is the highest energy on the best known
// path to it.  Ties are popped in node order, so witnesses are reproducible.
template <class Graph, class Target>
SearchResult<Graph> best_first(const Graph& g, const std::vector<typename Graph::Node>& sources, Target is_target,
                               std::size_t max_states) {
    using Node = typename Graph::Node;
    SearchResult<Graph> res;
    std::vector<double> energy;
    std::vector<double> best;
    std::vector<char> settled;
    std::unordered_map<Node, int> ids;
    bool pruned = false;
    bool budget_hit = false;

    auto cmp = [&](const std::pair<double, int>& a, const std::pair<double, int>& b) {
        if (a.first != b.first) return a.first > b.first;
        return res.nodes[static_cast<std::size_t>(b.second)] < res.nodes[static_cast<std::size_t>(a.second)];
    };
    std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>, decltype(cmp)> pq(cmp);

    auto add = [&](const Node& n, double h, double key, int parent) {
        int id = static_cast<int>(res.nodes.size());
        ids.emplace(n, id);
        res.nodes.push_back(n);
        res.parent.push_back(parent);
        energy.push_back(h);
        best.push_back(key);
        settled.push_back(0);
        pq.emplace(key, id);
    };

    for (const Node& s : sources) {
        if (ids.count(s)) continue;
        double h = g.energy(s);
        if (!g.admissible(h)) {
            pruned = true;
            continue;
        }
        add(s, h, h, -1);
    }
    std::vector<std::pair<Node, double>> nbrs;
    while (!pq.empty()) {
        auto [key, uid] = pq.top();
        pq.pop();
        auto u = static_cast<std::size_t>(uid);
        if (settled[u] || key > best[u]) continue;
        settled[u] = 1;
        ++res.visited;
        if (is_target(res.nodes[u], energy[u])) {
            res.status = SearchStatus::Decided;
            res.key = key;
            res.target = uid;
            return res;
        }
        nbrs.clear();
        g.expand(res.nodes[u], energy[u], nbrs);
        for (auto& [w, hw] : nbrs) {
            if (!g.admissible(hw)) {
                pruned = true;
                continue;
            }
            double nk = std::max(key, hw);
            auto it = ids.find(w);
            if (it == ids.end()) {
                if (res.nodes.size() >= max_states) {
                    budget_hit = true;
                    continue;
                }
                add(w, hw, nk, uid);
            } else {
                auto wid = static_cast<std::size_t>(it->second);
                if (!settled[wid] && nk < best[wid]) {
                    best[wid] = nk;
                    res.parent[wid] = uid;
                    pq.emplace(nk, it->second);
                }
            }
        }
    }
    res.budget_hit = budget_hit;
    res.status = (pruned || budget_hit) ? SearchStatus::Undecided : SearchStatus::Unreachable;
    return res;
}

struct IndexGraph {
    using Node = std::uint32_t;
    const EnumeratedSpace& space;
    double energy(Node n) const { return space.energy(n); }
    bool admissible(double) const { return true; }
    void expand(Node n, double, std::vector<std::pair<Node, double>>& out) const {
        space.for_each_neighbor(n, [&](std::uint32_t w) { out.emplace_back(w, space.energy(w)); });
    }
};

struct StringGraph {
    using Node = std::string;
    const TorusLattice& lattice;
    const CappedSpace& cs;

    double energy(const Node& n) const {
        return energy_gamma_form(Configuration::parse(lattice, n), cs.params);
    }
    bool admissible(double h) const {
        if (!std::isfinite(cs.cap)) return true;
        double t = tol_at(cs.cap);
        return cs.strict ? h < cs.cap - t : h <= cs.cap + t;
    }
    void expand(const Node& n, double, std::vector<std::pair<Node, double>>& out) const {
        Configuration sigma = Configuration::parse(lattice, n);
        EdgeCensus base = edge_census(sigma);
        for (int v = 0; v < lattice.size(); ++v) {
            for (Spin s : kSpins) {
                if (s == sigma[v]) continue;
                EdgeCensus c = base;
                census_apply_flip(c, sigma, v, s);
                std::string w = n;
                w[static_cast<std::size_t>(v)] = static_cast<char>('0' + s);
                out.emplace_back(std::move(w), energy_from_census(c, cs.params, lattice));
            }
        }
    }
};

LatticePath path_from_indices(const EnumeratedSpace& space, const std::vector<std::uint32_t>& idx) {
    LatticePath p;
    for (auto i : idx) {
        p.steps.push_back(space.config(i));
        p.height = std::max(p.height, space.energy(i));
    }
    return p;
}

LatticePath path_from_strings(const TorusLattice& lat, const CouplingParams& params, const std::vector<std::string>& keys) {
    std::vector<Configuration> steps;
    for (const auto& k : keys) steps.push_back(Configuration::parse(lat, k));
    return make_path(std::move(steps), params);
}

// Shortest circular interval covering the occupied positions: (start, length).
std::pair<int, int> circular_span(const std::vector<char>& occ) {
    int n = static_cast<int>(occ.size());
    int best_gap = 0;
    int best_end = -1;  // last index of the largest unoccupied run
    int run = 0;
    for (int i = 0; i < 2 * n; ++i) {
        if (!occ[static_cast<std::size_t>(i % n)]) {
            ++run;
            if (run > best_gap && run <= n) {
                best_gap = run;
                best_end = i % n;
            }
        } else {
            run = 0;
        }
    }
    if (best_gap == 0) return {0, n};
    return {(best_end + 1) % n, n - best_gap};
}

}  // namespace

Configuration project(const Configuration& sigma, Spin r, Spin s) {
    if (r == s) throw std::invalid_argument("projection needs two distinct spins");
    Configuration out = sigma;
    for (int v = 0; v < sigma.size(); ++v) {
        if (sigma[v] == r) out.set(v, s);
    }
    return out;
}

const char* to_string(TileClass t) {
    switch (t) {
        case TileClass::Unstable: return "unstable";
        case TileClass::StableNotStrict: return "stable";
        case TileClass::StrictlyStable: return "strictly-stable";
    }
    return "?";
}

TileClass classify_tile(const Configuration& sigma, int v) {
    auto counts = neighbor_counts(sigma, v);
    Spin c = sigma[v];
    if (c == 1) return counts[0] >= 2 ? TileClass::StrictlyStable : TileClass::Unstable;
    int same = counts[c - 1];
    int ones = counts[0];
    if (same >= 3) return TileClass::StrictlyStable;
    // Two 1-neighbors next to two r-neighbors make the flip to 1 strictly downhill.
    if (same == 2 && ones == 1) return TileClass::StrictlyStable;
    if (same == 2 && ones == 0) return TileClass::StableNotStrict;
    return TileClass::Unstable;
}

std::vector<Cluster> clusters(const Configuration& sigma, Spin r) {
    const TorusLattice& lat = sigma.lattice();
    std::vector<char> seen(static_cast<std::size_t>(lat.size()), 0);
    std::vector<Cluster> out;
    for (int start = 0; start < lat.size(); ++start) {
        if (sigma[start] != r || seen[static_cast<std::size_t>(start)]) continue;
        Cluster c;
        c.spin = r;
        std::deque<int> q{start};
        seen[static_cast<std::size_t>(start)] = 1;
        while (!q.empty()) {
            int v = q.front();
            q.pop_front();
            c.vertices.push_back(v);
            for (int w : lat.neighbors(v)) {
                if (sigma[w] == r && !seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    q.push_back(w);
                }
            }
        }
        std::sort(c.vertices.begin(), c.vertices.end());
        std::vector<char> rows(static_cast<std::size_t>(lat.rows()), 0);
        std::vector<char> cols(static_cast<std::size_t>(lat.cols()), 0);
        std::vector<char> in(static_cast<std::size_t>(lat.size()), 0);
        for (int v : c.vertices) {
            rows[static_cast<std::size_t>(lat.row(v))] = 1;
            cols[static_cast<std::size_t>(lat.col(v))] = 1;
            in[static_cast<std::size_t>(v)] = 1;
        }
        std::tie(c.row0, c.height) = circular_span(rows);
        std::tie(c.col0, c.width) = circular_span(cols);
        c.is_rectangle = static_cast<std::size_t>(c.height) * static_cast<std::size_t>(c.width) == c.vertices.size();
        c.is_strip = c.height == lat.rows() || c.width == lat.cols();
        std::vector<char> bd(static_cast<std::size_t>(lat.size()), 0);
        for (int v : c.vertices) {
            for (int w : lat.neighbors(v)) {
                if (!in[static_cast<std::size_t>(w)]) bd[static_cast<std::size_t>(w)] = 1;
            }
        }
        for (int v = 0; v < lat.size(); ++v) {
            if (bd[static_cast<std::size_t>(v)]) c.boundary.push_back(v);
        }
        out.push_back(std::move(c));
    }
    return out;
}

bool clusters_interact(const Configuration& sigma, const Cluster& a, const Cluster& b) {
    const TorusLattice& lat = sigma.lattice();
    std::vector<char> mark(static_cast<std::size_t>(lat.size()), 0);
    for (int v : a.vertices) mark[static_cast<std::size_t>(v)] |= 1;
    for (int v : b.vertices) mark[static_cast<std::size_t>(v)] |= 2;
    for (int v = 0; v < lat.size(); ++v) {
        if (mark[static_cast<std::size_t>(v)]) continue;
        int touch = 0;
        for (int w : lat.neighbors(v)) touch |= mark[static_cast<std::size_t>(w)];
        if (touch == 3) return true;
    }
    return false;
}

Bridges bridges(const Configuration& sigma, Spin r) {
    const TorusLattice& lat = sigma.lattice();
    Bridges b;
    for (int i = 0; i < lat.rows(); ++i) {
        bool all = true;
        for (int j = 0; j < lat.cols() && all; ++j) all = sigma[lat.index(i, j)] == r;
        if (all) b.rows.push_back(i);
    }
    for (int j = 0; j < lat.cols(); ++j) {
        bool all = true;
        for (int i = 0; i < lat.rows() && all; ++i) all = sigma[lat.index(i, j)] == r;
        if (all) b.cols.push_back(j);
    }
    b.has_cross = !b.rows.empty() && !b.cols.empty();
    return b;
}

LatticePath make_path(std::vector<Configuration> steps, const CouplingParams& params) {
    LatticePath p;
    p.steps = std::move(steps);
    for (const auto& s : p.steps) p.height = std::max(p.height, energy_gamma_form(s, params));
    return p;
}

bool is_valid_path(const LatticePath& path, bool allow_equal) {
    for (std::size_t i = 1; i < path.steps.size(); ++i) {
        const auto& a = path.steps[i - 1].spins();
        const auto& b = path.steps[i].spins();
        if (a.size() != b.size()) return false;
        std::size_t diff = 0;
        for (std::size_t k = 0; k < a.size(); ++k) diff += a[k] != b[k];
        if (diff > 1 || (diff == 0 && !allow_equal)) return false;
    }
    return true;
}

std::vector<std::size_t> path_argmax(const LatticePath& path, const CouplingParams& params) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        if (energy_equal(energy_gamma_form(path.steps[i], params), path.height)) out.push_back(i);
    }
    return out;
}

const char* to_string(SearchStatus s) {
    switch (s) {
        case SearchStatus::Decided: return "decided";
        case SearchStatus::Unreachable: return "unreachable";
        case SearchStatus::Undecided: return "undecided";
    }
    return "?";
}

CommHeight comm_height(const EnumeratedSpace& space, const std::vector<std::uint32_t>& A,
                       const std::vector<std::uint32_t>& B) {
    std::vector<char> inB(space.size(), 0);
    for (auto b : B) inB[b] = 1;
    IndexGraph g{space};
    auto res = best_first(g, A, [&](std::uint32_t n, double) { return inB[n] != 0; }, space.size());
    CommHeight out;
    out.status = res.status;
    out.states_visited = res.visited;
    if (res.status == SearchStatus::Decided) {
        out.phi = res.key;
        out.witness = path_from_indices(space, res.trace());
    }
    return out;
}

CommHeight comm_height(const Configuration& a, const Configuration& b, const EnumeratedSpace& space) {
    return comm_height(space, {space.index(a)}, {space.index(b)});
}

CommHeight comm_height(const Configuration& a, const Configuration& b, const CappedSpace& space) {
    const TorusLattice& lat = a.lattice();
    StringGraph g{lat, space};
    std::string target = b.str();
    CommHeight out;
    if (!g.admissible(g.energy(a.str())) || !g.admissible(g.energy(target))) {
        out.status = SearchStatus::Unreachable;
        return out;
    }
    auto res = best_first(g, {a.str()}, [&](const std::string& n, double) { return n == target; }, space.max_states);
    // Exhausting the admissible component settles the question relative to the cap.
    out.status = res.status == SearchStatus::Undecided && !res.budget_hit ? SearchStatus::Unreachable : res.status;
    out.states_visited = res.visited;
    if (res.status == SearchStatus::Decided) {
        out.phi = res.key;
        out.witness = path_from_strings(lat, space.params, res.trace());
    }
    return out;
}

StabilityLevel stability_level(const EnumeratedSpace& space, std::uint32_t idx) {
    double h0 = space.energy(idx);
    IndexGraph g{space};
    auto res = best_first(g, {idx}, [&](std::uint32_t, double h) { return strictly_below(h, h0); }, space.size());
    StabilityLevel out;
    out.status = res.status == SearchStatus::Undecided ? SearchStatus::Undecided : SearchStatus::Decided;
    if (res.status == SearchStatus::Decided) out.value = res.key - h0;
    return out;
}

StabilityLevel stability_level(const Configuration& sigma, const CappedSpace& space) {
    const TorusLattice& lat = sigma.lattice();
    double h0 = energy_gamma_form(sigma, space.params);
    StringGraph g{lat, space};
    auto res = best_first(g, {sigma.str()}, [&](const std::string&, double h) { return strictly_below(h, h0); },
                          space.max_states);
    StabilityLevel out;
    out.status = res.status == SearchStatus::Unreachable ? SearchStatus::Decided : res.status;
    if (res.status == SearchStatus::Decided) out.value = res.key - h0;
    return out;
}

std::vector<double> all_stability_levels(const EnumeratedSpace& space) {
    std::vector<double> out(space.size(), 0.0);
    for (std::uint32_t i = 0; i < space.size(); ++i) {
        double h0 = space.energy(i);
        bool downhill = false;
        space.for_each_neighbor(i, [&](std::uint32_t w) { downhill = downhill || strictly_below(space.energy(w), h0); });
        if (!downhill) out[i] = stability_level(space, i).value;
    }
    return out;
}

MinimaReport local_minima_and_plateaux(const EnumeratedSpace& space) {
    MinimaReport rep;
    std::uint32_t n = space.size();
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::uint32_t i = 0; i < n; ++i) {
        double h = space.energy(i);
        bool strict = true;
        space.for_each_neighbor(i, [&](std::uint32_t w) {
            double hw = space.energy(w);
            if (energy_equal(hw, h)) {
                strict = false;
                std::uint32_t a = find(i), b = find(w);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            } else if (hw < h) {
                strict = false;
            }
        });
        if (strict) rep.local_minima.push_back(i);
    }
    std::unordered_map<std::uint32_t, std::vector<std::uint32_t>> groups;
    for (std::uint32_t i = 0; i < n; ++i) {
        groups[find(i)].push_back(i);
    }
    std::vector<std::uint32_t> roots;
    for (auto& [root, members] : groups) {
        if (members.size() >= 2) roots.push_back(root);
    }
    std::sort(roots.begin(), roots.end());
    for (auto root : roots) {
        auto& members = groups[root];
        bool stable = true;
        for (auto m : members) {
            double h = space.energy(m);
            space.for_each_neighbor(m, [&](std::uint32_t w) {
                double hw = space.energy(w);
                if (!energy_equal(hw, h) && hw < h) stable = false;
            });
            if (!stable) break;
        }
        if (stable) {
            std::sort(members.begin(), members.end());
            rep.plateaux.push_back(members);
        }
    }
    return rep;
}

SaddleReport minimal_saddles(const EnumeratedSpace& space, const std::vector<std::uint32_t>& A,
                             const std::vector<std::uint32_t>& B, const SaddleOptions& opt) {
    SaddleReport rep;
    CommHeight ch = comm_height(space, A, B);
    if (ch.status != SearchStatus::Decided) return rep;
    double phi = ch.phi;
    rep.phi = phi;
    std::uint32_t n = space.size();
    auto at_level = [&](std::uint32_t i) { return energy_equal(space.energy(i), phi); };
    auto sublevel = [&](std::uint32_t i) { return space.energy(i) <= phi || at_level(i); };

    // Components of the sublevel set {H <= phi} seeded from A; keep those that also meet B.
    std::vector<int> comp(n, -1);
    std::vector<char> inB(n, 0);
    for (auto b : B) inB[b] = 1;
    std::vector<char> good;
    for (auto a : A) {
        if (comp[a] >= 0 || !sublevel(a)) continue;
        int id = static_cast<int>(good.size());
        good.push_back(0);
        std::deque<std::uint32_t> q{a};
        comp[a] = id;
        while (!q.empty()) {
            auto u = q.front();
            q.pop_front();
            if (inB[u]) good[static_cast<std::size_t>(id)] = 1;
            space.for_each_neighbor(u, [&](std::uint32_t w) {
                if (comp[w] < 0 && sublevel(w)) {
                    comp[w] = id;
                    q.push_back(w);
                }
            });
        }
    }
    auto kept = [&](std::uint32_t i) { return comp[i] >= 0 && good[static_cast<std::size_t>(comp[i])]; };
    for (std::uint32_t i = 0; i < n; ++i) {
        if (kept(i) && at_level(i)) rep.saddles.push_back(i);
    }
    rep.essential.assign(rep.saddles.size(), -1);
    if (!opt.essential || rep.saddles.empty()) return rep;

    // Reduced graph: valleys (components strictly below phi) and saddle states.
    std::vector<int> node(n, -1);
    int valleys = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!kept(i) || at_level(i) || node[i] >= 0) continue;
        std::deque<std::uint32_t> q{i};
        node[i] = valleys;
        while (!q.empty()) {
            auto u = q.front();
            q.pop_front();
            space.for_each_neighbor(u, [&](std::uint32_t w) {
                if (node[w] < 0 && kept(w) && !at_level(w)) {
                    node[w] = valleys;
                    q.push_back(w);
                }
            });
        }
        ++valleys;
    }
    int total = valleys + static_cast<int>(rep.saddles.size());
    for (std::size_t k = 0; k < rep.saddles.size(); ++k) node[rep.saddles[k]] = valleys + static_cast<int>(k);
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(total));
    for (std::size_t k = 0; k < rep.saddles.size(); ++k) {
        int sk = valleys + static_cast<int>(k);
        space.for_each_neighbor(rep.saddles[k], [&](std::uint32_t w) {
            if (node[w] >= 0 && kept(w)) {
                adj[static_cast<std::size_t>(sk)].push_back(node[w]);
                adj[static_cast<std::size_t>(node[w])].push_back(sk);
            }
        });
    }
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    std::vector<char> isA(static_cast<std::size_t>(total), 0), isB(static_cast<std::size_t>(total), 0);
    for (auto a : A) {
        if (node[a] >= 0 && kept(a)) isA[static_cast<std::size_t>(node[a])] = 1;
    }
    for (auto b : B) {
        if (node[b] >= 0 && kept(b)) isB[static_cast<std::size_t>(node[b])] = 1;
    }

    // True iff A and B connect using valleys and the allowed saddles only.
    std::vector<char> allowed(static_cast<std::size_t>(total), 0);
    auto connects = [&]() {
        std::vector<char> vis(static_cast<std::size_t>(total), 0);
        std::deque<int> q;
        for (int i = 0; i < total; ++i) {
            if (isA[static_cast<std::size_t>(i)] && (i < valleys || allowed[static_cast<std::size_t>(i)])) {
                vis[static_cast<std::size_t>(i)] = 1;
                q.push_back(i);
            }
        }
        while (!q.empty()) {
            int u = q.front();
            q.pop_front();
            if (isB[static_cast<std::size_t>(u)]) return true;
            for (int w : adj[static_cast<std::size_t>(u)]) {
                if (!vis[static_cast<std::size_t>(w)] && (w < valleys || allowed[static_cast<std::size_t>(w)])) {
                    vis[static_cast<std::size_t>(w)] = 1;
                    q.push_back(w);
                }
            }
        }
        return false;
    };

    std::size_t max_len = static_cast<std::size_t>(opt.length_multiple) * static_cast<std::size_t>(space.lattice().size());
    for (std::size_t k = 0; k < rep.saddles.size(); ++k) {
        int xi = valleys + static_cast<int>(k);
        std::vector<char> on_path(static_cast<std::size_t>(total), 0);
        std::fill(allowed.begin(), allowed.end(), 0);
        bool has_xi = false;
        bool truncated = false;
        std::size_t expansions = 0;
        // Simple paths in the reduced graph; a path whose saddles other than xi already
        // connect A to B is pruned, since extending it only adds saddles.
        std::function<bool(int, std::size_t)> dfs = [&](int u, std::size_t depth) -> bool {
            if (++expansions > opt.max_expansions) {
                truncated = true;
                return false;
            }
            on_path[static_cast<std::size_t>(u)] = 1;
            bool is_saddle = u >= valleys;
            if (is_saddle && u != xi) allowed[static_cast<std::size_t>(u)] = 1;
            if (u == xi) has_xi = true;
            bool found = false;
            if (!connects()) {
                if (has_xi && isB[static_cast<std::size_t>(u)]) {
                    found = true;
                } else if (depth < max_len) {
                    for (int w : adj[static_cast<std::size_t>(u)]) {
                        if (on_path[static_cast<std::size_t>(w)]) continue;
                        if (dfs(w, depth + 1)) {
                            found = true;
                            break;
                        }
                        if (truncated) break;
                    }
                } else {
                    truncated = true;
                }
            }
            on_path[static_cast<std::size_t>(u)] = 0;
            if (is_saddle && u != xi) allowed[static_cast<std::size_t>(u)] = 0;
            if (u == xi) has_xi = false;
            return found;
        };
        bool found = false;
        for (int s = 0; s < total && !found && !truncated; ++s) {
            if (isA[static_cast<std::size_t>(s)]) found = dfs(s, 1);
        }
        rep.expansions += expansions;
        rep.truncated = rep.truncated || truncated;
        rep.essential[k] = found ? 1 : (truncated ? -1 : 0);
    }
    return rep;
}

std::vector<std::string> CycleMembership::witness(const std::string& key) const {
    std::vector<std::string> out;
    auto it = parent.find(key);
    while (it != parent.end()) {
        out.push_back(it->first);
        if (it->second.empty()) break;
        it = parent.find(it->second);
    }
    std::reverse(out.begin(), out.end());
    return out;
}

CycleMembership initial_cycle(Spin r, const TorusLattice& lattice, const CouplingParams& params,
                              std::size_t max_states) {
    CycleMembership cyc;
    cyc.root = r;
    DerivedConstants dc = derive_constants(params);
    double h2 = -2.0 * lattice.size() * params.value(Pair::J22);
    cyc.cap = h2 + dc.gamma_star;
    CappedSpace cs{params, cyc.cap, true, max_states};
    StringGraph g{lattice, cs};
    std::string root = Configuration(lattice, r).str();
    if (!g.admissible(g.energy(root))) return cyc;
    std::deque<std::string> q{root};
    cyc.parent.emplace(root, "");
    std::vector<std::pair<std::string, double>> nbrs;
    while (!q.empty()) {
        std::string u = std::move(q.front());
        q.pop_front();
        nbrs.clear();
        g.expand(u, 0.0, nbrs);
        for (auto& [w, hw] : nbrs) {
            if (!g.admissible(hw) || cyc.parent.count(w)) continue;
            if (cyc.parent.size() >= max_states) {
                cyc.incomplete = true;
                continue;
            }
            cyc.parent.emplace(w, u);
            q.push_back(w);
        }
    }
    for (auto& [k, v] : cyc.parent) cyc.members.push_back(k);
    std::sort(cyc.members.begin(), cyc.members.end());
    return cyc;
}

namespace {

struct Walker {
    Configuration cur;
    const CouplingParams& params;
    double h0;
    double h;
    double top;
    std::vector<Configuration> steps;

    Walker(const Configuration& start, const CouplingParams& p)
        : cur(start), params(p), h0(energy_gamma_form(start, p)), h(h0), top(h0), steps{start} {}

    void flip(int v, Spin s) {
        if (cur[v] == s) return;
        cur.set(v, s);
        h = energy_gamma_form(cur, params);
        top = std::max(top, h);
        steps.push_back(cur);
    }
    bool lower() const { return strictly_below(h, h0); }
};

bool take_downhill(Walker& w) {
    for (int v = 0; v < w.cur.size(); ++v) {
        for (Spin s : kSpins) {
            if (s == w.cur[v]) continue;
            double d = energy_delta(w.cur, v, s, w.params);
            if (d < -tol_at(w.h)) {
                w.flip(v, s);
                return true;
            }
        }
    }
    return false;
}

// Clockwise spiral over a (possibly wrapped) box, starting at its upper-left cell.
std::vector<int> spiral(const TorusLattice& lat, int row0, int col0, int height, int width) {
    std::vector<int> out;
    int top = 0, bottom = height - 1, left = 0, right = width - 1;
    while (top <= bottom && left <= right) {
        for (int c = left; c <= right; ++c) out.push_back(lat.index(row0 + top, col0 + c));
        for (int r = top + 1; r <= bottom; ++r) out.push_back(lat.index(row0 + r, col0 + right));
        if (top < bottom) {
            for (int c = right - 1; c >= left; --c) out.push_back(lat.index(row0 + bottom, col0 + c));
        }
        if (left < right) {
            for (int r = bottom - 1; r > top; --r) out.push_back(lat.index(row0 + r, col0 + left));
        }
        ++top;
        --bottom;
        ++left;
        --right;
    }
    return out;
}

bool escape_with_ones(Walker& w, EscapeResult& res, int ell) {
    const TorusLattice& lat = w.cur.lattice();
    auto ones = clusters(w.cur, 1);
    const Cluster& c = ones.front();
    if (!c.is_rectangle) {
        res.rule = "non-rectangular 1-cluster";
        return false;
    }
    std::vector<int> cells;
    if (c.width >= ell && c.height < lat.rows()) {
        res.rule = "grow row along side of length " + std::to_string(c.width);
        for (int j = 0; j < c.width; ++j) cells.push_back(lat.index(c.row0 - 1, c.col0 + j));
        for (int v : cells) {
            w.flip(v, 1);
            if (w.lower()) return true;
        }
        return w.lower();
    }
    if (c.height >= ell && c.width < lat.cols()) {
        res.rule = "grow column along side of length " + std::to_string(c.height);
        for (int i = 0; i < c.height; ++i) cells.push_back(lat.index(c.row0 + i, c.col0 - 1));
        for (int v : cells) {
            w.flip(v, 1);
            if (w.lower()) return true;
        }
        return w.lower();
    }
    int votes2 = 0, votes3 = 0;
    for (int v : c.boundary) {
        votes2 += w.cur[v] == 2;
        votes3 += w.cur[v] == 3;
    }
    Spin r = votes3 > votes2 ? 3 : 2;
    res.rule = std::string("clockwise fill with spin ") + static_cast<char>('0' + r);
    for (int v : spiral(lat, c.row0, c.col0, c.height, c.width)) {
        w.flip(v, r);
        if (w.lower()) return true;
    }
    return w.lower();
}

bool escape_without_ones(Walker& w, EscapeResult& res) {
    const TorusLattice& lat = w.cur.lattice();
    std::size_t budget = static_cast<std::size_t>(lat.size()) * static_cast<std::size_t>(lat.size()) * 4;
    res.rule = "erode 2-3 configuration";
    for (std::size_t iter = 0; iter < budget; ++iter) {
        if (w.lower()) return true;
        if (take_downhill(w)) continue;
        // Flat 3 -> 2 flip at a concave corner of a 2-cluster.
        bool flipped = false;
        for (int v = 0; v < lat.size() && !flipped; ++v) {
            if (w.cur[v] != 3) continue;
            bool vert = w.cur[lat.up(v)] == 2 || w.cur[lat.down(v)] == 2;
            bool horiz = w.cur[lat.left(v)] == 2 || w.cur[lat.right(v)] == 2;
            auto counts = neighbor_counts(w.cur, v);
            if (vert && horiz && counts[1] == 2) {
                w.flip(v, 2);
                flipped = true;
            }
        }
        if (flipped) continue;
        // A non-wrapping 2-rectangle: turn its top row into 3s.
        for (const auto& c : clusters(w.cur, 2)) {
            if (c.is_rectangle && !c.is_strip) {
                for (int j = 0; j < c.width; ++j) w.flip(lat.index(c.row0, c.col0 + j), 3);
                flipped = true;
                break;
            }
        }
        if (flipped) continue;
        // Only strips remain: move a 3-bridge next to a 2-strip over to spin 2.
        auto b3 = bridges(w.cur, 3);
        auto b2 = bridges(w.cur, 2);
        auto has = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };
        for (int r : b3.rows) {
            int up = (r + lat.rows() - 1) % lat.rows(), dn = (r + 1) % lat.rows();
            if (has(b2.rows, up) || has(b2.rows, dn)) {
                for (int j = 0; j < lat.cols(); ++j) w.flip(lat.index(r, j), 2);
                flipped = true;
                break;
            }
        }
        if (flipped) continue;
        for (int c : b3.cols) {
            int lf = (c + lat.cols() - 1) % lat.cols(), rt = (c + 1) % lat.cols();
            if (has(b2.cols, lf) || has(b2.cols, rt)) {
                for (int i = 0; i < lat.rows(); ++i) w.flip(lat.index(i, c), 2);
                flipped = true;
                break;
            }
        }
        if (!flipped) {
            res.rule = "no erosion move";
            return false;
        }
    }
    return w.lower();
}

}  // namespace

EscapeResult escape_path(const Configuration& eta, const CouplingParams& params) {
    if (eta.is_monochromatic()) throw std::invalid_argument("escape path from a monochromatic state");
    Walker w(eta, params);
    EscapeResult res;
    if (take_downhill(w)) {
        res.rule = "downhill flip";
        res.reached_lower = true;
    } else if (eta.count(1) > 0) {
        res.reached_lower = escape_with_ones(w, res, derive_constants(params).ell_star);
    } else {
        res.reached_lower = escape_without_ones(w, res);
    }
    res.path.steps = std::move(w.steps);
    res.path.height = w.top;
    res.elevation = w.top - w.h0;
    return res;
}

}  // namespace potts
