#include "potts/gates.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "potts/errors.hpp"

namespace potts {

namespace {

int wrap(int x, int n) { return ((x % n) + n) % n; }

RectDescriptor tmpl(RectDescriptor::Kind kind, int a, int b, int l, Spin r, Spin s, bool relaxed = false) {
    RectDescriptor d;
    d.kind = kind;
    d.a = a;
    d.b = b;
    d.l = l;
    d.r = r;
    d.s = s;
    d.relaxed = relaxed;
    return d;
}

// Side length the bar runs along, and the largest admissible bar length.
int bar_side(const RectDescriptor& d) { return d.kind == RectDescriptor::Kind::B ? d.b : d.a; }
int max_bar(const RectDescriptor& d) {
    int side = bar_side(d);
    return (d.relaxed && side == 1) ? 1 : side - 1;
}

bool shape_valid(const RectDescriptor& d, const TorusLattice& lat) {
    if (d.a < 1 || d.b < 1 || d.a > lat.cols() || d.b > lat.rows()) return false;
    switch (d.kind) {
        case RectDescriptor::Kind::R: return true;
        case RectDescriptor::Kind::B:
            return d.a + 1 <= lat.cols() && d.l >= 1 && d.l <= max_bar(d) && d.bar_offset >= 0 &&
                   d.bar_offset <= std::max(0, d.b - d.l);
        case RectDescriptor::Kind::HatB:
            return d.b + 1 <= lat.rows() && d.l >= 1 && d.l <= max_bar(d) && d.bar_offset >= 0 &&
                   d.bar_offset <= std::max(0, d.a - d.l);
    }
    return false;
}

// Every side/offset placement of a template, anchored at the origin.
std::vector<RectDescriptor> placements(const RectDescriptor& t, const TorusLattice& lat) {
    std::vector<RectDescriptor> out;
    if (t.kind == RectDescriptor::Kind::R) {
        if (shape_valid(t, lat)) out.push_back(t);
        return out;
    }
    int span = std::max(0, bar_side(t) - t.l);
    for (int side = 0; side < 2; ++side) {
        for (int off = 0; off <= span; ++off) {
            RectDescriptor d = t;
            d.side = side;
            d.bar_offset = off;
            if (shape_valid(d, lat)) out.push_back(d);
        }
    }
    return out;
}

Configuration transpose(const Configuration& sigma) {
    const TorusLattice& lat = sigma.lattice();
    TorusLattice t(lat.cols(), lat.rows());
    std::vector<Spin> spins(static_cast<std::size_t>(lat.size()));
    for (int v = 0; v < lat.size(); ++v) spins[static_cast<std::size_t>(t.index(lat.col(v), lat.row(v)))] = sigma[v];
    return Configuration(t, std::move(spins));
}

Configuration swap23(const Configuration& sigma) {
    Configuration out = sigma;
    for (int v = 0; v < sigma.size(); ++v) {
        if (sigma[v] == 2) out.set(v, 3);
        if (sigma[v] == 3) out.set(v, 2);
    }
    return out;
}

std::optional<RectDescriptor> match_template(const Configuration& sigma, const RectDescriptor& t,
                                             const std::vector<int>& region, const std::vector<char>& in_region) {
    const TorusLattice& lat = sigma.lattice();
    int s0 = region.front();
    for (const RectDescriptor& p : placements(t, lat)) {
        std::vector<int> cells = shape_cells(p, lat);
        if (cells.size() != region.size()) continue;
        for (int c : cells) {
            int dr = lat.row(s0) - lat.row(c);
            int dc = lat.col(s0) - lat.col(c);
            bool ok = true;
            for (int x : cells) {
                if (!in_region[static_cast<std::size_t>(lat.index(lat.row(x) + dr, lat.col(x) + dc))]) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                RectDescriptor d = p;
                d.row0 = wrap(p.row0 + dr, lat.rows());
                d.col0 = wrap(p.col0 + dc, lat.cols());
                return d;
            }
        }
    }
    return std::nullopt;
}

GateMatch match_family(const Configuration& sigma, const GateFamily& f, int ell) {
    GateMatch out;
    out.family = f;
    const TorusLattice& lat = sigma.lattice();
    if (f.kind == GateFamily::Kind::W23_union) {
        for (const GateFamily& c : w23_components(lat)) {
            GateMatch m = match_family(sigma, c, ell);
            if (m.member) return m;
        }
        return out;
    }
    auto templates = family_templates(f, lat, ell);
    if (templates.empty()) return out;
    Spin r = templates.front().r;
    Spin s = templates.front().s;
    std::vector<int> region;
    std::vector<char> in_region(static_cast<std::size_t>(lat.size()), 0);
    for (int v = 0; v < lat.size(); ++v) {
        if (sigma[v] == s) {
            region.push_back(v);
            in_region[static_cast<std::size_t>(v)] = 1;
        } else if (sigma[v] != r) {
            return out;
        }
    }
    if (region.empty()) return out;
    for (const auto& t : templates) {
        int size = t.a * t.b + (t.kind == RectDescriptor::Kind::R ? 0 : t.l);
        if (size != static_cast<int>(region.size())) continue;
        if (auto d = match_template(sigma, t, region, in_region)) {
            out.member = true;
            out.descriptor = *d;
            return out;
        }
    }
    return out;
}

}  // namespace

std::string RectDescriptor::str() const {
    std::string k = kind == Kind::R ? "R" : (kind == Kind::B ? "B" : "HatB");
    std::string out = k + "(" + std::to_string(a) + "x" + std::to_string(b);
    if (kind != Kind::R) out += ",l=" + std::to_string(l) + ",side=" + std::to_string(side) + ",off=" + std::to_string(bar_offset);
    out += ";" + std::to_string(int(r)) + "->" + std::to_string(int(s)) + "@" + std::to_string(row0) + "," + std::to_string(col0) + ")";
    return out;
}

std::vector<int> shape_cells(const RectDescriptor& d, const TorusLattice& lat) {
    if (!shape_valid(d, lat)) throw std::invalid_argument("shape does not fit the lattice: " + d.str());
    std::vector<int> cells;
    for (int i = 0; i < d.b; ++i) {
        for (int j = 0; j < d.a; ++j) cells.push_back(lat.index(d.row0 + i, d.col0 + j));
    }
    if (d.kind == RectDescriptor::Kind::B) {
        int col = d.side == 0 ? d.col0 - 1 : d.col0 + d.a;
        for (int t = 0; t < d.l; ++t) cells.push_back(lat.index(d.row0 + d.bar_offset + t, col));
    } else if (d.kind == RectDescriptor::Kind::HatB) {
        int row = d.side == 0 ? d.row0 - 1 : d.row0 + d.b;
        for (int t = 0; t < d.l; ++t) cells.push_back(lat.index(row, d.col0 + d.bar_offset + t));
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

Configuration realize(const RectDescriptor& d, const TorusLattice& lat) {
    Configuration sigma(lat, d.r);
    for (int v : shape_cells(d, lat)) sigma.set(v, d.s);
    return sigma;
}

GateFamily GateFamily::parse(const std::string& name) {
    auto pair = [&](const std::string& digits) -> std::pair<Spin, Spin> {
        if (digits == "23") return {2, 3};
        if (digits == "32") return {3, 2};
        throw ConfigError("unknown gate family '" + name + "'");
    };
    auto ints = [&](const std::string& text) {
        std::vector<int> out;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            std::size_t comma = text.find(',', pos);
            std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            try {
                std::size_t used = 0;
                out.push_back(std::stoi(part, &used));
                if (used != part.size()) throw std::invalid_argument(part);
            } catch (const std::exception&) {
                throw ConfigError("bad index list in gate family '" + name + "'");
            }
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        return out;
    };
    if (name == "W21") return w_m1(2);
    if (name == "W31") return w_m1(3);
    if (name == "Wp21") return wprime_m1(2);
    if (name == "Wp31") return wprime_m1(3);
    if (name == "23union") return w23_union();
    if (name.size() == 3 && name[0] == 'P') {
        auto [r, s] = pair(name.substr(1));
        return p(r, s);
    }
    if (name.size() == 3 && name[0] == 'Q') {
        auto [r, s] = pair(name.substr(1));
        return q(r, s);
    }
    if (name.rfind("Hi", 0) == 0 && name.size() > 5 && name[4] == ':') {
        auto [r, s] = pair(name.substr(2, 2));
        auto v = ints(name.substr(5));
        if (v.size() != 1) throw ConfigError("Hi family takes one index: '" + name + "'");
        return h_i(r, s, v[0]);
    }
    if (name.rfind("Wjh23:", 0) == 0) {
        auto v = ints(name.substr(6));
        if (v.size() != 2) throw ConfigError("Wjh family takes two indices: '" + name + "'");
        return w_jh(v[0], v[1]);
    }
    throw ConfigError("unknown gate family '" + name + "'");
}

std::string GateFamily::name() const {
    std::string rs = std::to_string(int(r)) + std::to_string(int(s));
    switch (kind) {
        case Kind::W_m1: return "W" + std::to_string(int(r)) + "1";
        case Kind::Wprime_m1: return "Wp" + std::to_string(int(r)) + "1";
        case Kind::P: return "P" + rs;
        case Kind::Q: return "Q" + rs;
        case Kind::H_i: return "Hi" + rs + ":" + std::to_string(i);
        case Kind::W_jh: return "Wjh23:" + std::to_string(j) + "," + std::to_string(h);
        case Kind::W23_union: return "23union";
    }
    return "?";
}

std::vector<RectDescriptor> family_templates(const GateFamily& f, const TorusLattice& lat, int ell) {
    using K_ = RectDescriptor::Kind;
    int K = lat.rows();
    int L = lat.cols();
    if (K > L) throw std::invalid_argument("gate families assume K <= L");
    bool square = K == L;
    std::vector<RectDescriptor> out;
    auto push = [&](RectDescriptor d) {
        if (d.a >= 1 && d.b >= 1 && d.l >= (d.kind == K_::R ? 0 : 1)) out.push_back(d);
    };
    auto check_pair = [&](Spin r, Spin s) {
        if (!((r == 2 && s == 3) || (r == 3 && s == 2))) throw std::invalid_argument("family needs (r,s) = (2,3) or (3,2)");
    };
    switch (f.kind) {
        case GateFamily::Kind::W_m1:
        case GateFamily::Kind::Wprime_m1: {
            if (f.r != 2 && f.r != 3) throw std::invalid_argument("m must be 2 or 3");
            if (ell < 2) return out;
            bool wrong = f.kind == GateFamily::Kind::Wprime_m1;
            if (!wrong) {
                push(tmpl(K_::B, ell - 1, ell, 1, f.r, 1));
                push(tmpl(K_::HatB, ell, ell - 1, 1, f.r, 1));
            } else {
                push(tmpl(K_::HatB, ell - 1, ell, 1, f.r, 1, true));
                push(tmpl(K_::B, ell, ell - 1, 1, f.r, 1, true));
            }
            break;
        }
        case GateFamily::Kind::P:
            check_pair(f.r, f.s);
            push(tmpl(K_::B, 1, K, K - 1, f.r, f.s));
            if (square) push(tmpl(K_::HatB, K, 1, K - 1, f.r, f.s));
            break;
        case GateFamily::Kind::Q:
            check_pair(f.r, f.s);
            push(tmpl(K_::R, 2, K - 1, 0, f.r, f.s));
            push(tmpl(K_::B, 1, K, K - 2, f.r, f.s));
            if (square) {
                push(tmpl(K_::R, K - 1, 2, 0, f.r, f.s));
                push(tmpl(K_::HatB, K, 1, K - 2, f.r, f.s));
            }
            break;
        case GateFamily::Kind::H_i:
            check_pair(f.r, f.s);
            if (f.i < 1 || f.i > K - 3) throw std::invalid_argument("H_i needs 1 <= i <= K-3");
            push(tmpl(K_::B, 1, K, f.i, f.r, f.s));
            for (int j = f.i + 1; j <= K - 2; ++j) push(tmpl(K_::B, 1, K - 1, j, f.r, f.s));
            if (square) {
                push(tmpl(K_::HatB, K, 1, f.i, f.r, f.s));
                for (int j = f.i + 1; j <= K - 2; ++j) push(tmpl(K_::HatB, K - 1, 1, j, f.r, f.s));
            }
            break;
        case GateFamily::Kind::W_jh:
            if (f.j < 2 || f.j > L - 3 || f.h < 1 || f.h > K - 1) {
                throw std::invalid_argument("W_j^h needs 2 <= j <= L-3 and 1 <= h <= K-1");
            }
            push(tmpl(K_::B, f.j, K, f.h, 2, 3));
            if (square) push(tmpl(K_::HatB, K, f.j, f.h, 2, 3));
            break;
        case GateFamily::Kind::W23_union:
            for (const auto& c : w23_components(lat)) {
                auto part = family_templates(c, lat, ell);
                out.insert(out.end(), part.begin(), part.end());
            }
            break;
    }
    return out;
}

std::vector<GateFamily> w23_components(const TorusLattice& lat) {
    int K = lat.rows();
    int L = lat.cols();
    std::vector<GateFamily> out;
    for (int i = 1; i <= K - 3; ++i) out.push_back(GateFamily::h_i(2, 3, i));
    out.push_back(GateFamily::q(2, 3));
    out.push_back(GateFamily::p(2, 3));
    for (int j = 2; j <= L - 3; ++j) {
        for (int h = 1; h <= K - 1; ++h) out.push_back(GateFamily::w_jh(j, h));
    }
    out.push_back(GateFamily::p(3, 2));
    out.push_back(GateFamily::q(3, 2));
    for (int i = 1; i <= K - 3; ++i) out.push_back(GateFamily::h_i(3, 2, i));
    return out;
}

GateMatch gate_membership(const Configuration& sigma, const GateFamily& f, const CouplingParams& params) {
    return match_family(sigma, f, derive_constants(params).ell_star);
}

FamilyEnumeration enumerate_family(const GateFamily& f, const TorusLattice& lat, const CouplingParams& params,
                                   std::size_t budget) {
    FamilyEnumeration out;
    int ell = derive_constants(params).ell_star;
    std::map<std::string, RectDescriptor> seen;
    for (const auto& t : family_templates(f, lat, ell)) {
        for (const auto& p : placements(t, lat)) {
            for (int r0 = 0; r0 < lat.rows(); ++r0) {
                for (int c0 = 0; c0 < lat.cols(); ++c0) {
                    RectDescriptor d = p;
                    d.row0 = r0;
                    d.col0 = c0;
                    std::string key = realize(d, lat).str();
                    if (seen.count(key)) continue;
                    if (seen.size() >= budget) {
                        out.truncated = true;
                        continue;
                    }
                    seen.emplace(std::move(key), d);
                }
            }
        }
    }
    for (auto& [key, d] : seen) {
        out.members.push_back(Configuration::parse(lat, key));
        out.descriptors.push_back(d);
    }
    return out;
}

const char* to_string(GateClass c) {
    switch (c) {
        case GateClass::None: return "none";
        case GateClass::W21: return "W21";
        case GateClass::W31: return "W31";
        case GateClass::W23: return "W23";
    }
    return "?";
}

GateClassification classify_gate(const Configuration& sigma, const CouplingParams& params) {
    GateClassification out;
    int ell = derive_constants(params).ell_star;
    int n1 = sigma.count(1), n2 = sigma.count(2), n3 = sigma.count(3);
    auto take = [&](GateClass cls, const GateMatch& m) {
        out.cls = cls;
        out.family = m.family.name();
        out.descriptor = m.descriptor.str();
    };
    if (n1 > 0 && (n2 == 0 || n3 == 0)) {
        Spin m = n2 > 0 ? 2 : 3;
        GateMatch g = match_family(sigma, GateFamily::w_m1(m), ell);
        if (g.member) take(m == 2 ? GateClass::W21 : GateClass::W31, g);
    } else if (n1 == 0 && n2 > 0 && n3 > 0) {
        GateMatch g = match_family(sigma, GateFamily::w23_union(), ell);
        if (g.member) take(GateClass::W23, g);
    }
    return out;
}

namespace {

struct PathBuilder {
    Configuration cur;
    std::vector<Configuration> steps;
    explicit PathBuilder(Configuration start) : cur(std::move(start)), steps{cur} {}
    void flip(int v, Spin s) {
        if (cur[v] == s) throw std::logic_error("path builder: repeated update");
        cur.set(v, s);
        steps.push_back(cur);
    }
};

struct Box {
    int row0, col0, cols, rows;
};

void add_column(PathBuilder& pb, const TorusLattice& lat, Box& bx, int col, Spin s) {
    for (int t = 0; t < bx.rows; ++t) pb.flip(lat.index(bx.row0 + t, col), s);
}
void add_row(PathBuilder& pb, const TorusLattice& lat, Box& bx, int row, Spin s) {
    for (int t = 0; t < bx.cols; ++t) pb.flip(lat.index(row, bx.col0 + t), s);
}

// Quasi-square growth of a 1-rectangle from its upper-left cell up to cols x rows.
void grow_box(PathBuilder& pb, const TorusLattice& lat, Box& bx, int cols, int rows) {
    if (bx.cols == 0) {
        pb.flip(lat.index(bx.row0, bx.col0), 1);
        bx.cols = bx.rows = 1;
    }
    while (bx.cols < cols || bx.rows < rows) {
        if (bx.cols < cols && (bx.cols <= bx.rows || bx.rows == rows)) {
            add_column(pb, lat, bx, bx.col0 + bx.cols, 1);
            ++bx.cols;
        } else {
            add_row(pb, lat, bx, bx.row0 + bx.rows, 1);
            ++bx.rows;
        }
    }
}

void check_sweep(const std::vector<int>& order, int n) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    if (static_cast<int>(order.size()) != n) throw std::invalid_argument("sweep must list every line once");
    for (std::size_t k = 0; k < order.size(); ++k) {
        int c = order[k];
        if (c < 0 || c >= n || seen[static_cast<std::size_t>(c)]) throw std::invalid_argument("sweep must list every line once");
        seen[static_cast<std::size_t>(c)] = 1;
        if (k > 0) {
            int d = wrap(c - order[k - 1], n);
            if (d != 1 && d != n - 1) throw std::invalid_argument("consecutive sweep lines must be adjacent");
        }
    }
}

// Flip order of a normalized family member (sea 2, region 3, column orientation).
std::vector<int> steer_order(const Configuration& sigma, const RectDescriptor& d) {
    const TorusLattice& lat = sigma.lattice();
    int K = lat.rows();
    int L = lat.cols();
    std::vector<int> order;
    std::vector<char> done(static_cast<std::size_t>(lat.size()), 0);
    auto put = [&](int r, int c) {
        int v = lat.index(r, c);
        if (!done[static_cast<std::size_t>(v)]) {
            done[static_cast<std::size_t>(v)] = 1;
            order.push_back(v);
        }
    };
    auto column = [&](int c, int start) {
        for (int t = 0; t < K; ++t) put(start + t, c);
    };
    int dir = 1;
    int last = 0;
    if (d.kind == RectDescriptor::Kind::B && d.b == K) {
        // Strip of a columns plus a bar in the next column.
        dir = d.side == 1 ? 1 : -1;
        int first = d.side == 1 ? d.col0 : d.col0 + d.a - 1;
        for (int k = 0; k < d.a; ++k) column(first + dir * k, 0);
        last = first + dir * d.a;
        column(last, d.row0 + d.bar_offset);
    } else if (d.kind == RectDescriptor::Kind::R) {
        int c0 = d.col0, r0 = d.row0;
        for (int t = 0; t < d.b; ++t) put(r0 + t, c0);
        for (int t = 0; t < d.b; ++t) put(r0 + t, c0 + 1);
        column(c0, r0);
        column(c0 + 1, r0);
        last = c0 + 1;
    } else {
        // 1 x (K-1) column with a bar beside it: bar first, then the column alongside.
        int A = d.col0, r0 = d.row0, off = d.bar_offset;
        dir = d.side == 1 ? 1 : -1;
        int Bc = A + dir;
        for (int t = 0; t < d.l; ++t) put(r0 + off + t, Bc);
        for (int t = 0; t < d.l; ++t) put(r0 + off + t, A);
        for (int t = off + d.l; t < d.b; ++t) put(r0 + t, A);
        for (int t = off - 1; t >= 0; --t) put(r0 + t, A);
        column(A, r0);
        column(Bc, r0 + off + d.l);
        last = Bc;
    }
    for (int k = 1; static_cast<int>(order.size()) < lat.size() && k <= L; ++k) column(last + dir * k, 0);
    return order;
}

}  // namespace

LatticePath reference_path_m_to_1(Spin m, const Configuration& anchor, const CouplingParams& params) {
    const TorusLattice& lat = anchor.lattice();
    GateMatch g = gate_membership(anchor, GateFamily::w_m1(m), params);
    if (!g.member) throw std::invalid_argument("anchor is not in W(m,1)");
    const RectDescriptor& d = g.descriptor;
    PathBuilder pb(Configuration(lat, m));
    Box bx{d.row0, d.col0, 0, 0};
    grow_box(pb, lat, bx, d.a, d.b);
    // Protuberance, then the rest of its bar.
    std::vector<int> bar;
    int along = d.kind == RectDescriptor::Kind::B ? d.b : d.a;
    auto bar_cell = [&](int t) {
        if (d.kind == RectDescriptor::Kind::B) {
            return lat.index(d.row0 + t, d.side == 0 ? d.col0 - 1 : d.col0 + d.a);
        }
        return lat.index(d.side == 0 ? d.row0 - 1 : d.row0 + d.b, d.col0 + t);
    };
    pb.flip(bar_cell(d.bar_offset), 1);
    if (!(pb.cur == anchor)) throw std::logic_error("reference path missed its anchor");
    for (int t = d.bar_offset + 1; t < along; ++t) pb.flip(bar_cell(t), 1);
    for (int t = d.bar_offset - 1; t >= 0; --t) pb.flip(bar_cell(t), 1);
    if (d.kind == RectDescriptor::Kind::B) {
        if (d.side == 0) --bx.col0;
        ++bx.cols;
    } else {
        if (d.side == 0) --bx.row0;
        ++bx.rows;
    }
    bx.row0 = wrap(bx.row0, lat.rows());
    bx.col0 = wrap(bx.col0, lat.cols());
    grow_box(pb, lat, bx, lat.cols(), lat.rows());
    return make_path(std::move(pb.steps), params);
}

ColumnSweep default_sweep(const TorusLattice& lat) {
    ColumnSweep s;
    for (int c = 0; c < lat.cols(); ++c) s.columns.push_back(c);
    return s;
}

LatticePath reference_path_2_to_3(const ColumnSweep& sweep, const TorusLattice& lat, const CouplingParams& params) {
    if (sweep.rows_instead && lat.rows() != lat.cols()) throw std::invalid_argument("row sweeps need K = L");
    int lines = sweep.rows_instead ? lat.rows() : lat.cols();
    int along = sweep.rows_instead ? lat.cols() : lat.rows();
    check_sweep(sweep.columns, lines);
    if (!sweep.start_rows.empty() && static_cast<int>(sweep.start_rows.size()) != lines) {
        throw std::invalid_argument("start_rows must be empty or list one row per column");
    }
    PathBuilder pb(Configuration(lat, 2));
    for (std::size_t k = 0; k < sweep.columns.size(); ++k) {
        int c = sweep.columns[k];
        int start = sweep.start_rows.empty() ? 0 : sweep.start_rows[k];
        for (int t = 0; t < along; ++t) {
            int p = sweep.upward ? start - t : start + t;
            pb.flip(sweep.rows_instead ? lat.index(c, p) : lat.index(p, c), 3);
        }
    }
    return make_path(std::move(pb.steps), params);
}

LatticePath steered_path_2_to_3(const Configuration& sigma, const GateFamily& f, const CouplingParams& params) {
    GateMatch g = gate_membership(sigma, f, params);
    if (!g.member) throw std::invalid_argument("configuration is not in family " + f.name());
    const TorusLattice& lat = sigma.lattice();
    const RectDescriptor& d = g.descriptor;
    bool swapped = d.r == 3;
    bool transposed = d.kind == RectDescriptor::Kind::HatB ||
                      (d.kind == RectDescriptor::Kind::R && !(d.a == 2 && d.b == lat.rows() - 1));
    Configuration norm = sigma;
    if (swapped) norm = swap23(norm);
    if (transposed) norm = transpose(norm);
    // Re-match in normalized orientation against the column templates only.
    GateFamily nf = g.family;
    if (nf.kind != GateFamily::Kind::W_jh) {
        nf.r = 2;
        nf.s = 3;
    }
    int ell = derive_constants(params).ell_star;
    std::vector<int> region;
    std::vector<char> in_region(static_cast<std::size_t>(lat.size()), 0);
    for (int v = 0; v < norm.size(); ++v) {
        if (norm[v] == 3) {
            region.push_back(v);
            in_region[static_cast<std::size_t>(v)] = 1;
        }
    }
    std::optional<RectDescriptor> nd;
    for (const auto& t : family_templates(nf, norm.lattice(), ell)) {
        bool column_form = t.kind == RectDescriptor::Kind::B ||
                           (t.kind == RectDescriptor::Kind::R && t.a == 2 && t.b == lat.rows() - 1);
        if (!column_form) continue;
        if ((nd = match_template(norm, t, region, in_region))) break;
    }
    if (!nd) throw std::logic_error("normalized member lost its family");
    std::vector<int> order = steer_order(norm, *nd);
    PathBuilder pb(Configuration(norm.lattice(), 2));
    for (int v : order) pb.flip(v, 3);
    std::vector<Configuration> steps;
    steps.reserve(pb.steps.size());
    for (auto& c : pb.steps) {
        Configuration x = transposed ? transpose(c) : c;
        steps.push_back(swapped ? swap23(x) : x);
    }
    if (swapped) std::reverse(steps.begin(), steps.end());
    return make_path(std::move(steps), params);
}

SliceReport critical_slice_check(const CouplingParams& params, const TorusLattice& lattice, const SliceOptions& opt) {
    SliceReport rep;
    DerivedConstants dc = derive_constants(params);
    int ell = dc.ell_star;
    int w = opt.window > 0 ? opt.window : ell + 1;
    if (w > lattice.rows() || w > lattice.cols()) throw std::invalid_argument("slice window larger than the lattice");
    rep.ones = ell * (ell - 1) + 1;
    double h2 = -2.0 * lattice.size() * params.value(Pair::J22);
    double level = h2 + dc.gamma_star;
    double tol = kEnergyTol * std::max(1.0, std::abs(level));
    std::mt19937_64 rng(opt.seed);

    // Cells near the window get random {2,3} noise in the mixed fillings.
    std::vector<int> halo;
    for (int i = -1; i <= w; ++i) {
        for (int j = -1; j <= w; ++j) halo.push_back(lattice.index(i, j));
    }
    std::sort(halo.begin(), halo.end());
    halo.erase(std::unique(halo.begin(), halo.end()), halo.end());

    auto evaluate = [&](const Configuration& eta) {
        ++rep.checked;
        double excess = energy_gamma_form(eta, params) - level;
        rep.min_excess = std::min(rep.min_excess, excess);
        bool at = std::abs(excess) <= tol;
        bool member = false;
        for (Spin m : {Spin{2}, Spin{3}}) {
            member = member || match_family(eta, GateFamily::w_m1(m), ell).member ||
                     match_family(eta, GateFamily::wprime_m1(m), ell).member;
        }
        if (at) ++rep.at_level;
        if (member) ++rep.gate_members;
        if (excess < -tol) ++rep.below_level;
        if (at && !member) ++rep.level_nonmembers;
        if (member && !at) ++rep.members_off_level;
    };

    int cells = w * w;
    std::vector<int> pick(static_cast<std::size_t>(rep.ones));
    for (int k = 0; k < rep.ones; ++k) pick[static_cast<std::size_t>(k)] = k;
    if (rep.ones > cells) return rep;
    while (true) {
        std::vector<int> ones;
        for (int k : pick) ones.push_back(lattice.index(k / w, k % w));
        for (int fill = -2; fill < opt.random_fills; ++fill) {
            if (rep.checked >= opt.max_configs) {
                rep.truncated = true;
                return rep;
            }
            Spin sea = fill == -2 ? 2 : (fill == -1 ? 3 : static_cast<Spin>(2 + (rng() & 1)));
            Configuration eta(lattice, sea);
            if (fill >= 0) {
                for (int v : halo) eta.set(v, static_cast<Spin>(2 + (rng() & 1)));
            }
            for (int v : ones) eta.set(v, 1);
            evaluate(eta);
        }
        // Next combination in lexicographic order.
        int k = rep.ones - 1;
        while (k >= 0 && pick[static_cast<std::size_t>(k)] == cells - rep.ones + k) --k;
        if (k < 0) break;
        ++pick[static_cast<std::size_t>(k)];
        for (int t = k + 1; t < rep.ones; ++t) pick[static_cast<std::size_t>(t)] = pick[static_cast<std::size_t>(t) - 1] + 1;
    }
    return rep;
}

}  // namespace potts
