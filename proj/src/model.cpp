#include "potts/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace potts {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t out;
    if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("rational overflow");
    return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t out;
    if (__builtin_add_overflow(a, b, &out)) throw std::overflow_error("rational overflow");
    return out;
}

}  // namespace

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (d == 0) throw std::invalid_argument("rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational Rational::parse(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    auto parse_int = [](std::string_view s) -> std::int64_t {
        if (s.empty()) throw std::invalid_argument("empty integer");
        std::size_t i = 0;
        bool neg = false;
        if (s[0] == '-' || s[0] == '+') {
            neg = s[0] == '-';
            i = 1;
        }
        if (i == s.size()) throw std::invalid_argument("bad integer");
        std::int64_t v = 0;
        for (; i < s.size(); ++i) {
            if (!std::isdigit(static_cast<unsigned char>(s[i]))) throw std::invalid_argument("bad integer");
            v = checked_add(checked_mul(v, 10), s[i] - '0');
        }
        return neg ? -v : v;
    };
    text = trim(text);
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        return Rational(parse_int(trim(text.substr(0, slash))), parse_int(trim(text.substr(slash + 1))));
    }
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
        std::string digits(text.substr(0, dot));
        std::string frac(text.substr(dot + 1));
        if (frac.empty() || frac.size() > 15) throw std::invalid_argument("bad decimal");
        std::int64_t scale = 1;
        for (std::size_t i = 0; i < frac.size(); ++i) scale *= 10;
        bool neg = !digits.empty() && digits[0] == '-';
        std::string whole = digits;
        if (whole == "-" || whole == "+" || whole.empty()) whole += "0";
        std::int64_t w = parse_int(whole);
        std::int64_t f = parse_int(frac);
        std::int64_t n = checked_add(checked_mul(w < 0 ? -w : w, scale), f);
        return Rational(neg ? -n : n, scale);
    }
    return Rational(parse_int(text));
}

std::int64_t Rational::ceil() const {
    std::int64_t q = num / den;
    if (num % den != 0 && num > 0) ++q;
    return q;
}

std::string Rational::str() const {
    return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
}

Rational operator+(const Rational& a, const Rational& b) {
    return Rational(checked_add(checked_mul(a.num, b.den), checked_mul(b.num, a.den)), checked_mul(a.den, b.den));
}
Rational operator-(const Rational& a, const Rational& b) { return a + Rational(-b.num, b.den); }
Rational operator*(const Rational& a, const Rational& b) {
    return Rational(checked_mul(a.num, b.num), checked_mul(a.den, b.den));
}
Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw std::domain_error("rational division by zero");
    return Rational(checked_mul(a.num, b.den), checked_mul(a.den, b.num));
}
bool operator<(const Rational& a, const Rational& b) {
    return checked_mul(a.num, b.den) < checked_mul(b.num, a.den);
}

TorusLattice::TorusLattice(int K, int L) : K_(K), L_(L) {
    // K = 1 or L = 1 would turn vertical or horizontal edges into self-loops.
    if (K < 2 || L < 2) throw std::invalid_argument("torus needs K >= 2 and L >= 2");
}

int TorusLattice::index(int r, int c) const {
    r %= K_;
    c %= L_;
    if (r < 0) r += K_;
    if (c < 0) c += L_;
    return r * L_ + c;
}

CouplingParams::CouplingParams(const std::array<double, 6>& J) : J_(J) {
    validate();
    build_bonds();
}

CouplingParams::CouplingParams(const std::array<Rational, 6>& J) : exact_(J) {
    for (int i = 0; i < 6; ++i) J_[i] = J[i].to_double();
    validate();
    build_bonds();
}

CouplingParams CouplingParams::from_gammas(double gamma1, double gamma12, double gamma23, double j22) {
    return CouplingParams(std::array<double, 6>{gamma1 + j22, j22, j22, gamma12 - j22, gamma12 - j22, gamma23 - j22});
}

CouplingParams CouplingParams::from_gammas(const Rational& gamma1, const Rational& gamma12,
                                           const Rational& gamma23, const Rational& j22) {
    return CouplingParams(
        std::array<Rational, 6>{gamma1 + j22, j22, j22, gamma12 - j22, gamma12 - j22, gamma23 - j22});
}

void CouplingParams::validate() const {
    for (double j : J_) {
        if (!(j > 0.0) || !std::isfinite(j)) throw std::invalid_argument("couplings must be positive and finite");
    }
    bool equal22_33 = exact_ ? (*exact_)[1] == (*exact_)[2] : J_[1] == J_[2];
    bool equal12_13 = exact_ ? (*exact_)[3] == (*exact_)[4] : J_[3] == J_[4];
    if (!equal22_33) throw std::invalid_argument("J22 must equal J33");
    if (!equal12_13) throw std::invalid_argument("J12 must equal J13");
    if (!(J_[0] > J_[1])) throw std::invalid_argument("J11 must exceed J22");
}

void CouplingParams::build_bonds() {
    for (Spin a : kSpins) {
        for (Spin b : kSpins) bond_[a][b] = a == b ? -J(a, a) : J(a, b);
    }
}

double CouplingParams::J(Spin a, Spin b) const {
    if (a > b) std::swap(a, b);
    if (a == b) return J_[a - 1];
    if (a == 1) return b == 2 ? J_[3] : J_[4];
    return J_[5];
}

std::optional<Rational> CouplingParams::gamma1_exact() const {
    if (!exact_) return std::nullopt;
    return (*exact_)[0] - (*exact_)[1];
}
std::optional<Rational> CouplingParams::gamma12_exact() const {
    if (!exact_) return std::nullopt;
    return (*exact_)[3] + (*exact_)[1];
}
std::optional<Rational> CouplingParams::gamma23_exact() const {
    if (!exact_) return std::nullopt;
    return (*exact_)[5] + (*exact_)[1];
}

double f_h(double h, double x) {
    if (!(h > 0.0) || !(x > 0.0)) throw std::domain_error("f_h needs h > 0 and x > 0");
    double c = std::ceil((x + h / 2) / h);
    return 4 * (x + h / 2) * c - 2 * h * (c * c - c + 1);
}

DerivedConstants derive_constants(const CouplingParams& params) {
    DerivedConstants out;
    double g1 = params.gamma1();
    double g12 = params.gamma12();
    out.ratio = (2 * g12 + g1) / (2 * g1);
    if (auto e1 = params.gamma1_exact()) {
        Rational e12 = *params.gamma12_exact();
        Rational ratio = (Rational(2) * e12 + *e1) / (Rational(2) * *e1);
        out.ratio_exact = ratio;
        out.ell_star = static_cast<int>(ratio.ceil());
        Rational l(out.ell_star);
        out.gamma_star_exact = Rational(4) * l * e12 - Rational(2) * *e1 * (l * l - Rational(2) * l + Rational(1));
    } else {
        // Guard band: a ratio within 1e-9 of an integer is that integer.
        double nearest = std::round(out.ratio);
        out.ell_star = static_cast<int>(std::abs(out.ratio - nearest) <= 1e-9 ? nearest : std::ceil(out.ratio));
    }
    double l = out.ell_star;
    out.gamma_star = out.gamma_star_exact ? out.gamma_star_exact->to_double()
                                          : 4 * l * g12 - 2 * g1 * (l * l - 2 * l + 1);
    return out;
}

AssumptionReport check_assumptions(const CouplingParams& params, const TorusLattice& lattice, double tol) {
    AssumptionReport rep;
    DerivedConstants dc = derive_constants(params);
    int K = std::min(lattice.rows(), lattice.cols());
    double g1 = params.gamma1();
    double g12 = params.gamma12();
    double g23 = params.gamma23();

    rep.condA_value = dc.ratio;
    rep.condB_residual = f_h(g1, g12) - 2.0 * (K + 1) * g23;
    rep.condC_slack = 2 * g12 - 4 * g23 - g1;
    if (dc.ratio_exact) {
        rep.exact = true;
        Rational e1 = *params.gamma1_exact();
        Rational e23 = *params.gamma23_exact();
        Rational e12 = *params.gamma12_exact();
        rep.condA = !dc.ratio_exact->is_integer();
        Rational residual = *dc.gamma_star_exact - Rational(2 * (K + 1)) * e23;
        rep.condB = residual.num == 0;
        rep.condB_residual = residual.to_double();
        Rational slack = Rational(2) * e12 - Rational(4) * e23 - e1;
        rep.condC = Rational(0) <= slack;
        rep.condC_slack = slack.to_double();
    } else {
        rep.condA = std::abs(dc.ratio - std::round(dc.ratio)) > tol;
        rep.condB = std::abs(rep.condB_residual) <= tol * std::max(1.0, std::abs(dc.gamma_star));
        rep.condC = rep.condC_slack >= -tol * std::max(1.0, 2 * g12);
    }
    double l = dc.ell_star;
    double area = static_cast<double>(lattice.size()) - l * l;
    rep.margin_lhs = area > 0 ? 2 * std::sqrt(area) - 2 * l : -2 * l;
    rep.margin_rhs = 2 * l - 1;
    rep.lattice_margin = area > 0 && rep.margin_lhs >= rep.margin_rhs && K >= 2 * dc.ell_star + 2;
    return rep;
}

Configuration::Configuration(const TorusLattice& lattice, Spin fill)
    : lattice_(lattice), spins_(static_cast<std::size_t>(lattice.size()), fill) {
    if (fill < 1 || fill > 3) throw std::invalid_argument("spin must be 1, 2 or 3");
}

Configuration::Configuration(const TorusLattice& lattice, std::vector<Spin> spins)
    : lattice_(lattice), spins_(std::move(spins)) {
    if (static_cast<int>(spins_.size()) != lattice.size()) throw std::invalid_argument("spin array size mismatch");
    for (Spin s : spins_) {
        if (s < 1 || s > 3) throw std::invalid_argument("spin must be 1, 2 or 3");
    }
}

Configuration Configuration::parse(const TorusLattice& lattice, std::string_view digits) {
    std::vector<Spin> spins;
    spins.reserve(digits.size());
    for (char ch : digits) {
        if (ch < '1' || ch > '3') throw std::invalid_argument("configuration digits must be 1, 2 or 3");
        spins.push_back(static_cast<Spin>(ch - '0'));
    }
    return Configuration(lattice, std::move(spins));
}

std::string Configuration::str() const {
    std::string out(spins_.size(), '0');
    for (std::size_t i = 0; i < spins_.size(); ++i) out[i] = static_cast<char>('0' + spins_[i]);
    return out;
}

bool Configuration::is_monochromatic() const {
    return std::all_of(spins_.begin(), spins_.end(), [&](Spin s) { return s == spins_.front(); });
}

int Configuration::count(Spin s) const {
    return static_cast<int>(std::count(spins_.begin(), spins_.end(), s));
}

EdgeCensus edge_census(const Configuration& sigma) {
    EdgeCensus c;
    const TorusLattice& lat = sigma.lattice();
    for (int v = 0; v < lat.size(); ++v) {
        int a = sigma[v] - 1;
        c.N[a] += 1;
        for (int w : {lat.right(v), lat.down(v)}) {
            int b = sigma[w] - 1;
            c.n[a][b] += 1;
            if (a != b) c.n[b][a] += 1;
        }
    }
    return c;
}

double energy(const Configuration& sigma, const CouplingParams& params) {
    const TorusLattice& lat = sigma.lattice();
    double h = 0.0;
    for (int v = 0; v < lat.size(); ++v) {
        h += params.bond(sigma[v], sigma[lat.right(v)]);
        h += params.bond(sigma[v], sigma[lat.down(v)]);
    }
    return h;
}

double energy_from_census(const EdgeCensus& c, const CouplingParams& params, const TorusLattice& lat) {
    double h2 = -2.0 * lat.size() * params.value(Pair::J22);
    return h2 - params.gamma1() * static_cast<double>(c.n[0][0]) +
           params.gamma12() * static_cast<double>(c.n[0][1] + c.n[0][2]) +
           params.gamma23() * static_cast<double>(c.n[1][2]);
}

double energy_gamma_form(const Configuration& sigma, const CouplingParams& params) {
    return energy_from_census(edge_census(sigma), params, sigma.lattice());
}

double energy_delta(const Configuration& sigma, int v, Spin s, const CouplingParams& params) {
    Spin c = sigma[v];
    if (c == s) return 0.0;
    double d = 0.0;
    for (int w : sigma.lattice().neighbors(v)) d += params.bond(s, sigma[w]) - params.bond(c, sigma[w]);
    return d;
}

void census_apply_flip(EdgeCensus& c, const Configuration& sigma, int v, Spin s) {
    Spin old = sigma[v];
    if (old == s) return;
    for (int w : sigma.lattice().neighbors(v)) {
        int b = sigma[w] - 1;
        int a0 = old - 1;
        int a1 = s - 1;
        c.n[a0][b] -= 1;
        if (a0 != b) c.n[b][a0] -= 1;
        c.n[a1][b] += 1;
        if (a1 != b) c.n[b][a1] += 1;
    }
    c.N[old - 1] -= 1;
    c.N[s - 1] += 1;
}

std::array<int, 3> neighbor_counts(const Configuration& sigma, int v) {
    std::array<int, 3> counts{};
    for (int w : sigma.lattice().neighbors(v)) counts[sigma[w] - 1] += 1;
    return counts;
}

LocalDeltaTable::LocalDeltaTable(const CouplingParams& params) {
    for (Spin c : kSpins) {
        for (int a1 = 0; a1 <= 4; ++a1) {
            for (int a2 = 0; a1 + a2 <= 4; ++a2) {
                std::array<int, 3> counts{a1, a2, 4 - a1 - a2};
                for (Spin s : kSpins) {
                    double d = 0.0;
                    if (s != c) {
                        for (Spin w : kSpins) d += counts[w - 1] * (params.bond(s, w) - params.bond(c, w));
                    }
                    table_[env_index(c, counts)][s - 1] = d;
                }
            }
        }
    }
}

bool energy_equal(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace potts
