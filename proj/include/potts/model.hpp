#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace potts {

using Spin = std::uint8_t;
inline constexpr std::array<Spin, 3> kSpins{1, 2, 3};

// Exact rational with 64-bit parts, always normalized (den > 0, gcd 1).
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d = 1);

    static Rational parse(std::string_view text);  // "p/q", "p", or a finite decimal
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool is_integer() const { return den == 1; }
    std::int64_t ceil() const;
    std::string str() const;

    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    friend bool operator==(const Rational& a, const Rational& b) = default;
    friend bool operator<(const Rational& a, const Rational& b);
    friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
};

// K rows by L columns, periodic in both directions. Vertex v = row * L + col.
class TorusLattice {
public:
    TorusLattice(int K, int L);

    int rows() const { return K_; }
    int cols() const { return L_; }
    int size() const { return K_ * L_; }
    int edge_count() const { return 2 * K_ * L_; }

    int row(int v) const { return v / L_; }
    int col(int v) const { return v % L_; }
    int index(int r, int c) const;  // wraps both coordinates

    int right(int v) const { return col(v) + 1 == L_ ? v + 1 - L_ : v + 1; }
    int left(int v) const { return col(v) == 0 ? v + L_ - 1 : v - 1; }
    int down(int v) const { return v + L_ >= size() ? v + L_ - size() : v + L_; }
    int up(int v) const { return v < L_ ? v + size() - L_ : v - L_; }
    std::array<int, 4> neighbors(int v) const { return {up(v), down(v), left(v), right(v)}; }

    friend bool operator==(const TorusLattice&, const TorusLattice&) = default;

private:
    int K_;
    int L_;
};

// Order of the six couplings everywhere: 11, 22, 33, 12, 13, 23.
enum class Pair { J11, J22, J33, J12, J13, J23 };

class CouplingParams {
public:
    // Throws std::invalid_argument unless J11 > J22 = J33 > 0, J12 = J13 > 0, J23 > 0.
    explicit CouplingParams(const std::array<double, 6>& J);
    explicit CouplingParams(const std::array<Rational, 6>& J);

    // Builds couplings from the three gammas; J22 = J33 = j22.
    static CouplingParams from_gammas(double gamma1, double gamma12, double gamma23, double j22);
    static CouplingParams from_gammas(const Rational& gamma1, const Rational& gamma12,
                                      const Rational& gamma23, const Rational& j22);

    double J(Spin a, Spin b) const;
    double value(Pair p) const { return J_[static_cast<int>(p)]; }
    const std::array<double, 6>& values() const { return J_; }
    const std::optional<std::array<Rational, 6>>& exact() const { return exact_; }

    double gamma1() const { return J_[0] - J_[1]; }
    double gamma12() const { return J_[3] + J_[1]; }
    double gamma23() const { return J_[5] + J_[1]; }
    std::optional<Rational> gamma1_exact() const;
    std::optional<Rational> gamma12_exact() const;
    std::optional<Rational> gamma23_exact() const;

    // Energy contribution of one edge with endpoint spins a, b.
    double bond(Spin a, Spin b) const { return bond_[a][b]; }

private:
    void validate() const;
    void build_bonds();

    std::array<double, 6> J_{};
    std::optional<std::array<Rational, 6>> exact_;
    std::array<std::array<double, 4>, 4> bond_{};
};

double f_h(double h, double x);

struct DerivedConstants {
    int ell_star = 0;
    double gamma_star = 0.0;
    double ratio = 0.0;  // (2 gamma12 + gamma1) / (2 gamma1)
    std::optional<Rational> ratio_exact;
    std::optional<Rational> gamma_star_exact;
};

DerivedConstants derive_constants(const CouplingParams& params);

struct AssumptionReport {
    bool condA = false;
    double condA_value = 0.0;
    bool condB = false;
    double condB_residual = 0.0;
    bool condC = false;
    double condC_slack = 0.0;
    bool lattice_margin = false;
    double margin_lhs = 0.0;  // 2 sqrt(KL - l*^2) - 2 l*
    double margin_rhs = 0.0;  // 2 l* - 1
    bool exact = false;       // all three conditions decided in rational arithmetic

    bool all() const { return condA && condB && condC && lattice_margin; }
};

AssumptionReport check_assumptions(const CouplingParams& params, const TorusLattice& lattice,
                                   double tol = 1e-9);

class Configuration {
public:
    Configuration(const TorusLattice& lattice, Spin fill);
    Configuration(const TorusLattice& lattice, std::vector<Spin> spins);
    static Configuration parse(const TorusLattice& lattice, std::string_view digits);

    const TorusLattice& lattice() const { return lattice_; }
    int size() const { return lattice_.size(); }
    Spin operator[](int v) const { return spins_[static_cast<std::size_t>(v)]; }
    void set(int v, Spin s) { spins_[static_cast<std::size_t>(v)] = s; }
    const std::vector<Spin>& spins() const { return spins_; }

    // Row-major digits '1'..'3'; doubles as the packed key for hashing and ordering.
    std::string str() const;
    bool is_monochromatic() const;
    int count(Spin s) const;

    friend bool operator==(const Configuration& a, const Configuration& b) {
        return a.lattice_ == b.lattice_ && a.spins_ == b.spins_;
    }

private:
    TorusLattice lattice_;
    std::vector<Spin> spins_;
};

struct EdgeCensus {
    std::array<std::array<std::int64_t, 3>, 3> n{};  // symmetric; n[i][j] for spins i+1, j+1
    std::array<std::int64_t, 3> N{};

    std::int64_t edges(Spin a, Spin b) const { return n[a - 1][b - 1]; }
    std::int64_t spins(Spin a) const { return N[a - 1]; }
};

EdgeCensus edge_census(const Configuration& sigma);

// Raw form: sum over the 2KL edges of the bond energy.
double energy(const Configuration& sigma, const CouplingParams& params);
// Gamma form: H(2) - gamma1 n11 + gamma12 (n12 + n13) + gamma23 n23, from the census.
double energy_gamma_form(const Configuration& sigma, const CouplingParams& params);
double energy_from_census(const EdgeCensus& c, const CouplingParams& params, const TorusLattice& lat);

double energy_delta(const Configuration& sigma, int v, Spin s, const CouplingParams& params);

// Updates the census for flipping v to s; call before mutating sigma.
void census_apply_flip(EdgeCensus& c, const Configuration& sigma, int v, Spin s);

// Neighbor counts (spin-1, spin-2, spin-3) around v.
std::array<int, 3> neighbor_counts(const Configuration& sigma, int v);

// Delta of flipping a center spin c to s given the neighbor counts; 45 environments x 3 targets.
class LocalDeltaTable {
public:
    explicit LocalDeltaTable(const CouplingParams& params);
    double operator()(Spin c, Spin s, const std::array<int, 3>& counts) const {
        return table_[env_index(c, counts)][s - 1];
    }
    static int env_index(Spin c, const std::array<int, 3>& counts) {
        return (c - 1) * 25 + counts[0] * 5 + counts[1];
    }
    static constexpr int kEnvCount = 75;

private:
    std::array<std::array<double, 3>, kEnvCount> table_{};
};

// Relative tolerance used for energy ties throughout the landscape code.
inline constexpr double kEnergyTol = 1e-9;
bool energy_equal(double a, double b, double tol = kEnergyTol);

}  // namespace potts
