#include "potts/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "mp_eigen.hpp"
#include "potts/rng.hpp"

#include <Eigen/Eigenvalues>

namespace potts {

using detail::Mp;

namespace {

constexpr std::uint32_t kDenseLimit = 729;  // 3^6

double log_sum_exp(const std::vector<double>& a) {
    double m = *std::max_element(a.begin(), a.end());
    double s = 0.0;
    for (double x : a) s += std::exp(x - m);
    return m + std::log(s);
}

double flip_delta(const EnumeratedSpace& sp, std::uint32_t x, std::uint32_t y) {
    double d = sp.energy(y) - sp.energy(x);
    double scale = std::max({1.0, std::abs(sp.energy(x)), std::abs(sp.energy(y))});
    return std::abs(d) <= kEnergyTol * scale ? 0.0 : d;
}

// Symmetrized generator G = D^{1/2} (I - P) D^{-1/2}: diagonal leave(x), off-diagonal
// -exp(-beta |dH| / 2) / (3|V|).
Eigen::MatrixXd dense_generator(const Kernel& k) {
    const auto& sp = *k.space;
    std::uint32_t n = sp.size();
    double q = 1.0 / (3.0 * sp.lattice().size());
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    for (std::uint32_t x = 0; x < n; ++x) {
        G(x, x) = k.leave[x];
        sp.for_each_neighbor(x, [&](std::uint32_t y) {
            G(x, y) = -q * std::exp(-0.5 * k.beta * std::abs(flip_delta(sp, x, y)));
        });
    }
    return G;
}

Eigen::SparseMatrix<double> sparse_generator(const Kernel& k) {
    const auto& sp = *k.space;
    std::uint32_t n = sp.size();
    double q = 1.0 / (3.0 * sp.lattice().size());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(n) * (2 * sp.lattice().size() + 1));
    for (std::uint32_t x = 0; x < n; ++x) {
        t.emplace_back(x, x, k.leave[x]);
        sp.for_each_neighbor(x, [&](std::uint32_t y) {
            t.emplace_back(x, y, -q * std::exp(-0.5 * k.beta * std::abs(flip_delta(sp, x, y))));
        });
    }
    Eigen::SparseMatrix<double> G(n, n);
    G.setFromTriplets(t.begin(), t.end());
    return G;
}

Eigen::VectorXd sqrt_mu(const Kernel& k) {
    GibbsMeasure mu = gibbs_measure(*k.space, k.beta);
    Eigen::VectorXd v(k.size());
    for (std::uint32_t x = 0; x < k.size(); ++x) v(x) = std::exp(0.5 * mu.log_weights[x]);
    return v / v.norm();
}

SpectralResult dense_gap(const Kernel& k) {
    Eigen::MatrixXd G = dense_generator(k);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    SpectralResult r;
    r.method = GapMethod::Dense;
    r.full = true;
    r.digits = std::numeric_limits<double>::digits10;
    const auto& ev = es.eigenvalues();
    r.generator_eigs.assign(ev.data(), ev.data() + ev.size());
    r.generator_eigs[0] = 0.0;  // the stationary direction, zero by construction
    for (double e : r.generator_eigs) r.eigenvalues.push_back(1.0 - e);
    r.rho = ev.size() > 1 ? ev(1) : 0.0;
    r.log_rho = std::log(r.rho);
    Eigen::MatrixXd R = G * es.eigenvectors() - es.eigenvectors() * ev.asDiagonal();
    r.residual = R.cwiseAbs().maxCoeff();
    return r;
}

// Lanczos with full reorthogonalization for the largest eigenvalue of 2I - G on the
// complement of sqrt(mu).
SpectralResult lanczos_gap(const Kernel& k, int max_iter) {
    Eigen::SparseMatrix<double> G = sparse_generator(k);
    Eigen::VectorXd v1 = sqrt_mu(k);
    std::uint32_t n = k.size();
    int m_max = std::min<int>(max_iter, static_cast<int>(n) - 1);
    Eigen::MatrixXd Q(n, m_max + 1);
    std::vector<double> alpha, beta;
    Philox rng(0x5eed, 7);
    Eigen::VectorXd q(n);
    for (std::uint32_t i = 0; i < n; ++i) q(i) = rng.uniform() - 0.5;
    q -= v1 * v1.dot(q);
    q.normalize();
    Q.col(0) = q;
    SpectralResult r;
    r.method = GapMethod::Lanczos;
    r.digits = std::numeric_limits<double>::digits10;
    double theta = 0.0, resid = 1.0;
    Eigen::VectorXd ritz;
    for (int j = 0; j < m_max; ++j) {
        Eigen::VectorXd w = 2.0 * Q.col(j) - G * Q.col(j);
        alpha.push_back(Q.col(j).dot(w));
        for (int pass = 0; pass < 2; ++pass) {
            w -= v1 * v1.dot(w);
            w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        }
        double b = w.norm();
        int m = j + 1;
        if (m % 5 == 0 || b < 1e-14 || m == m_max) {
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
            for (int i = 0; i < m; ++i) {
                T(i, i) = alpha[static_cast<std::size_t>(i)];
                if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
            theta = es.eigenvalues()(m - 1);
            resid = std::abs(b * es.eigenvectors()(m - 1, m - 1));
            ritz = es.eigenvalues();
            double rho = 2.0 - theta;
            if (b < 1e-14 || resid < 1e-12 * std::max(rho, 1e-300)) break;
        }
        beta.push_back(b);
        Q.col(j + 1) = w / b;
    }
    r.rho = 2.0 - theta;
    r.log_rho = std::log(r.rho);
    r.residual = resid;
    r.generator_eigs.push_back(0.0);
    for (int i = static_cast<int>(ritz.size()) - 1; i >= 0 && r.generator_eigs.size() < 8; --i) r.generator_eigs.push_back(2.0 - ritz(i));
    for (double e : r.generator_eigs) r.eigenvalues.push_back(1.0 - e);
    return r;
}

// max over eta outside the ground states of Phi(eta, ground) - H(eta), by flooding states in
// energy order and recording when each basin first joins a basin holding a global minimum.
}  // namespace

double critical_depth(const EnumeratedSpace& sp) {
    std::uint32_t n = sp.size();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return sp.energy(a) < sp.energy(b); });
    std::vector<std::uint32_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0u);
    std::vector<double> bottom(n);
    std::vector<char> on(n, 0), ground(n, 0);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    double hmin = sp.energy(order[0]), depth = 0.0;
    for (std::uint32_t x : order) {
        on[x] = 1;
        bottom[x] = sp.energy(x);
        ground[x] = energy_equal(sp.energy(x), hmin);
        sp.for_each_neighbor(x, [&](std::uint32_t y) {
            if (!on[y]) return;
            std::uint32_t a = find(x), b = find(y);
            if (a == b) return;
            if (ground[a] != ground[b]) depth = std::max(depth, sp.energy(x) - bottom[ground[a] ? b : a]);
            parent[b] = a;
            bottom[a] = std::min(bottom[a], bottom[b]);
            ground[a] = ground[a] || ground[b];
        });
    }
    return depth;
}

namespace {

struct MpSparseRow {
    std::vector<std::uint32_t> col;
    std::vector<Mp> val;
};

SpectralResult high_precision_gap(const Kernel& k, const SpectralOptions& opt) {
    using MatMp = Eigen::Matrix<Mp, Eigen::Dynamic, Eigen::Dynamic>;
    const auto& sp = *k.space;
    std::uint32_t n = sp.size();
    if (n > kDenseLimit) throw std::invalid_argument("high-precision spectrum is limited to 729 states");
    double emin = *std::min_element(sp.energies().begin(), sp.energies().end());
    double emax = *std::max_element(sp.energies().begin(), sp.energies().end());
    double range = emax - emin;
    // The slow eigenvalues sit near exp(-beta * depth) and the right eigenvectors carry a further
    // factor up to exp(beta * range / 2); both have to survive the rounding of the dense solve.
    int digits = opt.digits;
    if (digits <= 0) digits = static_cast<int>(std::ceil(k.beta * (critical_depth(sp) + 0.5 * range) / std::log(10.0))) + 30;
    if (0.5 * k.beta * range > 700.0) throw std::invalid_argument("right eigenvectors overflow double for this beta");
    unsigned old_digits = Mp::default_precision();
    Mp::default_precision(static_cast<unsigned>(digits));

    // Energies rebuilt from the integer census so that detailed balance is exact to working precision.
    const CouplingParams& par = sp.params();
    Mp g1 = par.gamma1(), g12 = par.gamma12(), g23 = par.gamma23();
    std::vector<Mp> E(n);
    for (std::uint32_t x = 0; x < n; ++x) {
        EdgeCensus c = edge_census(sp.config(x));
        E[x] = -g1 * Mp(c.n[0][0]) + g12 * Mp(c.n[0][1] + c.n[0][2]) + g23 * Mp(c.n[1][2]);
    }
    Mp beta = k.beta;
    Mp q = Mp(1) / Mp(3 * sp.lattice().size());
    Mp e0 = *std::min_element(E.begin(), E.end());
    std::vector<Mp> w(n);
    Mp Z = 0;
    for (std::uint32_t x = 0; x < n; ++x) {
        w[x] = exp(-beta * (E[x] - e0));
        Z += w[x];
    }
    std::vector<Mp> smu(n);
    for (std::uint32_t x = 0; x < n; ++x) smu[x] = sqrt(w[x] / Z);

    std::vector<MpSparseRow> off(n);
    std::vector<Mp> diag(n);
    MatMp A(n, n);
    for (std::uint32_t x = 0; x < n; ++x) {
        Mp leave = 0;
        bool tied = false;
        sp.for_each_neighbor(x, [&](std::uint32_t y) {
            Mp d = E[y] - E[x];
            tied = flip_delta(sp, x, y) == 0.0;
            Mp up = tied || d < 0 ? Mp(0) : d;
            leave += q * exp(-beta * up);
            off[x].col.push_back(y);
            off[x].val.push_back(-q * exp(-beta * abs(tied ? Mp(0) : d) / 2));
        });
        diag[x] = leave;
    }
    for (std::uint32_t x = 0; x < n; ++x)
        for (std::uint32_t y = 0; y < n; ++y) A(x, y) = smu[x] * smu[y];
    for (std::uint32_t x = 0; x < n; ++x) {
        A(x, x) += diag[x];
        for (std::size_t j = 0; j < off[x].col.size(); ++j) A(x, off[x].col[j]) += off[x].val[j];
    }
    auto applyG = [&](const MatMp& X) {
        MatMp Y(X.rows(), X.cols());
        for (std::uint32_t x = 0; x < n; ++x)
            for (Eigen::Index c = 0; c < X.cols(); ++c) {
                Mp s = diag[x] * X(x, c);
                for (std::size_t j = 0; j < off[x].col.size(); ++j) s += off[x].val[j] * X(off[x].col[j], c);
                Y(x, c) = s;
            }
        return Y;
    };
    // G + v v^T moves the null direction to eigenvalue 1 and is positive definite.
    Eigen::LLT<MatMp> llt(A);
    if (llt.info() != Eigen::Success) throw std::runtime_error("high-precision Cholesky failed");

    int block = std::min<int>(opt.slow_modes, static_cast<int>(n) - 1);
    Eigen::Matrix<Mp, Eigen::Dynamic, 1> v(n);
    for (std::uint32_t x = 0; x < n; ++x) v(x) = smu[x];
    auto orthonormalize = [&](MatMp& X) {
        for (int pass = 0; pass < 2; ++pass) {
            for (Eigen::Index c = 0; c < X.cols(); ++c) {
                X.col(c) -= v * v.dot(X.col(c));
                for (Eigen::Index b = 0; b < c; ++b) X.col(c) -= X.col(b) * X.col(b).dot(X.col(c));
                X.col(c) /= X.col(c).norm();
            }
        }
    };
    MatMp X(n, block);
    Philox rng(0x5eed, 11);
    for (std::uint32_t x = 0; x < n; ++x)
        for (int c = 0; c < block; ++c) X(x, c) = Mp(rng.uniform() - 0.5);
    orthonormalize(X);
    Eigen::Matrix<Mp, Eigen::Dynamic, 1> theta;
    std::vector<Mp> res(static_cast<std::size_t>(block));
    const Mp tol = pow(Mp(10), -18);
    // Subspace iteration converges mode c at rate theta_c / theta_{block+1}; only modes well
    // below the top of the block are required to converge.
    int required = 1;
    for (int iter = 0; iter < 100; ++iter) {
        X = llt.solve(X);
        orthonormalize(X);
        MatMp GY = applyG(X);
        MatMp H = X.transpose() * GY;
        H = (H + H.transpose().eval()) / 2;
        Eigen::SelfAdjointEigenSolver<MatMp> es(H);
        theta = es.eigenvalues();
        X = X * es.eigenvectors();
        MatMp GX = GY * es.eigenvectors();
        for (int c = 0; c < block; ++c) res[static_cast<std::size_t>(c)] = (GX.col(c) - X.col(c) * theta(c)).norm() / theta(c);
        required = 1;
        while (required < block && theta(required) < theta(block - 1) / 20) ++required;
        bool done = true;
        for (int c = 0; c < required; ++c) done = done && res[static_cast<std::size_t>(c)] < tol;
        if (done) break;
    }
    int keep = 0;
    Mp worst = 0;
    while (keep < block && res[static_cast<std::size_t>(keep)] < tol) {
        if (res[static_cast<std::size_t>(keep)] > worst) worst = res[static_cast<std::size_t>(keep)];
        ++keep;
    }
    if (keep < required) throw std::runtime_error("high-precision subspace iteration did not converge");
    block = keep;

    SpectralResult r;
    r.method = GapMethod::HighPrecision;
    r.digits = digits;
    r.generator_eigs.push_back(0.0);
    for (int c = 0; c < block; ++c) r.generator_eigs.push_back(static_cast<double>(theta(c)));
    for (double e : r.generator_eigs) r.eigenvalues.push_back(1.0 - e);
    r.rho = static_cast<double>(theta(0));
    r.log_rho = static_cast<double>(log(theta(0)));
    r.residual = static_cast<double>(worst);
    for (int c = 0; c < block; ++c) {
        std::vector<double> psi(n);
        for (std::uint32_t x = 0; x < n; ++x) psi[x] = static_cast<double>(X(x, c) / smu[x]);
        r.slow_psi.push_back(std::move(psi));
    }
    Mp::default_precision(old_digits);
    return r;
}

Eigen::MatrixXd dense_kernel(const Kernel& k) {
    if (k.size() > kDenseLimit) throw std::invalid_argument("dense powering is limited to 729 states");
    return Eigen::MatrixXd(k.P);
}

double worst_tv(const Eigen::MatrixXd& M, const GibbsMeasure& mu) {
    double worst = 0.0;
    for (Eigen::Index x = 0; x < M.rows(); ++x) {
        double s = 0.0;
        for (Eigen::Index y = 0; y < M.cols(); ++y) s += std::abs(M(x, y) - mu.weights[static_cast<std::size_t>(y)]);
        worst = std::max(worst, 0.5 * s);
    }
    return worst;
}

double tv_at_zero(const GibbsMeasure& mu) {
    return 1.0 - *std::min_element(mu.weights.begin(), mu.weights.end());
}

}  // namespace

const char* to_string(GapMethod m) {
    switch (m) {
        case GapMethod::Auto: return "auto";
        case GapMethod::Dense: return "dense";
        case GapMethod::Lanczos: return "lanczos";
        case GapMethod::HighPrecision: return "high-precision";
    }
    return "?";
}

GibbsMeasure gibbs_measure(const EnumeratedSpace& space, double beta) {
    GibbsMeasure g;
    g.beta = beta;
    g.log_weights.resize(space.size());
    for (std::uint32_t x = 0; x < space.size(); ++x) g.log_weights[x] = -beta * space.energy(x);
    g.logZ = log_sum_exp(g.log_weights);
    g.weights.resize(space.size());
    for (std::uint32_t x = 0; x < space.size(); ++x) {
        g.log_weights[x] -= g.logZ;
        g.weights[x] = std::exp(g.log_weights[x]);
    }
    return g;
}

Kernel build_kernel(std::shared_ptr<const EnumeratedSpace> space, double beta) {
    Kernel k;
    k.space = std::move(space);
    k.beta = beta;
    const auto& sp = *k.space;
    std::uint32_t n = sp.size();
    double q = 1.0 / (3.0 * sp.lattice().size());
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(n) * (2 * sp.lattice().size() + 1));
    k.leave.assign(n, 0.0);
    for (std::uint32_t x = 0; x < n; ++x) {
        double leave = 0.0;
        sp.for_each_neighbor(x, [&](std::uint32_t y) {
            double d = flip_delta(sp, x, y);
            double p = beta == 0.0 || d <= 0.0 ? q : q * std::exp(-beta * d);
            leave += p;
            t.emplace_back(x, y, p);
        });
        k.leave[x] = leave;
        t.emplace_back(x, x, 1.0 - leave);
    }
    k.P.resize(n, n);
    k.P.setFromTriplets(t.begin(), t.end());
    return k;
}

Kernel build_kernel(const CouplingParams& params, const TorusLattice& lattice, double beta, std::uint64_t budget) {
    return build_kernel(std::make_shared<const EnumeratedSpace>(lattice, params, budget), beta);
}

SpectralResult spectral_gap(const Kernel& kernel, const SpectralOptions& opt) {
    GapMethod m = opt.method;
    if (m == GapMethod::Auto) {
        if (kernel.size() > kDenseLimit) return lanczos_gap(kernel, opt.lanczos_max_iter);
        SpectralResult d = dense_gap(kernel);
        if (d.rho > opt.auto_threshold) return d;
        return high_precision_gap(kernel, opt);
    }
    switch (m) {
        case GapMethod::Dense:
            if (kernel.size() > kDenseLimit) throw std::invalid_argument("dense spectrum is limited to 729 states");
            return dense_gap(kernel);
        case GapMethod::Lanczos: return lanczos_gap(kernel, opt.lanczos_max_iter);
        default: return high_precision_gap(kernel, opt);
    }
}

double worst_tv_power(const Kernel& kernel, const GibbsMeasure& mu, std::uint64_t n) {
    if (n == 0) return tv_at_zero(mu);
    Eigen::MatrixXd base = dense_kernel(kernel);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Identity(base.rows(), base.cols());
    while (n) {
        if (n & 1) acc = acc * base;
        n >>= 1;
        if (n) base = base * base;
    }
    return worst_tv(acc, mu);
}

MixingResult mixing_time(const Kernel& kernel, const GibbsMeasure& mu, double eps, const SpectralOptions& opt,
                         int max_doublings) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("eps must lie in (0, 1)");
    bool spectral = opt.method == GapMethod::HighPrecision;
    if (opt.method == GapMethod::Auto) spectral = dense_gap(kernel).rho <= opt.auto_threshold;
    if (spectral) {
        SpectralOptions o = opt;
        o.method = GapMethod::HighPrecision;
        MixingResult s = mixing_time_spectral(kernel, mu, spectral_gap(kernel, o), eps);
        // Too few separated modes to resolve the time; powering still can when the space is small.
        if (s.method != "spectral-upper-bound" || kernel.size() > kDenseLimit) return s;
    }
    MixingResult r;
    r.method = "powering";
    if (tv_at_zero(mu) <= eps) {
        r.exact = true;
        return r;
    }
    // Powers P^(2^j) until the distance drops below eps, then fix the bits from the top.
    std::vector<Eigen::MatrixXd> pw{dense_kernel(kernel)};
    while (worst_tv(pw.back(), mu) > eps) {
        if (static_cast<int>(pw.size()) > max_doublings) {
            r.n = std::ldexp(1.0, max_doublings);
            r.lower_bound_only = true;
            return r;
        }
        pw.push_back(pw.back() * pw.back());
    }
    int J = static_cast<int>(pw.size()) - 1;
    if (J == 0) {
        r.n = 1;
        r.exact = true;
        return r;
    }
    Eigen::MatrixXd M = pw[static_cast<std::size_t>(J - 1)];
    std::uint64_t n = 1ULL << (J - 1);
    for (int j = J - 2; j >= 0; --j) {
        Eigen::MatrixXd C = M * pw[static_cast<std::size_t>(j)];
        if (worst_tv(C, mu) > eps) {
            M = std::move(C);
            n += 1ULL << j;
        }
    }
    r.n = static_cast<double>(n + 1);
    r.exact = true;
    return r;
}

MixingResult mixing_time_spectral(const Kernel& kernel, const GibbsMeasure& mu, const SpectralResult& spec,
                                  double eps) {
    if (spec.slow_psi.empty()) throw std::invalid_argument("spectrum carries no slow modes");
    std::size_t K = spec.slow_psi.size();
    std::uint32_t n = kernel.size();
    std::vector<double> e(spec.generator_eigs.begin() + 1, spec.generator_eigs.begin() + 1 + static_cast<long>(K));
    // mu(y) psi_k(y), formed in the log domain so that underflow of mu never meets a huge psi.
    std::vector<std::vector<double>> mpsi(K, std::vector<double>(n));
    double min_log_mu = 0.0;
    for (std::uint32_t y = 0; y < n; ++y) min_log_mu = std::min(min_log_mu, mu.log_weights[y]);
    for (std::size_t k = 0; k < K; ++k)
        for (std::uint32_t y = 0; y < n; ++y) {
            double p = spec.slow_psi[k][y];
            mpsi[k][y] = p == 0.0 ? 0.0 : std::copysign(std::exp(mu.log_weights[y] + std::log(std::abs(p))), p);
        }
    auto tv = [&](double t) {
        std::vector<double> c(K);
        for (std::size_t k = 0; k < K; ++k) c[k] = std::exp(t * std::log1p(-e[k]));
        double worst = 0.0;
        std::vector<double> a(K);
        for (std::uint32_t x = 0; x < n; ++x) {
            for (std::size_t k = 0; k < K; ++k) a[k] = c[k] * spec.slow_psi[k][x];
            double s = 0.0;
            for (std::uint32_t y = 0; y < n; ++y) {
                double d = 0.0;
                for (std::size_t k = 0; k < K; ++k) d += a[k] * mpsi[k][y];
                s += std::abs(d);
            }
            worst = std::max(worst, 0.5 * s);
        }
        return worst;
    };
    // The discarded modes relax at least as fast as the last kept one; beyond t_valid their total
    // contribution is below e^-40.
    double cut = 2.0 * std::log(static_cast<double>(n)) - 0.5 * min_log_mu + 40.0;
    double t_valid = std::ceil(cut / e.back());
    MixingResult r;
    r.method = "spectral";
    double lo = t_valid, hi = t_valid;
    if (tv(lo) <= eps) {
        // Resolving this would need more modes; t_valid is only an upper bound.
        r.n = t_valid;
        r.method = "spectral-upper-bound";
        return r;
    }
    while (tv(hi) > eps) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) {
            r.n = lo;
            r.lower_bound_only = true;
            return r;
        }
    }
    if (hi <= 0x1.0p53) {
        while (hi - lo > 1.0) {
            double mid = std::floor((lo + hi) / 2.0);
            (tv(mid) > eps ? lo : hi) = mid;
        }
        r.exact = true;
    } else {
        while ((hi - lo) > 1e-13 * hi) {
            double mid = 0.5 * (lo + hi);
            (tv(mid) > eps ? lo : hi) = mid;
        }
    }
    r.n = hi;
    return r;
}

}  // namespace potts
