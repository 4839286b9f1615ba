#pragma once

#include <Eigen/Sparse>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "potts/model.hpp"
#include "potts/state_space.hpp"

namespace potts {

struct GibbsMeasure {
    double beta = 0.0;
    double logZ = 0.0;
    std::vector<double> log_weights;  // log mu(x)
    std::vector<double> weights;      // mu(x), may underflow to 0 for deep-excited states
};
GibbsMeasure gibbs_measure(const EnumeratedSpace& space, double beta);

// Metropolis transition matrix on a fully enumerated space.  leave[x] = 1 - P(x,x) is
// accumulated from the off-diagonal entries, never formed by subtraction.
struct Kernel {
    std::shared_ptr<const EnumeratedSpace> space;
    double beta = 0.0;
    Eigen::SparseMatrix<double, Eigen::RowMajor> P;
    std::vector<double> leave;
    std::uint32_t size() const { return space->size(); }
};
Kernel build_kernel(std::shared_ptr<const EnumeratedSpace> space, double beta);
// Throws BudgetExceeded when 3^{KL} exceeds the budget.
Kernel build_kernel(const CouplingParams& params, const TorusLattice& lattice, double beta,
                    std::uint64_t budget = kDefaultStateBudget);

// max over non-ground states eta of Phi(eta, ground states) - H(eta), by flooding.
double critical_depth(const EnumeratedSpace& space);

enum class GapMethod { Auto, Dense, Lanczos, HighPrecision };
const char* to_string(GapMethod m);

struct SpectralOptions {
    GapMethod method = GapMethod::Auto;
    int slow_modes = 12;         // eigenpairs kept by the high-precision solver
    int digits = 0;              // 0: chosen from beta and the energy range
    int lanczos_max_iter = 400;
    double auto_threshold = 1e-8;  // Auto switches to high precision when the double gap is below this
};

struct SpectralResult {
    double rho = 0.0;                   // 1 - lambda_2
    double log_rho = 0.0;               // accurate even when rho underflows double resolution
    std::vector<double> eigenvalues;    // lambda_i descending; complete only when full == true
    std::vector<double> generator_eigs; // 1 - lambda_i, ascending, computed directly
    bool full = false;
    GapMethod method = GapMethod::Dense;
    int digits = 0;
    double residual = 0.0;              // max relative eigen-residual of the reported pairs
    // Slow right eigenvectors psi_k of P (normalized in L2(mu)), k >= 2, for mixing times.
    std::vector<std::vector<double>> slow_psi;
};
SpectralResult spectral_gap(const Kernel& kernel, const SpectralOptions& opt = {});

struct MixingResult {
    double n = 0.0;                // t_mix(eps)
    bool exact = false;            // n is the exact integer smallest time
    bool lower_bound_only = false; // iteration cap reached; n is a lower bound
    std::string method;
};

// Smallest n with max_x ||P^n(x,.) - mu||_TV <= eps, 0 < eps < 1.
MixingResult mixing_time(const Kernel& kernel, const GibbsMeasure& mu, double eps, const SpectralOptions& opt = {},
                         int max_doublings = 40);
// Same from a precomputed spectrum holding slow modes (high-precision path).
MixingResult mixing_time_spectral(const Kernel& kernel, const GibbsMeasure& mu, const SpectralResult& spec, double eps);

// Worst-start total variation after exactly n steps by dense powering (small spaces).
double worst_tv_power(const Kernel& kernel, const GibbsMeasure& mu, std::uint64_t n);

}  // namespace potts
