#include "potts/state_space.hpp"

#include <limits>
#include <string>

#include "potts/errors.hpp"

namespace potts {

std::uint64_t EnumeratedSpace::required_states(const TorusLattice& lattice) {
    std::uint64_t n = 1;
    for (int i = 0; i < lattice.size(); ++i) {
        if (n > std::numeric_limits<std::uint64_t>::max() / 3) return std::numeric_limits<std::uint64_t>::max();
        n *= 3;
    }
    return n;
}

EnumeratedSpace::EnumeratedSpace(const TorusLattice& lattice, const CouplingParams& params, std::uint64_t budget)
    : lattice_(lattice), params_(params) {
    std::uint64_t need = required_states(lattice);
    if (need > budget || need > std::numeric_limits<std::uint32_t>::max()) {
        throw BudgetExceeded("full enumeration of " + std::to_string(lattice.rows()) + "x" +
                             std::to_string(lattice.cols()) + " needs 3^" + std::to_string(lattice.size()) +
                             " states, budget is " + std::to_string(budget));
    }
    int n = lattice.size();
    weight_.assign(static_cast<std::size_t>(n), 1);
    for (int v = n - 2; v >= 0; --v) weight_[static_cast<std::size_t>(v)] = weight_[static_cast<std::size_t>(v) + 1] * 3;
    energy_.resize(need);
    // Odometer over the digits keeps the census exact and each step O(1) amortized.
    Configuration sigma(lattice, Spin{1});
    EdgeCensus census = edge_census(sigma);
    for (std::uint64_t idx = 0; idx < need; ++idx) {
        energy_[idx] = energy_from_census(census, params_, lattice_);
        if (idx + 1 == need) break;
        int v = n - 1;
        while (sigma[v] == 3) {
            census_apply_flip(census, sigma, v, 1);
            sigma.set(v, 1);
            --v;
        }
        Spin next = static_cast<Spin>(sigma[v] + 1);
        census_apply_flip(census, sigma, v, next);
        sigma.set(v, next);
    }
}

Configuration EnumeratedSpace::config(std::uint32_t idx) const {
    std::vector<Spin> spins(static_cast<std::size_t>(lattice_.size()));
    for (int v = 0; v < lattice_.size(); ++v) spins[static_cast<std::size_t>(v)] = spin(idx, v);
    return Configuration(lattice_, std::move(spins));
}

std::uint32_t EnumeratedSpace::index(const Configuration& sigma) const {
    std::uint32_t idx = 0;
    for (int v = 0; v < lattice_.size(); ++v) idx += static_cast<std::uint32_t>(sigma[v] - 1) * weight_[static_cast<std::size_t>(v)];
    return idx;
}

std::uint32_t EnumeratedSpace::monochromatic(Spin s) const {
    return index(Configuration(lattice_, s));
}

}  // namespace potts
