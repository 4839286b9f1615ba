#pragma once

#include <cstdint>
#include <vector>

#include "potts/model.hpp"

namespace potts {

inline constexpr std::uint64_t kDefaultStateBudget = 19683;  // 3^9

// Every configuration of a small torus, indexed base 3 with vertex 0 as the most
// significant digit, so index order equals lexicographic order of the digit strings.
class EnumeratedSpace {
public:
    EnumeratedSpace(const TorusLattice& lattice, const CouplingParams& params,
                    std::uint64_t budget = kDefaultStateBudget);

    const TorusLattice& lattice() const { return lattice_; }
    const CouplingParams& params() const { return params_; }
    std::uint32_t size() const { return static_cast<std::uint32_t>(energy_.size()); }
    double energy(std::uint32_t idx) const { return energy_[idx]; }
    const std::vector<double>& energies() const { return energy_; }

    Spin spin(std::uint32_t idx, int v) const {
        return static_cast<Spin>((idx / weight_[static_cast<std::size_t>(v)]) % 3 + 1);
    }
    Configuration config(std::uint32_t idx) const;
    std::uint32_t index(const Configuration& sigma) const;
    std::uint32_t monochromatic(Spin s) const;

    // Calls f(neighbor_index) for the 2 * size() single-flip neighbors of idx.
    template <class F>
    void for_each_neighbor(std::uint32_t idx, F&& f) const {
        int n = lattice_.size();
        for (int v = 0; v < n; ++v) {
            std::uint32_t w = weight_[static_cast<std::size_t>(v)];
            std::uint32_t d = (idx / w) % 3;
            std::uint32_t base = idx - d * w;
            for (std::uint32_t t = 0; t < 3; ++t) {
                if (t != d) f(base + t * w);
            }
        }
    }

    // Required budget (3^{KL}) for a lattice; saturates at UINT64_MAX.
    static std::uint64_t required_states(const TorusLattice& lattice);

private:
    TorusLattice lattice_;
    CouplingParams params_;
    std::vector<std::uint32_t> weight_;
    std::vector<double> energy_;
};

}  // namespace potts
