#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "potts/model.hpp"
#include "potts/state_space.hpp"

namespace potts {

// Replaces every spin r by s.
Configuration project(const Configuration& sigma, Spin r, Spin s);

enum class TileClass { Unstable, StableNotStrict, StrictlyStable };
const char* to_string(TileClass t);

// Case analysis of the stable-tile lemma; meaningful for couplings satisfying
// condition C (which gives gamma12 > gamma23 and 2 gamma12 > gamma1 + gamma23).
TileClass classify_tile(const Configuration& sigma, int v);

struct Cluster {
    Spin spin = 0;
    std::vector<int> vertices;  // sorted
    int row0 = 0;               // bounding box on the torus; may wrap
    int col0 = 0;
    int height = 0;
    int width = 0;
    bool is_rectangle = false;
    bool is_strip = false;      // spans every row or every column
    std::vector<int> boundary;  // outer boundary: outside vertices adjacent to the cluster
};

// 4-connected components of {v : sigma(v) = r}, ordered by smallest vertex.
std::vector<Cluster> clusters(const Configuration& sigma, Spin r);
bool clusters_interact(const Configuration& sigma, const Cluster& a, const Cluster& b);

struct Bridges {
    std::vector<int> rows;
    std::vector<int> cols;
    bool has_cross = false;
};
Bridges bridges(const Configuration& sigma, Spin r);

struct LatticePath {
    std::vector<Configuration> steps;
    double height = -std::numeric_limits<double>::infinity();
};

LatticePath make_path(std::vector<Configuration> steps, const CouplingParams& params);
// Consecutive steps differ in at most max_changes vertices; repeats allowed when allow_equal.
bool is_valid_path(const LatticePath& path, bool allow_equal = false);
// Indices of steps whose energy equals the path height.
std::vector<std::size_t> path_argmax(const LatticePath& path, const CouplingParams& params);

enum class SearchStatus { Decided, Unreachable, Undecided };
const char* to_string(SearchStatus s);

struct CommHeight {
    SearchStatus status = SearchStatus::Undecided;
    double phi = std::numeric_limits<double>::infinity();
    LatticePath witness;
    std::size_t states_visited = 0;
};

// Implicit state space explored from the start states under an energy cap.
struct CappedSpace {
    CouplingParams params;
    double cap = std::numeric_limits<double>::infinity();
    bool strict = false;  // admit only H < cap instead of H <= cap
    std::size_t max_states = 1'000'000;
};

CommHeight comm_height(const EnumeratedSpace& space, const std::vector<std::uint32_t>& A,
                       const std::vector<std::uint32_t>& B);
CommHeight comm_height(const Configuration& a, const Configuration& b, const EnumeratedSpace& space);
CommHeight comm_height(const Configuration& a, const Configuration& b, const CappedSpace& space);

struct StabilityLevel {
    SearchStatus status = SearchStatus::Undecided;
    double value = std::numeric_limits<double>::infinity();  // +inf when no lower state exists
};

StabilityLevel stability_level(const EnumeratedSpace& space, std::uint32_t idx);
StabilityLevel stability_level(const Configuration& sigma, const CappedSpace& space);
std::vector<double> all_stability_levels(const EnumeratedSpace& space);

struct MinimaReport {
    std::vector<std::uint32_t> local_minima;           // strict local minima
    std::vector<std::vector<std::uint32_t>> plateaux;  // stable plateaux with at least two states
};
MinimaReport local_minima_and_plateaux(const EnumeratedSpace& space);

struct SaddleOptions {
    bool essential = true;
    std::size_t max_expansions = 2'000'000;  // DFS budget for the essential test
    int length_multiple = 4;                  // reduced-path length bound = multiple * K * L
};

struct SaddleReport {
    double phi = std::numeric_limits<double>::infinity();
    std::vector<std::uint32_t> saddles;  // sorted
    std::vector<int> essential;          // per saddle: 1 essential, 0 unessential, -1 undecided
    std::size_t expansions = 0;
    bool truncated = false;
};
SaddleReport minimal_saddles(const EnumeratedSpace& space, const std::vector<std::uint32_t>& A,
                             const std::vector<std::uint32_t>& B, const SaddleOptions& opt = {});

struct CycleMembership {
    Spin root = 0;
    double cap = 0.0;
    std::vector<std::string> members;  // sorted packed strings
    bool incomplete = false;
    std::unordered_map<std::string, std::string> parent;

    bool contains(const std::string& key) const { return parent.count(key) != 0; }
    // Sub-cap path from the root to a member.
    std::vector<std::string> witness(const std::string& key) const;
};

// States reachable from the monochromatic root strictly below H(2) + Gamma*.
CycleMembership initial_cycle(Spin r, const TorusLattice& lattice, const CouplingParams& params,
                              std::size_t max_states = 1'000'000);

struct SliceOptions {
    int window = 0;           // side of the square window holding the 1-spins; 0 = l* + 1
    int random_fills = 4;     // random {2,3} fillings per placement on top of the two pure seas
    std::size_t max_configs = 200'000;
    std::uint64_t seed = 1;
};

struct SliceReport {
    int ones = 0;
    std::size_t checked = 0;
    std::size_t at_level = 0;          // H - H(2) == Gamma*
    std::size_t gate_members = 0;      // members of W or W' (m = 2, 3) among checked
    std::size_t below_level = 0;       // violations of H - H(2) >= Gamma*
    std::size_t level_nonmembers = 0;  // equality outside W and W'
    std::size_t members_off_level = 0; // W or W' member with strict inequality
    double min_excess = std::numeric_limits<double>::infinity();
    bool truncated = false;
    bool ok() const { return below_level == 0 && level_nonmembers == 0 && members_off_level == 0; }
};
SliceReport critical_slice_check(const CouplingParams& params, const TorusLattice& lattice,
                                 const SliceOptions& opt = {});

struct EscapeResult {
    LatticePath path;
    double elevation = 0.0;  // max H along the path minus H(start)
    bool reached_lower = false;
    std::string rule;
};

// Path from eta to a strictly lower state following the flip schedules of the
// stability-level bound; eta must not be monochromatic.
EscapeResult escape_path(const Configuration& eta, const CouplingParams& params);

}  // namespace potts
