#pragma once

#include <optional>
#include <string>
#include <vector>

#include "potts/landscape.hpp"
#include "potts/model.hpp"

namespace potts {

// A sea of spin r with an s-region shaped as an a x b rectangle (a columns, b rows),
// optionally with a bar of length l glued to a side.  For B the bar runs along a side
// of length b (a column next to the rectangle); for HatB along a side of length a.
struct RectDescriptor {
    enum class Kind { R, B, HatB };
    Kind kind = Kind::R;
    int a = 1;
    int b = 1;
    int l = 0;
    Spin r = 2;
    Spin s = 1;
    int row0 = 0;  // upper-left corner of the rectangle
    int col0 = 0;
    int side = 0;        // 0: bar left (B) or above (HatB); 1: right or below
    int bar_offset = 0;  // bar start along its side, relative to the rectangle
    bool relaxed = false;  // admits l equal to a side of length 1

    bool is_strip(const TorusLattice& lat) const { return a == lat.cols() || b == lat.rows(); }
    std::string str() const;
};

// Cells of the s-region, for validity-checked shapes only.
std::vector<int> shape_cells(const RectDescriptor& d, const TorusLattice& lat);
Configuration realize(const RectDescriptor& d, const TorusLattice& lat);

struct GateFamily {
    enum class Kind { W_m1, Wprime_m1, P, Q, H_i, W_jh, W23_union };
    Kind kind = Kind::W_m1;
    Spin r = 2;  // sea spin (m for the m -> 1 families)
    Spin s = 3;
    int i = 0;
    int j = 0;
    int h = 0;

    static GateFamily w_m1(Spin m) { return {Kind::W_m1, m, 1}; }
    static GateFamily wprime_m1(Spin m) { return {Kind::Wprime_m1, m, 1}; }
    static GateFamily p(Spin r, Spin s) { return {Kind::P, r, s}; }
    static GateFamily q(Spin r, Spin s) { return {Kind::Q, r, s}; }
    static GateFamily h_i(Spin r, Spin s, int i) { return {Kind::H_i, r, s, i}; }
    static GateFamily w_jh(int j, int h) { return {Kind::W_jh, 2, 3, 0, j, h}; }
    static GateFamily w23_union() { return {Kind::W23_union, 2, 3}; }

    // W21, W31, Wp21, Wp31, P23, P32, Q23, Q32, Hi23:i, Hi32:i, Wjh23:j,h, 23union.
    static GateFamily parse(const std::string& name);
    std::string name() const;
};

// Shape templates making up a family on the given lattice (K <= L required).
// Throws std::invalid_argument for indices outside the admissible ranges.
std::vector<RectDescriptor> family_templates(const GateFamily& f, const TorusLattice& lat, int ell_star);

// The families whose union is W(2,3), in the order of its definition.
std::vector<GateFamily> w23_components(const TorusLattice& lat);

struct GateMatch {
    bool member = false;
    RectDescriptor descriptor;
    GateFamily family;  // the component family that matched (useful for the union)
};

GateMatch gate_membership(const Configuration& sigma, const GateFamily& f, const CouplingParams& params);

struct FamilyEnumeration {
    std::vector<Configuration> members;  // sorted by packed string
    std::vector<RectDescriptor> descriptors;
    bool truncated = false;
};
FamilyEnumeration enumerate_family(const GateFamily& f, const TorusLattice& lat, const CouplingParams& params,
                                   std::size_t budget = 1'000'000);

// Classification of a saddle-level configuration into the gate classes.
enum class GateClass { None, W21, W31, W23 };
const char* to_string(GateClass c);
struct GateClassification {
    GateClass cls = GateClass::None;
    std::string family;  // component family name when matched
    std::string descriptor;
};
GateClassification classify_gate(const Configuration& sigma, const CouplingParams& params);

// m -> 1 path through the anchor in W(m,1).
LatticePath reference_path_m_to_1(Spin m, const Configuration& anchor, const CouplingParams& params);

struct ColumnSweep {
    std::vector<int> columns;     // each column once, consecutive entries adjacent
    std::vector<int> start_rows;  // per column, empty = 0
    bool upward = false;          // within-column direction (cyclic from the start row)
    bool rows_instead = false;    // sweep rows instead of columns (K = L only)
};

// 2 -> 3 column sweep; throws std::invalid_argument on a malformed order.
LatticePath reference_path_2_to_3(const ColumnSweep& sweep, const TorusLattice& lat, const CouplingParams& params);
ColumnSweep default_sweep(const TorusLattice& lat);

// 2 -> 3 sweep steered through sigma, which must belong to one of the W(2,3) component families.
LatticePath steered_path_2_to_3(const Configuration& sigma, const GateFamily& f, const CouplingParams& params);

}  // namespace potts
