#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "potts/gates.hpp"
#include "potts/model.hpp"
#include "potts/rng.hpp"

namespace potts {

// Acceptance probabilities exp(-beta [dH]^+) for every (environment, target) pair.
class AcceptanceTable {
public:
    AcceptanceTable(const CouplingParams& params, double beta);
    double beta() const { return beta_; }
    const LocalDeltaTable& deltas() const { return delta_; }
    double accept(int env, Spin s) const { return acc_[static_cast<std::size_t>(env)][s - 1]; }
    // Sum over the two other targets.
    double leave(int env) const { return leave_[static_cast<std::size_t>(env)]; }

private:
    double beta_;
    LocalDeltaTable delta_;
    std::array<std::array<double, 3>, LocalDeltaTable::kEnvCount> acc_{};
    std::array<double, LocalDeltaTable::kEnvCount> leave_{};
};

struct ChainState {
    Configuration sigma;
    EdgeCensus census;
    double energy = 0.0;
    std::int64_t step = 0;
    Philox rng;

    ChainState(Configuration start, const CouplingParams& params, Philox rng);
    void apply_flip(int v, Spin s, const CouplingParams& params);
};

// One step of the Metropolis chain: a uniform proposal among the 3|V| (vertex, spin)
// pairs, accepted with probability exp(-beta [dH]^+).  Returns true if sigma changed.
bool step(ChainState& state, const AcceptanceTable& acc, const CouplingParams& params);

using TargetFn = std::function<bool(const ChainState&)>;
TargetFn target_monochromatic(std::vector<Spin> spins);

enum class Engine { Metropolis, RejectionFree };

struct HittingOptions {
    double beta = 1.0;
    std::int64_t max_steps = 1'000'000;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    Engine engine = Engine::RejectionFree;
    bool classify = true;  // classify saddle-level states into gate classes
};

struct GateHit {
    std::int64_t step = 0;
    GateClass cls = GateClass::None;
    std::string family;
    std::string config;
};

struct HittingRecord {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    double beta = 0.0;
    std::int64_t tau = 0;
    bool censored = false;
    double max_energy = 0.0;
    std::optional<GateHit> first_level_hit;  // first state with H = H(2) + Gamma*
    std::optional<GateHit> first_gate_hit;   // first state inside a gate class
    bool visited_w_m1 = false;
    bool visited_w23 = false;
    std::int64_t moves = 0;  // accepted flips
};

// Throws std::invalid_argument when the start already satisfies the target.
HittingRecord simulate_hitting(const Configuration& start, const TargetFn& target, const CouplingParams& params,
                               const HittingOptions& opt);

struct RecurrenceOptions {
    std::vector<double> betas{2.0};
    int replicas = 1000;
    double epsilon = 0.5;
    std::uint64_t seed = 1;
    std::int64_t max_steps = 0;  // 0: twice the bound
    int threads = 1;
};

struct RecurrenceRow {
    double beta = 0.0;
    double bound = 0.0;  // exp(beta [2(l*-1)(gamma23 + gamma1) + epsilon])
    int replicas = 0;
    int excluded = 0;    // random starts already monochromatic
    int violations = 0;  // tau > bound or censored
    std::int64_t max_tau = 0;
    double median_tau = 0.0;
    std::vector<HittingRecord> records;
};
std::vector<RecurrenceRow> recurrence_experiment(const CouplingParams& params, const TorusLattice& lat,
                                                 const RecurrenceOptions& opt);

struct SplitOptions {
    double beta = 2.0;
    int replicas = 200;
    std::uint64_t seed = 1;
    std::int64_t max_steps = 1'000'000'000'000LL;
    int threads = 1;
};

struct Proportion {
    int count = 0;
    int total = 0;
    double value() const { return total ? static_cast<double>(count) / total : 0.0; }
    std::pair<double, double> wilson(double z = 1.96) const;
};

struct SplitReport {
    Proportion direct;     // first gate hit in W(2,1)
    Proportion via_23;     // first gate hit in W(2,3)
    int unclassified = 0;  // no gate hit before 1 (or censored)
    std::vector<HittingRecord> records;
};
SplitReport transition_split_experiment(const CouplingParams& params, const TorusLattice& lat,
                                        const SplitOptions& opt);

// Runs 2 -> 1 hitting replicas with streams 0..replicas-1, in parallel, results in stream order.
std::vector<HittingRecord> hitting_replicas(const Configuration& start, const TargetFn& target,
                                            const CouplingParams& params, const HittingOptions& base, int replicas,
                                            int threads);

// Median when more than half the records are uncensored; nullopt otherwise.
std::optional<double> censored_median(const std::vector<HittingRecord>& recs);

std::string records_csv(const std::vector<HittingRecord>& recs, bool header = true);

}  // namespace potts
