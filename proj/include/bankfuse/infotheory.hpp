#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bankfuse/rng.hpp"

namespace bankfuse {

/// Exact joint probability table over discrete variables. Variable 0 is the
/// label y; variables 1..N are the bank features b_1..b_N. The table is flat
/// with variable 0 slowest (row-major over the arity vector).
struct JointDistribution {
    std::vector<int> arity;
    std::vector<double> p;

    size_t states() const;
    /// sums to 1 within 1e-12, all entries >= 0
    void validate() const;
};

/// Row-stochastic conditional table p(out|in), flat in-major.
struct Channel {
    int in_arity = 0;
    int out_arity = 0;
    std::vector<double> p;
    void validate() const;
};

// All quantities in bits (log base 2), computed exactly by marginalization;
// 0 log 0 terms are dropped. Variable sets are canonically sorted, so
// mutual_information(d, A, B) == mutual_information(d, B, A) bitwise.
double entropy(const JointDistribution& d, std::vector<int> vars);
double mutual_information(const JointDistribution& d, std::vector<int> a, std::vector<int> b);
double conditional_mi(const JointDistribution& d, std::vector<int> a, std::vector<int> b,
                      std::vector<int> c);

/// Extends a 2-variable (y, x) distribution with z drawn from the channel,
/// z independent of y given x.
JointDistribution compose_channel(const JointDistribution& yx, const Channel& x_to_z);

struct DpiReport {
    double i_yx = 0.0;
    double i_yz = 0.0;
    bool holds = false;  // I(y;z) <= I(y;x) + tol
};
DpiReport check_dpi(const JointDistribution& yx, const Channel& x_to_z, double tol = 1e-10);

struct AggregationBoundReport {
    bool assumption_ok = false;  // min pairwise conditional MI above threshold
    double pairwise_min = 0.0;   // min over ordered pairs of I(b_i; y | b_j)
    double grouped_min = 0.0;    // min over i of I(b_{!=i}; y | b_i)
    double joint_mi = 0.0;       // I(y; b_1..b_N), the sufficient-z value
    std::vector<double> single_mi;
    int best_single = 0;  // argmax_i I(y; b_i), the best-match pick
    double best_single_mi = 0.0;
    double margin = 0.0;         // joint_mi - best_single_mi
    bool inequality_ok = false;  // margin > margin_tol, only claimed under the assumption
};

/// Checks the aggregation bound on one instance: when the pairwise
/// complementarity precheck passes, I(y; all banks) must beat every single
/// bank's I(y; b_i) strictly. When the precheck fails the report says so and
/// makes no inequality claim.
AggregationBoundReport verify_aggregation_bound(const JointDistribution& d, double assumption_tol = 1e-6,
                               double margin_tol = 1e-9);

/// Normalized i.i.d. exponentials over the product space; reproducible.
JointDistribution random_joint(const std::vector<int>& arities, uint64_t seed);
JointDistribution random_joint(const std::vector<int>& arities, Rng& rng);
Channel random_channel(int in_arity, int out_arity, Rng& rng);

/// Canonical parity instance: y = b1 xor b2 with independent fair bits.
JointDistribution xor_joint();

// Randomized sweeps. Instance t derives its generator from mix_seed(seed, t),
// so results are a pure function of (count, seed, max_arity); instances fan
// out across threads and are reported in index order.
struct DpiInstance {
    uint64_t index = 0;
    DpiReport report;
};
struct ChainInstance {
    uint64_t index = 0;
    double lhs = 0.0;  // I(y; b1, b2)
    double rhs = 0.0;  // I(y; b1) + I(b2; y | b1)
    double abs_diff = 0.0;
    bool pass = false;
};
struct AggregationInstance {
    uint64_t index = 0;
    int branch_count = 0;
    AggregationBoundReport report;
};

std::vector<DpiInstance> dpi_sweep(int count, uint64_t seed, int max_arity, double tol = 1e-10);
std::vector<ChainInstance> chain_sweep(int count, uint64_t seed, int max_arity,
                                       double tol = 1e-10);
/// Returns `count` instances that pass the assumption precheck, drawn in
/// deterministic index order (failing candidates are skipped, not reported).
std::vector<AggregationInstance> aggregation_sweep(int count, uint64_t seed, int max_arity,
                                             double assumption_tol = 1e-6,
                                             double margin_tol = 1e-9);

}  // namespace bankfuse
