#pragma once

#include <string>
#include <vector>

#include "bankfuse/matrix.hpp"

namespace bankfuse {

/// A loaded representation bank: for every sample, one length-d feature
/// vector per pretext model plus an integer class label.
struct FeatureBankDataset {
    int pretexts = 0;  // N
    int dim = 0;       // d, uniform across pretexts
    int classes = 0;   // C
    std::string split = "train";
    std::vector<std::string> ids;
    std::vector<int> labels;
    std::vector<Matrix> features;  // per pretext, (samples x dim)

    size_t size() const { return labels.size(); }
    /// Checks label ranges, finiteness and shape agreement; throws
    /// std::runtime_error naming the offending sample.
    void validate() const;
    /// Batch view: rows `rows` of every pretext matrix, in the given order.
    std::vector<Matrix> gather(const std::vector<size_t>& rows) const;
};

// Bank CSV: header line `#bank N=<n> d=<d> C=<c>`, then one row per sample
// `id,label,p1f0,...,p1f{d-1},p2f0,...`. Floats use shortest round-trip
// decimals, so save -> load -> save is byte identical.
FeatureBankDataset load_bank(const std::string& path);
void save_bank(const FeatureBankDataset& ds, const std::string& path);

enum class SyntheticKind { ComplementaryXor, Redundant, Separable };

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string synthetic_kind_name(SyntheticKind kind);

struct SyntheticTaskSpec {
    SyntheticKind kind = SyntheticKind::ComplementaryXor;
    int dim = 8;
    int pretexts = 2;
    int classes = 2;
    int train_samples = 2000;
    int test_samples = 1000;
    double sigma = 0.1;
    uint64_t seed = 1;
};

struct SyntheticData {
    FeatureBankDataset train;
    FeatureBankDataset test;
};

/// Desk-scale synthetic banks.
///  - complementary-xor: label is the parity of two hidden bits; bank i is a
///    0/1-scaled embedding of bit i plus Gaussian noise, so either bank alone
///    carries no label information while the pair determines it.
///  - redundant: every bank embeds the same class centroid (identical rows at
///    sigma = 0).
///  - separable: labels follow a margin-separated linear rule on bank 1;
///    remaining banks are noise.
SyntheticData gen_synthetic(const SyntheticTaskSpec& spec);

}  // namespace bankfuse
