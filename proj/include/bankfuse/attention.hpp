#pragma once

#include <vector>

#include "bankfuse/rng.hpp"
#include "bankfuse/tape.hpp"

namespace bankfuse {

/// Query/key/value projection weights for one attention head.
struct ProjectionTriple {
    Matrix wq, wk, wv;  // each head_dim x head_dim
};

/// Tape handles for a leafed ProjectionTriple.
struct TripleRef {
    Value wq, wk, wv;
};

/// Per-branch gate: z = b + sigmoid(q k^T) v with q = b Wq, k = b Wk, v = b Wv.
/// q k^T is 1x1 per sample, so the gate is a scalar per row.
struct SelfAttentionBlock {
    int dim = 0;
    std::vector<ProjectionTriple> heads;  // one triple per head, (dim/h)^2 each
    int head_count() const { return static_cast<int>(heads.size()); }
    int head_dim() const { return dim / head_count(); }
};

/// Cross-branch mixer: z_i = b_i + sum_{j!=i} w(b_i,b_j) v(b_j). Weights are
/// sigmoid gated for two branches and softmax normalized over j != i beyond.
struct CrossAttentionBlock {
    int dim = 0;
    int branch_count = 0;
    std::vector<std::vector<ProjectionTriple>> proj;  // [branch][head]
    int head_count() const { return static_cast<int>(proj.at(0).size()); }
    int head_dim() const { return dim / head_count(); }
};

// Construction; projection entries drawn uniform in +-1/sqrt(head_dim).
// Throws std::invalid_argument when dim is not divisible by heads or N < 2.
SelfAttentionBlock make_sab(int dim, int heads, Rng& rng);
CrossAttentionBlock make_cab(int branch_count, int dim, int heads, Rng& rng);

std::vector<TripleRef> leaf_block(Tape& t, const SelfAttentionBlock& blk);
std::vector<std::vector<TripleRef>> leaf_block(Tape& t, const CrossAttentionBlock& blk);

// Attention increments (z - b). Rows of b are independent samples; the 1xd
// case is a batch of one. The *_single variants require exactly one head;
// the *_mha variants slice the feature vector into contiguous equal head
// slices, attend per head, and concatenate, for any head count including 1.
// The unsuffixed entry points dispatch on head count.
Value sab_delta_single(const TripleRef& head, Value b);
Value sab_delta_mha(const std::vector<TripleRef>& heads, Value b);
Value sab_delta(const std::vector<TripleRef>& heads, Value b);

std::vector<Value> cab_delta_single(const std::vector<std::vector<TripleRef>>& proj,
                                    const std::vector<Value>& bank);
std::vector<Value> cab_delta_mha(const std::vector<std::vector<TripleRef>>& proj,
                                 const std::vector<Value>& bank);
std::vector<Value> cab_delta(const std::vector<std::vector<TripleRef>>& proj,
                             const std::vector<Value>& bank);

// Residual-included forwards; the block's weights are leafed onto the tape.
Value sab_forward(Tape& t, const SelfAttentionBlock& blk, Value b);
std::vector<Value> cab_forward(Tape& t, const CrossAttentionBlock& blk,
                               const std::vector<Value>& bank);

}  // namespace bankfuse
