#include "bankfuse/attention.hpp"

#include <cmath>

namespace bankfuse {

namespace {
Matrix random_projection(int n, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(n));
    Matrix m(n, n);
    for (auto& v : m.data) v = rng.uniform(-bound, bound);
    return m;
}

ProjectionTriple random_triple(int n, Rng& rng) {
    ProjectionTriple p;
    p.wq = random_projection(n, rng);
    p.wk = random_projection(n, rng);
    p.wv = random_projection(n, rng);
    return p;
}

void check_heads(int dim, int heads) {
    if (heads < 1) throw std::invalid_argument("attention: head count must be >= 1");
    if (dim % heads != 0)
        throw std::invalid_argument("attention: dim " + std::to_string(dim) +
                                    " not divisible by " + std::to_string(heads) + " heads");
}

void check_input(const Matrix& b, int dim, const char* op) {
    if (b.cols != dim)
        throw std::invalid_argument(std::string(op) + ": input is " + b.shape_str() +
                                    ", block dim is " + std::to_string(dim));
}

// gated value for one head slice: sigmoid(q k^T) v, all projections from b
Value gated_value(const TripleRef& p, Value b_q, Value b_kv) {
    Value q = matmul(b_q, p.wq);
    Value k = matmul(b_kv, p.wk);
    Value w = sigmoid(row_dot(q, k));
    Value v = matmul(b_kv, p.wv);
    return scale_rows(w, v);
}
}  // namespace

SelfAttentionBlock make_sab(int dim, int heads, Rng& rng) {
    check_heads(dim, heads);
    SelfAttentionBlock blk;
    blk.dim = dim;
    for (int h = 0; h < heads; ++h) blk.heads.push_back(random_triple(dim / heads, rng));
    return blk;
}

CrossAttentionBlock make_cab(int branch_count, int dim, int heads, Rng& rng) {
    if (branch_count < 2)
        throw std::invalid_argument("cross-attention needs at least 2 branches, got " +
                                    std::to_string(branch_count));
    check_heads(dim, heads);
    CrossAttentionBlock blk;
    blk.dim = dim;
    blk.branch_count = branch_count;
    blk.proj.resize(branch_count);
    for (int i = 0; i < branch_count; ++i)
        for (int h = 0; h < heads; ++h) blk.proj[i].push_back(random_triple(dim / heads, rng));
    return blk;
}

std::vector<TripleRef> leaf_block(Tape& t, const SelfAttentionBlock& blk) {
    std::vector<TripleRef> refs;
    for (const auto& p : blk.heads) refs.push_back({t.leaf(p.wq), t.leaf(p.wk), t.leaf(p.wv)});
    return refs;
}

std::vector<std::vector<TripleRef>> leaf_block(Tape& t, const CrossAttentionBlock& blk) {
    std::vector<std::vector<TripleRef>> refs(blk.proj.size());
    for (size_t i = 0; i < blk.proj.size(); ++i)
        for (const auto& p : blk.proj[i])
            refs[i].push_back({t.leaf(p.wq), t.leaf(p.wk), t.leaf(p.wv)});
    return refs;
}

Value sab_delta_single(const TripleRef& head, Value b) {
    check_input(b.m(), head.wq.m().rows, "sab");
    return gated_value(head, b, b);
}

Value sab_delta_mha(const std::vector<TripleRef>& heads, Value b) {
    const int h = static_cast<int>(heads.size());
    const int dh = heads[0].wq.m().rows;
    check_input(b.m(), h * dh, "sab(mha)");
    std::vector<Value> parts;
    for (int i = 0; i < h; ++i) {
        Value slice = col_range(b, i * dh, dh);
        parts.push_back(gated_value(heads[i], slice, slice));
    }
    return concat_cols(parts);
}

Value sab_delta(const std::vector<TripleRef>& heads, Value b) {
    return heads.size() == 1 ? sab_delta_single(heads[0], b) : sab_delta_mha(heads, b);
}

namespace {
// Cross-attention increments for one head slice. bank_h holds the per-branch
// slices for this head; weights use branch i's Wq against branch j's Wk/Wv.
std::vector<Value> cab_head_deltas(const std::vector<std::vector<TripleRef>>& proj, int head,
                                   const std::vector<Value>& bank_h) {
    const int n = static_cast<int>(bank_h.size());
    std::vector<Value> q(n), k(n), v(n);
    for (int i = 0; i < n; ++i) {
        q[i] = matmul(bank_h[i], proj[i][head].wq);
        k[i] = matmul(bank_h[i], proj[i][head].wk);
        v[i] = matmul(bank_h[i], proj[i][head].wv);
    }
    std::vector<Value> deltas(n);
    for (int i = 0; i < n; ++i) {
        if (n == 2) {
            const int j = 1 - i;
            Value w = sigmoid(row_dot(q[i], k[j]));
            deltas[i] = scale_rows(w, v[j]);
        } else {
            // softmax over the n-1 cross logits, self excluded
            std::vector<Value> logits;
            std::vector<int> others;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                logits.push_back(row_dot(q[i], k[j]));
                others.push_back(j);
            }
            Value weights = softmax_row(concat_cols(logits));
            Value acc;
            for (size_t idx = 0; idx < others.size(); ++idx) {
                Value term = scale_rows(col(weights, static_cast<int>(idx)), v[others[idx]]);
                acc = (idx == 0) ? term : add(acc, term);
            }
            deltas[i] = acc;
        }
    }
    return deltas;
}

void check_bank(const std::vector<std::vector<TripleRef>>& proj, const std::vector<Value>& bank) {
    if (bank.size() < 2)
        throw std::invalid_argument("cab: need at least 2 branches, got " +
                                    std::to_string(bank.size()));
    if (bank.size() != proj.size())
        throw std::invalid_argument("cab: bank has " + std::to_string(bank.size()) +
                                    " branches, block has " + std::to_string(proj.size()));
}
}  // namespace

std::vector<Value> cab_delta_single(const std::vector<std::vector<TripleRef>>& proj,
                                    const std::vector<Value>& bank) {
    check_bank(proj, bank);
    const int dh = proj[0][0].wq.m().rows;
    for (const Value& b : bank) check_input(b.m(), dh, "cab");
    return cab_head_deltas(proj, 0, bank);
}

std::vector<Value> cab_delta_mha(const std::vector<std::vector<TripleRef>>& proj,
                                 const std::vector<Value>& bank) {
    check_bank(proj, bank);
    const int n = static_cast<int>(bank.size());
    const int h = static_cast<int>(proj[0].size());
    const int dh = proj[0][0].wq.m().rows;
    for (const Value& b : bank) check_input(b.m(), h * dh, "cab(mha)");
    // per-branch list of per-head increments, concatenated last
    std::vector<std::vector<Value>> parts(n);
    for (int head = 0; head < h; ++head) {
        std::vector<Value> bank_h;
        for (const Value& b : bank) bank_h.push_back(col_range(b, head * dh, dh));
        std::vector<Value> deltas = cab_head_deltas(proj, head, bank_h);
        for (int i = 0; i < n; ++i) parts[i].push_back(deltas[i]);
    }
    std::vector<Value> out(n);
    for (int i = 0; i < n; ++i) out[i] = concat_cols(parts[i]);
    return out;
}

std::vector<Value> cab_delta(const std::vector<std::vector<TripleRef>>& proj,
                             const std::vector<Value>& bank) {
    return proj.at(0).size() == 1 ? cab_delta_single(proj, bank) : cab_delta_mha(proj, bank);
}

Value sab_forward(Tape& t, const SelfAttentionBlock& blk, Value b) {
    return add(b, sab_delta(leaf_block(t, blk), b));
}

std::vector<Value> cab_forward(Tape& t, const CrossAttentionBlock& blk,
                               const std::vector<Value>& bank) {
    std::vector<Value> deltas = cab_delta(leaf_block(t, blk), bank);
    std::vector<Value> out(bank.size());
    for (size_t i = 0; i < bank.size(); ++i) out[i] = add(bank[i], deltas[i]);
    return out;
}

}  // namespace bankfuse
