#include "bankfuse/infotheory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bankfuse {

size_t JointDistribution::states() const {
    size_t s = 1;
    for (int a : arity) s *= static_cast<size_t>(a);
    return s;
}

void JointDistribution::validate() const {
    if (arity.empty()) throw std::invalid_argument("joint: no variables");
    for (int a : arity)
        if (a < 1) throw std::invalid_argument("joint: every arity must be >= 1");
    if (p.size() != states())
        throw std::invalid_argument("joint: table has " + std::to_string(p.size()) +
                                    " entries, product space is " + std::to_string(states()));
    double total = 0.0;
    for (double v : p) {
        if (v < 0.0) throw std::invalid_argument("joint: negative probability");
        total += v;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw std::invalid_argument("joint: probabilities sum to " + std::to_string(total));
}

void Channel::validate() const {
    if (in_arity < 1 || out_arity < 1) throw std::invalid_argument("channel: arities must be >= 1");
    if (p.size() != static_cast<size_t>(in_arity) * out_arity)
        throw std::invalid_argument("channel: table size mismatch");
    for (int i = 0; i < in_arity; ++i) {
        double row = 0.0;
        for (int o = 0; o < out_arity; ++o) {
            const double v = p[static_cast<size_t>(i) * out_arity + o];
            if (v < 0.0) throw std::invalid_argument("channel: negative probability");
            row += v;
        }
        if (std::fabs(row - 1.0) > 1e-12)
            throw std::invalid_argument("channel: row " + std::to_string(i) + " sums to " +
                                        std::to_string(row));
    }
}

namespace {
std::vector<int> sorted_checked(const JointDistribution& d, std::vector<int> vars,
                                const char* op) {
    std::sort(vars.begin(), vars.end());
    for (size_t i = 0; i < vars.size(); ++i) {
        if (vars[i] < 0 || vars[i] >= static_cast<int>(d.arity.size()))
            throw std::invalid_argument(std::string(op) + ": variable index " +
                                        std::to_string(vars[i]) + " out of range");
        if (i > 0 && vars[i] == vars[i - 1])
            throw std::invalid_argument(std::string(op) + ": duplicate variable index " +
                                        std::to_string(vars[i]));
    }
    return vars;
}

void check_disjoint(const std::vector<int>& a, const std::vector<int>& b, const char* op) {
    for (int x : a)
        for (int y : b)
            if (x == y)
                throw std::invalid_argument(std::string(op) + ": variable sets overlap at index " +
                                            std::to_string(x));
}

std::vector<size_t> strides_of(const std::vector<int>& arity) {
    std::vector<size_t> strides(arity.size(), 1);
    for (int i = static_cast<int>(arity.size()) - 2; i >= 0; --i)
        strides[i] = strides[i + 1] * static_cast<size_t>(arity[i + 1]);
    return strides;
}

// Marginal table over sorted `vars`; a sum over the full joint per cell.
// Size-1 table equal to the total mass when vars is empty.
std::vector<double> marginal(const JointDistribution& d, const std::vector<int>& vars) {
    size_t out_states = 1;
    for (int v : vars) out_states *= static_cast<size_t>(d.arity[v]);
    std::vector<double> out(out_states, 0.0);
    const std::vector<size_t> strides = strides_of(d.arity);
    const size_t n = d.p.size();
    for (size_t idx = 0; idx < n; ++idx) {
        size_t o = 0;
        for (int v : vars) o = o * static_cast<size_t>(d.arity[v]) + (idx / strides[v]) % d.arity[v];
        out[o] += d.p[idx];
    }
    return out;
}

// Flat index into the marginal over sorted `vars` for a full-joint index.
struct MarginalIndexer {
    std::vector<size_t> strides;  // full-table strides of each marginal var
    std::vector<int> arity;       // arities of the marginal vars
    MarginalIndexer(const JointDistribution& d, const std::vector<int>& vars) {
        const std::vector<size_t> full = strides_of(d.arity);
        for (int v : vars) {
            strides.push_back(full[v]);
            arity.push_back(d.arity[v]);
        }
    }
    size_t operator()(size_t full_idx) const {
        size_t o = 0;
        for (size_t k = 0; k < strides.size(); ++k)
            o = o * static_cast<size_t>(arity[k]) + (full_idx / strides[k]) % arity[k];
        return o;
    }
};

constexpr double kLog2 = 0.6931471805599453;  // ln 2
inline double log2_exact(double x) { return std::log(x) / kLog2; }
}  // namespace

double entropy(const JointDistribution& d, std::vector<int> vars) {
    vars = sorted_checked(d, std::move(vars), "entropy");
    const std::vector<double> m = marginal(d, vars);
    double h = 0.0;
    for (double v : m)
        if (v > 0.0) h -= v * log2_exact(v);
    return std::max(h, 0.0);
}

double mutual_information(const JointDistribution& d, std::vector<int> a, std::vector<int> b) {
    a = sorted_checked(d, std::move(a), "mutual_information");
    b = sorted_checked(d, std::move(b), "mutual_information");
    check_disjoint(a, b, "mutual_information");
    if (a.empty() || b.empty())
        throw std::invalid_argument("mutual_information: variable sets must be non-empty");

    std::vector<int> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    std::sort(ab.begin(), ab.end());

    const std::vector<double> pab = marginal(d, ab);
    const std::vector<double> pa = marginal(d, a);
    const std::vector<double> pb = marginal(d, b);

    // iterate the joint marginal once; decode sub-indices per term
    std::vector<int> ab_arity;
    for (int v : ab) ab_arity.push_back(d.arity[v]);
    const std::vector<size_t> ab_strides = strides_of(ab_arity);
    auto sub_index = [&](size_t idx, const std::vector<int>& vars) {
        size_t o = 0;
        for (int v : vars) {
            const auto pos =
                std::lower_bound(ab.begin(), ab.end(), v) - ab.begin();
            o = o * static_cast<size_t>(d.arity[v]) + (idx / ab_strides[pos]) % d.arity[v];
        }
        return o;
    };

    double mi = 0.0;
    for (size_t idx = 0; idx < pab.size(); ++idx) {
        const double pj = pab[idx];
        if (pj <= 0.0) continue;
        mi += pj * log2_exact(pj / (pa[sub_index(idx, a)] * pb[sub_index(idx, b)]));
    }
    return std::max(mi, 0.0);
}

double conditional_mi(const JointDistribution& d, std::vector<int> a, std::vector<int> b,
                      std::vector<int> c) {
    a = sorted_checked(d, std::move(a), "conditional_mi");
    b = sorted_checked(d, std::move(b), "conditional_mi");
    c = sorted_checked(d, std::move(c), "conditional_mi");
    check_disjoint(a, b, "conditional_mi");
    check_disjoint(a, c, "conditional_mi");
    check_disjoint(b, c, "conditional_mi");
    if (a.empty() || b.empty())
        throw std::invalid_argument("conditional_mi: variable sets must be non-empty");
    if (c.empty()) return mutual_information(d, a, b);

    auto sorted_union = [](std::vector<int> u, const std::vector<int>& v) {
        u.insert(u.end(), v.begin(), v.end());
        std::sort(u.begin(), u.end());
        return u;
    };
    const std::vector<int> abc = sorted_union(sorted_union(a, b), c);
    const std::vector<int> ac = sorted_union(a, c);
    const std::vector<int> bc = sorted_union(b, c);

    const std::vector<double> pabc = marginal(d, abc);
    const std::vector<double> pac = marginal(d, ac);
    const std::vector<double> pbc = marginal(d, bc);
    const std::vector<double> pc = marginal(d, c);

    // restricted view: treat the abc marginal as the joint to index into
    JointDistribution view;
    for (int v : abc) view.arity.push_back(d.arity[v]);
    auto remap = [&abc](const std::vector<int>& vars) {
        std::vector<int> out;
        for (int v : vars)
            out.push_back(static_cast<int>(std::lower_bound(abc.begin(), abc.end(), v) -
                                           abc.begin()));
        return out;
    };
    const MarginalIndexer idx_ac(view, remap(ac));
    const MarginalIndexer idx_bc(view, remap(bc));
    const MarginalIndexer idx_c(view, remap(c));

    // I(A;B|C) = sum p(a,b,c) log2[ p(a,b,c) p(c) / (p(a,c) p(b,c)) ]
    double cmi = 0.0;
    for (size_t idx = 0; idx < pabc.size(); ++idx) {
        const double pj = pabc[idx];
        if (pj <= 0.0) continue;
        cmi += pj * log2_exact(pj * pc[idx_c(idx)] / (pac[idx_ac(idx)] * pbc[idx_bc(idx)]));
    }
    return std::max(cmi, 0.0);
}

JointDistribution compose_channel(const JointDistribution& yx, const Channel& x_to_z) {
    yx.validate();
    x_to_z.validate();
    if (yx.arity.size() != 2)
        throw std::invalid_argument("compose_channel: expected a 2-variable (y, x) distribution");
    if (yx.arity[1] != x_to_z.in_arity)
        throw std::invalid_argument("compose_channel: x arity " + std::to_string(yx.arity[1]) +
                                    " does not match channel input arity " +
                                    std::to_string(x_to_z.in_arity));
    JointDistribution out;
    out.arity = {yx.arity[0], yx.arity[1], x_to_z.out_arity};
    out.p.assign(out.states(), 0.0);
    for (int y = 0; y < yx.arity[0]; ++y)
        for (int x = 0; x < yx.arity[1]; ++x) {
            const double base = yx.p[static_cast<size_t>(y) * yx.arity[1] + x];
            for (int z = 0; z < x_to_z.out_arity; ++z)
                out.p[(static_cast<size_t>(y) * yx.arity[1] + x) * x_to_z.out_arity + z] =
                    base * x_to_z.p[static_cast<size_t>(x) * x_to_z.out_arity + z];
        }
    return out;
}

DpiReport check_dpi(const JointDistribution& yx, const Channel& x_to_z, double tol) {
    const JointDistribution yxz = compose_channel(yx, x_to_z);
    DpiReport r;
    r.i_yx = mutual_information(yxz, {0}, {1});
    r.i_yz = mutual_information(yxz, {0}, {2});
    r.holds = r.i_yz <= r.i_yx + tol;
    return r;
}

AggregationBoundReport verify_aggregation_bound(const JointDistribution& d, double assumption_tol,
                               double margin_tol) {
    d.validate();
    const int n = static_cast<int>(d.arity.size()) - 1;
    if (n < 2) throw std::invalid_argument("verify_aggregation_bound: need at least 2 bank variables");

    AggregationBoundReport r;
    r.pairwise_min = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
            if (i == j) continue;
            r.pairwise_min = std::min(r.pairwise_min, conditional_mi(d, {i}, {0}, {j}));
        }
    r.grouped_min = std::numeric_limits<double>::infinity();
    std::vector<int> all;
    for (int i = 1; i <= n; ++i) all.push_back(i);
    for (int i = 1; i <= n; ++i) {
        std::vector<int> rest;
        for (int j = 1; j <= n; ++j)
            if (j != i) rest.push_back(j);
        r.grouped_min = std::min(r.grouped_min, conditional_mi(d, rest, {0}, {i}));
    }
    r.assumption_ok = r.pairwise_min > assumption_tol;

    r.joint_mi = mutual_information(d, {0}, all);
    r.best_single = 1;
    for (int i = 1; i <= n; ++i) {
        r.single_mi.push_back(mutual_information(d, {0}, {i}));
        if (r.single_mi.back() > r.single_mi[r.best_single - 1]) r.best_single = i;
    }
    r.best_single_mi = r.single_mi[r.best_single - 1];
    r.margin = r.joint_mi - r.best_single_mi;
    r.inequality_ok = r.assumption_ok && r.margin > margin_tol;
    return r;
}

JointDistribution random_joint(const std::vector<int>& arities, Rng& rng) {
    for (int a : arities)
        if (a < 1) throw std::invalid_argument("random_joint: every arity must be >= 1");
    if (arities.empty()) throw std::invalid_argument("random_joint: no variables");
    JointDistribution d;
    d.arity = arities;
    d.p.resize(d.states());
    double total = 0.0;
    for (double& v : d.p) {
        v = rng.exponential();
        total += v;
    }
    for (double& v : d.p) v /= total;
    return d;
}

JointDistribution random_joint(const std::vector<int>& arities, uint64_t seed) {
    Rng rng(seed);
    return random_joint(arities, rng);
}

Channel random_channel(int in_arity, int out_arity, Rng& rng) {
    if (in_arity < 1 || out_arity < 1)
        throw std::invalid_argument("random_channel: arities must be >= 1");
    Channel ch;
    ch.in_arity = in_arity;
    ch.out_arity = out_arity;
    ch.p.resize(static_cast<size_t>(in_arity) * out_arity);
    for (int i = 0; i < in_arity; ++i) {
        double row = 0.0;
        for (int o = 0; o < out_arity; ++o) {
            double& v = ch.p[static_cast<size_t>(i) * out_arity + o];
            v = rng.exponential();
            row += v;
        }
        for (int o = 0; o < out_arity; ++o) ch.p[static_cast<size_t>(i) * out_arity + o] /= row;
    }
    return ch;
}

JointDistribution xor_joint() {
    JointDistribution d;
    d.arity = {2, 2, 2};
    d.p.assign(8, 0.0);
    for (int b1 = 0; b1 < 2; ++b1)
        for (int b2 = 0; b2 < 2; ++b2) d.p[static_cast<size_t>((b1 ^ b2)) * 4 + b1 * 2 + b2] = 0.25;
    return d;
}

namespace {
int arity_draw(Rng& rng, int max_arity) { return 2 + static_cast<int>(rng.below(max_arity - 1)); }
}  // namespace

std::vector<DpiInstance> dpi_sweep(int count, uint64_t seed, int max_arity, double tol) {
    if (count < 1) throw std::invalid_argument("dpi_sweep: count must be >= 1");
    if (max_arity < 2) throw std::invalid_argument("dpi_sweep: max arity must be >= 2");
    std::vector<DpiInstance> out(count);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < count; ++t) {
        Rng rng(mix_seed(seed, static_cast<uint64_t>(t)));
        const int ay = arity_draw(rng, max_arity);
        const int ax = arity_draw(rng, max_arity);
        const int az = arity_draw(rng, max_arity);
        const JointDistribution yx = random_joint({ay, ax}, rng);
        const Channel ch = random_channel(ax, az, rng);
        out[t] = {static_cast<uint64_t>(t), check_dpi(yx, ch, tol)};
    }
    return out;
}

std::vector<ChainInstance> chain_sweep(int count, uint64_t seed, int max_arity, double tol) {
    if (count < 1) throw std::invalid_argument("chain_sweep: count must be >= 1");
    if (max_arity < 2) throw std::invalid_argument("chain_sweep: max arity must be >= 2");
    std::vector<ChainInstance> out(count);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < count; ++t) {
        Rng rng(mix_seed(seed, static_cast<uint64_t>(t)));
        const int ay = arity_draw(rng, max_arity);
        const int a1 = arity_draw(rng, max_arity);
        const int a2 = arity_draw(rng, max_arity);
        const JointDistribution d = random_joint({ay, a1, a2}, rng);
        ChainInstance& r = out[t];
        r.index = static_cast<uint64_t>(t);
        // both sides computed through independent marginalization paths
        r.lhs = mutual_information(d, {0}, {1, 2});
        r.rhs = mutual_information(d, {0}, {1}) + conditional_mi(d, {2}, {0}, {1});
        r.abs_diff = std::fabs(r.lhs - r.rhs);
        r.pass = r.abs_diff < tol;
    }
    return out;
}

std::vector<AggregationInstance> aggregation_sweep(int count, uint64_t seed, int max_arity,
                                             double assumption_tol, double margin_tol) {
    if (count < 1) throw std::invalid_argument("aggregation_sweep: count must be >= 1");
    if (max_arity < 2) throw std::invalid_argument("aggregation_sweep: max arity must be >= 2");
    std::vector<AggregationInstance> out;
    uint64_t next_index = 0;
    // evaluate candidates in fixed-size blocks, keep precheck passers in
    // index order; deterministic for any thread count
    while (static_cast<int>(out.size()) < count) {
        const int block = std::max(64, count);
        std::vector<AggregationInstance> cand(block);
#pragma omp parallel for schedule(static)
        for (int t = 0; t < block; ++t) {
            Rng rng(mix_seed(seed, next_index + static_cast<uint64_t>(t)));
            const int n = 2 + static_cast<int>(rng.below(2));  // N in {2, 3}
            std::vector<int> arities = {arity_draw(rng, max_arity)};
            for (int i = 0; i < n; ++i) arities.push_back(arity_draw(rng, max_arity));
            const JointDistribution d = random_joint(arities, rng);
            cand[t].index = next_index + static_cast<uint64_t>(t);
            cand[t].branch_count = n;
            cand[t].report = verify_aggregation_bound(d, assumption_tol, margin_tol);
        }
        for (const AggregationInstance& c : cand) {
            if (!c.report.assumption_ok) continue;
            out.push_back(c);
            if (static_cast<int>(out.size()) == count) break;
        }
        next_index += static_cast<uint64_t>(block);
        if (next_index > static_cast<uint64_t>(count) * 1000 + 100000)
            throw std::runtime_error("aggregation_sweep: assumption precheck rejected too many draws");
    }
    return out;
}

}  // namespace bankfuse
