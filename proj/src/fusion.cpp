#include "bankfuse/fusion.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bankfuse {

namespace {
const struct {
    ArchKind kind;
    const char* name;
} kPlainNames[] = {
    {ArchKind::SaOnly, "SA_ONLY"}, {ArchKind::CaOnly, "CA_ONLY"},
    {ArchKind::Sa2Ca, "SA2CA"},    {ArchKind::Ca2Sa, "CA2SA"},
    {ArchKind::Sca, "SCA"},        {ArchKind::AddBaseline, "ADD"},
    {ArchKind::ConcatBaseline, "CONCAT"},
};
}  // namespace

Architecture parse_arch(const std::string& name, int branch_count) {
    for (const auto& e : kPlainNames)
        if (name == e.name) return {e.kind, 0};
    auto parse_indexed = [&](const std::string& prefix, ArchKind kind, Architecture& out) {
        if (name.rfind(prefix, 0) != 0) return false;
        const std::string digits = name.substr(prefix.size());
        if (digits.empty()) return false;
        int idx = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec != std::errc() || p != digits.data() + digits.size()) return false;
        if (idx < 0 || idx >= branch_count)
            throw std::invalid_argument("architecture " + name + ": branch index out of range for " +
                                        std::to_string(branch_count) + " banks");
        out = {kind, idx};
        return true;
    };
    Architecture arch;
    if (parse_indexed("SINGLE_SA", ArchKind::SingleSa, arch)) return arch;
    if (parse_indexed("SINGLE", ArchKind::Single, arch)) return arch;
    throw std::invalid_argument("unknown architecture: " + name);
}

std::string arch_name(const Architecture& arch) {
    for (const auto& e : kPlainNames)
        if (arch.kind == e.kind) return e.name;
    if (arch.kind == ArchKind::Single) return "SINGLE" + std::to_string(arch.index);
    return "SINGLE_SA" + std::to_string(arch.index);
}

FusionModel make_model(const Architecture& arch, int branch_count, int feature_dim, int classes,
                       int heads, uint64_t seed) {
    if (branch_count < 1) throw std::invalid_argument("make_model: need at least one branch");
    if (classes < 2) throw std::invalid_argument("make_model: need at least two classes");
    if (arch.single_branch() && arch.index >= branch_count)
        throw std::invalid_argument("make_model: single-branch index out of range");
    FusionModel m;
    m.arch = arch;
    m.branch_count = branch_count;
    m.feature_dim = feature_dim;
    m.classes = classes;
    m.heads = heads;
    m.init_seed = seed;

    Rng rng(seed);
    if (arch.uses_sab()) {
        const int blocks = arch.kind == ArchKind::SingleSa ? 1 : branch_count;
        for (int i = 0; i < blocks; ++i) m.sab.push_back(make_sab(feature_dim, heads, rng));
    }
    if (arch.uses_cab()) m.cab = make_cab(branch_count, feature_dim, heads, rng);

    const int in_dim = m.head_in_dim();
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    m.fc_w = Matrix(in_dim, classes);
    for (auto& v : m.fc_w.data) v = rng.uniform(-bound, bound);
    m.fc_b = Matrix(1, classes);
    return m;
}

std::vector<ParamRef> parameters(FusionModel& model) {
    std::vector<ParamRef> out;
    auto push_triples = [&out](const std::string& prefix, std::vector<ProjectionTriple>& heads) {
        for (size_t h = 0; h < heads.size(); ++h) {
            const std::string hp = prefix + ".h" + std::to_string(h);
            out.push_back({hp + ".Wq", &heads[h].wq});
            out.push_back({hp + ".Wk", &heads[h].wk});
            out.push_back({hp + ".Wv", &heads[h].wv});
        }
    };
    for (size_t i = 0; i < model.sab.size(); ++i)
        push_triples("sab." + std::to_string(i), model.sab[i].heads);
    for (size_t i = 0; i < model.cab.proj.size(); ++i)
        push_triples("cab." + std::to_string(i), model.cab.proj[i]);
    out.push_back({"fc.W", &model.fc_w});
    out.push_back({"fc.b", &model.fc_b});
    return out;
}

size_t parameter_count(const FusionModel& model) {
    size_t n = 0;
    for (const auto& blk : model.sab)
        for (const auto& p : blk.heads) n += p.wq.size() + p.wk.size() + p.wv.size();
    for (const auto& branch : model.cab.proj)
        for (const auto& p : branch) n += p.wq.size() + p.wk.size() + p.wv.size();
    return n + model.fc_w.size() + model.fc_b.size();
}

namespace {
Matrix standardized(const FusionModel& m, int branch, const Matrix& b) {
    Matrix out = b;
    const Matrix& mu = m.scaler_mean[branch];
    const Matrix& sd = m.scaler_std[branch];
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out(i, j) = (out(i, j) - mu(0, j)) / sd(0, j);
    return out;
}
}  // namespace

ForwardGraph forward_graph(Tape& t, const FusionModel& model, const std::vector<Matrix>& bank) {
    const int n = model.branch_count;
    if (static_cast<int>(bank.size()) != n)
        throw std::invalid_argument("forward: bank has " + std::to_string(bank.size()) +
                                    " branches, model expects " + std::to_string(n));
    const int rows = bank[0].rows;
    for (const Matrix& b : bank) {
        if (b.cols != model.feature_dim || b.rows != rows)
            throw std::invalid_argument("forward: branch shape " + b.shape_str() +
                                        " does not match d=" + std::to_string(model.feature_dim));
    }

    ForwardGraph g;
    // leaf order matches parameters(): SAB triples, CAB triples, fc.W, fc.b
    std::vector<std::vector<TripleRef>> sab_refs;
    for (const auto& blk : model.sab) {
        sab_refs.push_back(leaf_block(t, blk));
        for (const TripleRef& r : sab_refs.back()) {
            g.params.push_back(r.wq);
            g.params.push_back(r.wk);
            g.params.push_back(r.wv);
        }
    }
    std::vector<std::vector<TripleRef>> cab_refs;
    if (model.arch.uses_cab()) {
        cab_refs = leaf_block(t, model.cab);
        for (const auto& branch : cab_refs)
            for (const TripleRef& r : branch) {
                g.params.push_back(r.wq);
                g.params.push_back(r.wk);
                g.params.push_back(r.wv);
            }
    }
    Value fc_w = t.leaf(model.fc_w);
    Value fc_b = t.leaf(model.fc_b);
    g.params.push_back(fc_w);
    g.params.push_back(fc_b);

    std::vector<Value> inputs(n);
    for (int i = 0; i < n; ++i)
        inputs[i] = t.leaf(model.standardize ? standardized(model, i, bank[i]) : bank[i]);

    Value agg;
    switch (model.arch.kind) {
        case ArchKind::Single:
            agg = inputs[model.arch.index];
            break;
        case ArchKind::SingleSa: {
            Value b = inputs[model.arch.index];
            agg = add(b, sab_delta(sab_refs[0], b));
            break;
        }
        case ArchKind::SaOnly: {
            std::vector<Value> z(n);
            for (int i = 0; i < n; ++i) z[i] = add(inputs[i], sab_delta(sab_refs[i], inputs[i]));
            agg = concat_cols(z);
            break;
        }
        case ArchKind::CaOnly: {
            std::vector<Value> deltas = cab_delta(cab_refs, inputs);
            std::vector<Value> z(n);
            for (int i = 0; i < n; ++i) z[i] = add(inputs[i], deltas[i]);
            agg = concat_cols(z);
            break;
        }
        case ArchKind::Sa2Ca: {
            std::vector<Value> s(n);
            for (int i = 0; i < n; ++i) s[i] = add(inputs[i], sab_delta(sab_refs[i], inputs[i]));
            std::vector<Value> deltas = cab_delta(cab_refs, s);
            std::vector<Value> z(n);
            for (int i = 0; i < n; ++i) z[i] = add(s[i], deltas[i]);
            agg = concat_cols(z);
            break;
        }
        case ArchKind::Ca2Sa: {
            std::vector<Value> deltas = cab_delta(cab_refs, inputs);
            std::vector<Value> c(n), z(n);
            for (int i = 0; i < n; ++i) c[i] = add(inputs[i], deltas[i]);
            for (int i = 0; i < n; ++i) z[i] = add(c[i], sab_delta(sab_refs[i], c[i]));
            agg = concat_cols(z);
            break;
        }
        case ArchKind::Sca: {
            // both blocks see the raw inputs; one shared residual per branch
            std::vector<Value> deltas = cab_delta(cab_refs, inputs);
            std::vector<Value> z(n);
            for (int i = 0; i < n; ++i)
                z[i] = add(inputs[i], add(sab_delta(sab_refs[i], inputs[i]), deltas[i]));
            agg = concat_cols(z);
            break;
        }
        case ArchKind::AddBaseline: {
            agg = inputs[0];
            for (int i = 1; i < n; ++i) agg = add(agg, inputs[i]);
            break;
        }
        case ArchKind::ConcatBaseline:
            agg = n == 1 ? inputs[0] : concat_cols(inputs);
            break;
    }
    g.logits = add_row_bias(matmul(agg, fc_w), fc_b);
    return g;
}

Matrix forward(const FusionModel& model, const std::vector<Matrix>& bank) {
    Tape t;
    return forward_graph(t, model, bank).logits.m();
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

namespace {
double parse_double_str(const std::string& s, const std::string& where) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw std::runtime_error(where + ": bad number '" + s + "'");
    return v;
}

void write_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
    os << "param " << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            if (j) os << ' ';
            os << format_double(m(i, j));
        }
        os << '\n';
    }
}

Matrix read_matrix(std::istream& is, const std::string& expected_name, const std::string& path) {
    std::string line;
    if (!std::getline(is, line))
        throw std::runtime_error(path + ": truncated checkpoint, expected param " + expected_name);
    std::istringstream hs(line);
    std::string tag, name;
    int rows = 0, cols = 0;
    if (!(hs >> tag >> name >> rows >> cols) || tag != "param")
        throw std::runtime_error(path + ": bad param header '" + line + "'");
    if (name != expected_name)
        throw std::runtime_error(path + ": expected param " + expected_name + ", found " + name);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (!std::getline(is, line)) throw std::runtime_error(path + ": truncated param " + name);
        std::istringstream rs(line);
        std::string tok;
        for (int j = 0; j < cols; ++j) {
            if (!(rs >> tok)) throw std::runtime_error(path + ": short row in param " + name);
            m(i, j) = parse_double_str(tok, path);
        }
    }
    return m;
}
}  // namespace

void save_checkpoint(const FusionModel& model, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os << "#ckpt kind=" << arch_name(model.arch) << " N=" << model.branch_count
       << " d=" << model.feature_dim << " classes=" << model.classes << " heads=" << model.heads
       << " seed=" << model.init_seed << " standardize=" << (model.standardize ? 1 : 0) << '\n';
    FusionModel& mut = const_cast<FusionModel&>(model);
    for (const ParamRef& p : parameters(mut)) write_matrix(os, p.name, *p.value);
    if (model.standardize)
        for (int i = 0; i < model.branch_count; ++i) {
            write_matrix(os, "scaler." + std::to_string(i) + ".mean", model.scaler_mean[i]);
            write_matrix(os, "scaler." + std::to_string(i) + ".std", model.scaler_std[i]);
        }
    if (!os) throw std::runtime_error("write failed: " + path);
}

FusionModel load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string header;
    if (!std::getline(is, header) || header.rfind("#ckpt ", 0) != 0)
        throw std::runtime_error(path + ": missing #ckpt header");
    std::istringstream hs(header.substr(6));
    std::string kind;
    int n = 0, d = 0, classes = 0, heads = 1, std_flag = 0;
    uint64_t seed = 0;
    std::string tok;
    while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::runtime_error(path + ": bad header field " + tok);
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "kind") kind = val;
        else if (key == "N") n = std::stoi(val);
        else if (key == "d") d = std::stoi(val);
        else if (key == "classes") classes = std::stoi(val);
        else if (key == "heads") heads = std::stoi(val);
        else if (key == "seed") seed = std::stoull(val);
        else if (key == "standardize") std_flag = std::stoi(val);
        else throw std::runtime_error(path + ": unknown header field " + key);
    }
    FusionModel m = make_model(parse_arch(kind, n), n, d, classes, heads, seed);
    for (const ParamRef& p : parameters(m)) {
        Matrix loaded = read_matrix(is, p.name, path);
        if (!loaded.same_shape(*p.value))
            throw std::runtime_error(path + ": param " + p.name + " is " + loaded.shape_str() +
                                     ", expected " + p.value->shape_str());
        *p.value = std::move(loaded);
    }
    if (std_flag) {
        m.standardize = true;
        for (int i = 0; i < n; ++i) {
            m.scaler_mean.push_back(read_matrix(is, "scaler." + std::to_string(i) + ".mean", path));
            m.scaler_std.push_back(read_matrix(is, "scaler." + std::to_string(i) + ".std", path));
        }
    }
    return m;
}

}  // namespace bankfuse
