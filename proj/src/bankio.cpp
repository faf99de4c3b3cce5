#include "bankfuse/bankio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bankfuse/fusion.hpp"
#include "bankfuse/rng.hpp"

namespace bankfuse {

void FeatureBankDataset::validate() const {
    if (pretexts < 1 || dim < 1 || classes < 1)
        throw std::runtime_error("bank: N, d and C must all be positive");
    if (static_cast<int>(features.size()) != pretexts)
        throw std::runtime_error("bank: expected " + std::to_string(pretexts) +
                                 " pretext matrices, have " + std::to_string(features.size()));
    const int n = static_cast<int>(size());
    if (static_cast<int>(ids.size()) != n) throw std::runtime_error("bank: id/label count mismatch");
    for (const Matrix& f : features)
        if (f.rows != n || f.cols != dim)
            throw std::runtime_error("bank: pretext matrix is " + f.shape_str() + ", expected " +
                                     std::to_string(n) + "x" + std::to_string(dim));
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= classes)
            throw std::runtime_error("bank: sample " + ids[i] + " has label " +
                                     std::to_string(labels[i]) + " outside [0," +
                                     std::to_string(classes) + ")");
        for (const Matrix& f : features)
            for (int j = 0; j < dim; ++j)
                if (!std::isfinite(f(i, j)))
                    throw std::runtime_error("bank: sample " + ids[i] + " has a non-finite feature");
    }
}

std::vector<Matrix> FeatureBankDataset::gather(const std::vector<size_t>& rows) const {
    std::vector<Matrix> out;
    for (const Matrix& f : features) {
        Matrix b(static_cast<int>(rows.size()), dim);
        for (size_t r = 0; r < rows.size(); ++r)
            for (int j = 0; j < dim; ++j) b(static_cast<int>(r), j) = f(static_cast<int>(rows[r]), j);
        out.push_back(std::move(b));
    }
    return out;
}

namespace {
int parse_header_int(const std::string& header, const std::string& key, const std::string& path) {
    const std::string tag = key + "=";
    const auto pos = header.find(tag);
    if (pos == std::string::npos)
        throw std::runtime_error(path + ": header missing " + key + "=<value>");
    int v = 0;
    const char* begin = header.data() + pos + tag.size();
    const char* end = header.data() + header.size();
    auto [p, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || p == begin)
        throw std::runtime_error(path + ": bad header value for " + key);
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}
}  // namespace

FeatureBankDataset load_bank(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open bank file: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("#bank", 0) != 0)
        throw std::runtime_error(path + ":1: expected '#bank N=<n> d=<d> C=<c>' header");
    FeatureBankDataset ds;
    ds.pretexts = parse_header_int(line, "N", path);
    ds.dim = parse_header_int(line, "d", path);
    ds.classes = parse_header_int(line, "C", path);
    if (ds.pretexts < 1 || ds.dim < 1 || ds.classes < 1)
        throw std::runtime_error(path + ":1: N, d and C must all be positive");
    ds.features.assign(ds.pretexts, Matrix());
    std::vector<std::vector<double>> flat(ds.pretexts);

    size_t lineno = 1;
    const size_t want = 2 + static_cast<size_t>(ds.pretexts) * ds.dim;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv(line);
        if (cells.size() != want)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": row has " +
                                     std::to_string(cells.size()) + " fields, expected " +
                                     std::to_string(want));
        ds.ids.push_back(cells[0]);
        int label = 0;
        {
            const std::string& s = cells[1];
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), label);
            if (ec != std::errc() || p != s.data() + s.size())
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad label '" + s +
                                         "'");
        }
        ds.labels.push_back(label);
        size_t c = 2;
        for (int pt = 0; pt < ds.pretexts; ++pt)
            for (int j = 0; j < ds.dim; ++j, ++c) {
                const std::string& s = cells[c];
                double v = 0.0;
                auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
                if (ec != std::errc() || p != s.data() + s.size())
                    throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                             ": bad feature value '" + s + "'");
                flat[pt].push_back(v);
            }
    }
    const int n = static_cast<int>(ds.ids.size());
    for (int pt = 0; pt < ds.pretexts; ++pt)
        ds.features[pt] = Matrix(n, ds.dim, std::move(flat[pt]));
    ds.validate();
    return ds;
}

void save_bank(const FeatureBankDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write bank file: " + path);
    os << "#bank N=" << ds.pretexts << " d=" << ds.dim << " C=" << ds.classes << '\n';
    for (size_t i = 0; i < ds.size(); ++i) {
        os << ds.ids[i] << ',' << ds.labels[i];
        for (const Matrix& f : ds.features)
            for (int j = 0; j < ds.dim; ++j)
                os << ',' << format_double(f(static_cast<int>(i), j));
        os << '\n';
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
    if (name == "complementary-xor") return SyntheticKind::ComplementaryXor;
    if (name == "redundant") return SyntheticKind::Redundant;
    if (name == "separable") return SyntheticKind::Separable;
    throw std::invalid_argument("unknown synthetic kind: " + name);
}

std::string synthetic_kind_name(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::ComplementaryXor: return "complementary-xor";
        case SyntheticKind::Redundant: return "redundant";
        case SyntheticKind::Separable: return "separable";
    }
    return "?";
}

namespace {
FeatureBankDataset empty_split(const SyntheticTaskSpec& spec, int n, const char* split) {
    FeatureBankDataset ds;
    ds.pretexts = spec.pretexts;
    ds.dim = spec.dim;
    ds.classes = spec.classes;
    ds.split = split;
    ds.features.assign(spec.pretexts, Matrix(n, spec.dim));
    ds.ids.reserve(n);
    ds.labels.assign(n, 0);
    for (int i = 0; i < n; ++i) ds.ids.push_back(std::string(split) + std::to_string(i));
    return ds;
}

// Embedding directions with +-1 entries; unit scale per coordinate keeps the
// signal well clear of sigma-sized noise.
Matrix sign_direction(int dim, Rng& rng) {
    Matrix v(1, dim);
    for (int j = 0; j < dim; ++j) v(0, j) = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    return v;
}

void gen_xor(const SyntheticTaskSpec& spec, SyntheticData& out, Rng& rng) {
    if (spec.pretexts != 2)
        throw std::invalid_argument("complementary-xor requires exactly 2 banks");
    if (spec.classes != 2) throw std::invalid_argument("complementary-xor requires 2 classes");
    const Matrix v1 = sign_direction(spec.dim, rng);
    const Matrix v2 = sign_direction(spec.dim, rng);
    for (FeatureBankDataset* ds : {&out.train, &out.test}) {
        const int n = static_cast<int>(ds->size());
        for (int i = 0; i < n; ++i) {
            const int u1 = rng.uniform01() < 0.5 ? 1 : 0;
            const int u2 = rng.uniform01() < 0.5 ? 1 : 0;
            ds->labels[i] = u1 ^ u2;
            for (int j = 0; j < spec.dim; ++j) {
                ds->features[0](i, j) = u1 * v1(0, j) + spec.sigma * rng.normal();
                ds->features[1](i, j) = u2 * v2(0, j) + spec.sigma * rng.normal();
            }
        }
    }
}

void gen_redundant(const SyntheticTaskSpec& spec, SyntheticData& out, Rng& rng) {
    std::vector<Matrix> centroids;
    for (int c = 0; c < spec.classes; ++c) {
        Matrix mu(1, spec.dim);
        for (int j = 0; j < spec.dim; ++j) mu(0, j) = rng.uniform(-1.0, 1.0);
        centroids.push_back(std::move(mu));
    }
    for (FeatureBankDataset* ds : {&out.train, &out.test}) {
        const int n = static_cast<int>(ds->size());
        for (int i = 0; i < n; ++i) {
            const int y = static_cast<int>(rng.below(spec.classes));
            ds->labels[i] = y;
            for (int pt = 0; pt < spec.pretexts; ++pt)
                for (int j = 0; j < spec.dim; ++j)
                    ds->features[pt](i, j) = centroids[y](0, j) + spec.sigma * rng.normal();
        }
    }
}

void gen_separable(const SyntheticTaskSpec& spec, SyntheticData& out, Rng& rng) {
    if (spec.classes != 2) throw std::invalid_argument("separable requires 2 classes");
    Matrix w(1, spec.dim);
    for (int j = 0; j < spec.dim; ++j) w(0, j) = rng.uniform(-1.0, 1.0);
    const double margin = 0.5;
    for (FeatureBankDataset* ds : {&out.train, &out.test}) {
        const int n = static_cast<int>(ds->size());
        for (int i = 0; i < n; ++i) {
            double dot = 0.0;
            std::vector<double> x(spec.dim);
            do {
                dot = 0.0;
                for (int j = 0; j < spec.dim; ++j) {
                    x[j] = rng.uniform(-1.0, 1.0);
                    dot += x[j] * w(0, j);
                }
            } while (std::fabs(dot) < margin);
            ds->labels[i] = dot > 0.0 ? 1 : 0;
            for (int j = 0; j < spec.dim; ++j)
                ds->features[0](i, j) = x[j] + spec.sigma * rng.normal();
            for (int pt = 1; pt < spec.pretexts; ++pt)
                for (int j = 0; j < spec.dim; ++j)
                    ds->features[pt](i, j) = rng.uniform(-1.0, 1.0);
        }
    }
}
}  // namespace

SyntheticData gen_synthetic(const SyntheticTaskSpec& spec) {
    if (spec.sigma < 0.0) throw std::invalid_argument("gen_synthetic: sigma must be >= 0");
    if (spec.dim < 1 || spec.pretexts < 1 || spec.train_samples < 1 || spec.test_samples < 1)
        throw std::invalid_argument("gen_synthetic: sizes must be positive");
    SyntheticData out;
    out.train = empty_split(spec, spec.train_samples, "train");
    out.test = empty_split(spec, spec.test_samples, "test");
    Rng rng(spec.seed);
    switch (spec.kind) {
        case SyntheticKind::ComplementaryXor: gen_xor(spec, out, rng); break;
        case SyntheticKind::Redundant: gen_redundant(spec, out, rng); break;
        case SyntheticKind::Separable: gen_separable(spec, out, rng); break;
    }
    out.train.validate();
    out.test.validate();
    return out;
}

}  // namespace bankfuse
