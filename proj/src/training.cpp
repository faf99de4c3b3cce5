#include "bankfuse/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "bankfuse/kernels.hpp"
#include "bankfuse/tape.hpp"

namespace bankfuse {

void TrainConfig::validate() const {
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (!(label_fraction > 0.0 && label_fraction <= 1.0))
        throw std::invalid_argument("config: label_fraction must be in (0, 1]");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("config: momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be >= 0");
    for (size_t i = 0; i < lr_drop_epochs.size(); ++i) {
        if (lr_drop_epochs[i] >= epochs)
            throw std::invalid_argument("config: lr_drop_epochs must be < epochs");
        if (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1])
            throw std::invalid_argument("config: lr_drop_epochs must be strictly increasing");
    }
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    TrainConfig cfg;
    std::string line;
    size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "batch_size") cfg.batch_size = std::stoi(val);
            else if (key == "momentum") cfg.momentum = std::stod(val);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
            else if (key == "lr0") cfg.lr0 = std::stod(val);
            else if (key == "epochs") cfg.epochs = std::stoi(val);
            else if (key == "lr_drop_factor") cfg.lr_drop_factor = std::stod(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "label_fraction") cfg.label_fraction = std::stod(val);
            else if (key == "standardize") cfg.standardize = std::stoi(val) != 0;
            else if (key == "lr_drop_epochs") {
                cfg.lr_drop_epochs.clear();
                std::istringstream ss(val);
                std::string tok;
                while (std::getline(ss, tok, ','))
                    if (!trim(tok).empty()) cfg.lr_drop_epochs.push_back(std::stoi(trim(tok)));
            } else {
                throw std::runtime_error("unknown key '" + key + "'");
            }
        } catch (const std::runtime_error&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                     "'");
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad value '" + val +
                                     "' for " + key);
        }
    }
    cfg.validate();
    return cfg;
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
    int drops = 0;
    for (int d : cfg.lr_drop_epochs)
        if (d <= epoch) ++drops;
    return cfg.lr0 * std::pow(cfg.lr_drop_factor, drops);
}

void sgd_step(const std::vector<ParamRef>& params, const std::vector<Matrix>& grads,
              SgdState& state, double lr, double momentum, double weight_decay) {
    if (params.size() != grads.size())
        throw std::invalid_argument("sgd_step: " + std::to_string(grads.size()) + " grads for " +
                                    std::to_string(params.size()) + " params");
    if (state.velocity.empty()) {
        for (const ParamRef& p : params)
            state.velocity.push_back(Matrix(p.value->rows, p.value->cols));
    }
    for (size_t i = 0; i < params.size(); ++i) {
        Matrix& w = *params[i].value;
        const Matrix& g = grads[i];
        Matrix& v = state.velocity[i];
        require_same_shape(w, g, "sgd_step");
        for (size_t k = 0; k < w.size(); ++k) {
            const double step_g = g.data[k] + weight_decay * w.data[k];
            v.data[k] = momentum * v.data[k] + step_g;
            w.data[k] -= lr * v.data[k];
        }
    }
}

std::vector<size_t> stratified_subsample(const std::vector<int>& labels, int classes,
                                         double fraction, Rng& rng) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("stratified_subsample: fraction must be in (0, 1]");
    std::vector<std::vector<size_t>> by_class(classes);
    for (size_t i = 0; i < labels.size(); ++i) by_class.at(labels[i]).push_back(i);
    std::vector<size_t> keep;
    for (int c = 0; c < classes; ++c) {
        auto& idx = by_class[c];
        if (idx.empty()) continue;
        rng.shuffle(idx);
        // ceil(fraction * n); the epsilon guards against 0.1 * 50 -> 5.0000...4
        const size_t m = static_cast<size_t>(
            std::ceil(fraction * static_cast<double>(idx.size()) - 1e-9));
        idx.resize(std::min(idx.size(), std::max<size_t>(m, 1)));
        keep.insert(keep.end(), idx.begin(), idx.end());
    }
    std::sort(keep.begin(), keep.end());
    return keep;
}

namespace {
void fit_scaler(FusionModel& model, const FeatureBankDataset& data,
                const std::vector<size_t>& rows) {
    model.scaler_mean.clear();
    model.scaler_std.clear();
    for (const Matrix& f : data.features) {
        Matrix mu(1, data.dim), sd(1, data.dim);
        for (int j = 0; j < data.dim; ++j) {
            double s = 0.0;
            for (size_t r : rows) s += f(static_cast<int>(r), j);
            mu(0, j) = s / rows.size();
            double q = 0.0;
            for (size_t r : rows) {
                const double dlt = f(static_cast<int>(r), j) - mu(0, j);
                q += dlt * dlt;
            }
            sd(0, j) = std::max(std::sqrt(q / rows.size()), 1e-12);
        }
        model.scaler_mean.push_back(std::move(mu));
        model.scaler_std.push_back(std::move(sd));
    }
    model.standardize = true;
}

void check_model_data(const FusionModel& model, const FeatureBankDataset& data) {
    if (data.size() == 0) throw std::invalid_argument("train/evaluate: dataset is empty");
    if (data.pretexts != model.branch_count || data.dim != model.feature_dim)
        throw std::invalid_argument("dataset is N=" + std::to_string(data.pretexts) +
                                    " d=" + std::to_string(data.dim) + ", model expects N=" +
                                    std::to_string(model.branch_count) +
                                    " d=" + std::to_string(model.feature_dim));
    if (data.classes > model.classes)
        throw std::invalid_argument("dataset has " + std::to_string(data.classes) +
                                    " classes, model has " + std::to_string(model.classes));
}
}  // namespace

Metrics train(FusionModel& model, const FeatureBankDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    check_model_data(model, data);
    data.validate();

    Rng rng(cfg.seed);
    std::vector<size_t> pool = stratified_subsample(data.labels, data.classes, cfg.label_fraction, rng);
    if (cfg.standardize) fit_scaler(model, data, pool);

    std::vector<ParamRef> params = parameters(model);
    SgdState state;
    Metrics metrics;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate_at(cfg, epoch);
        rng.shuffle(pool);
        double loss_sum = 0.0;
        for (size_t start = 0; start < pool.size(); start += cfg.batch_size) {
            const size_t end = std::min(pool.size(), start + cfg.batch_size);
            const std::vector<size_t> rows(pool.begin() + start, pool.begin() + end);
            std::vector<int> labels(rows.size());
            for (size_t r = 0; r < rows.size(); ++r) labels[r] = data.labels[rows[r]];

            Tape tape;
            ForwardGraph g = forward_graph(tape, model, data.gather(rows));
            Value loss = cross_entropy(g.logits, labels);
            tape.backward(loss);

            std::vector<Matrix> grads;
            grads.reserve(g.params.size());
            for (const Value& p : g.params) grads.push_back(tape.grad(p));
            sgd_step(params, grads, state, lr, cfg.momentum, cfg.weight_decay);
            loss_sum += loss.m()(0, 0) * static_cast<double>(rows.size());
            for (const ParamRef& p : params)
                for (double v : p.value->data)
                    if (!std::isfinite(v))
                        throw std::runtime_error("training diverged: non-finite parameter " +
                                                 p.name + " at epoch " + std::to_string(epoch));
        }
        metrics.epoch_loss.push_back(loss_sum / static_cast<double>(pool.size()));
        metrics.epoch_lr.push_back(lr);
    }
    metrics.accuracy = evaluate(model, data);
    return metrics;
}

double evaluate(const FusionModel& model, const FeatureBankDataset& data) {
    check_model_data(model, data);
    const size_t n = data.size();
    size_t correct = 0;
    const size_t chunk = 512;
    for (size_t start = 0; start < n; start += chunk) {
        const size_t end = std::min(n, start + chunk);
        std::vector<size_t> rows(end - start);
        for (size_t i = start; i < end; ++i) rows[i - start] = i;
        const Matrix logits = forward(model, data.gather(rows));
        for (int r = 0; r < logits.rows; ++r) {
            int best = 0;
            for (int c = 1; c < logits.cols; ++c)
                if (logits(r, c) > logits(r, best)) best = c;
            if (best == data.labels[start + r]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

void write_metrics(const Metrics& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write metrics: " + path);
    for (size_t e = 0; e < m.epoch_loss.size(); ++e)
        os << e << ',' << format_double(m.epoch_lr[e]) << ',' << format_double(m.epoch_loss[e])
           << '\n';
    os << "final," << format_double(m.accuracy) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<AblationRow> run_ablation(const FeatureBankDataset& data,
                                      const FeatureBankDataset& eval_data, const TrainConfig& cfg,
                                      int heads) {
    std::vector<Architecture> variants = {
        {ArchKind::SaOnly, 0}, {ArchKind::CaOnly, 0},      {ArchKind::Sa2Ca, 0},
        {ArchKind::Ca2Sa, 0},  {ArchKind::Sca, 0},         {ArchKind::AddBaseline, 0},
        {ArchKind::ConcatBaseline, 0},
    };
    for (int i = 0; i < data.pretexts; ++i) variants.push_back({ArchKind::Single, i});
    for (int i = 0; i < data.pretexts; ++i) variants.push_back({ArchKind::SingleSa, i});

    std::vector<AblationRow> rows;
    for (const Architecture& arch : variants) {
        // one shared init seed so the comparison isolates the architecture
        FusionModel model =
            make_model(arch, data.pretexts, data.dim, data.classes, heads, cfg.seed);
        AblationRow row;
        row.arch = arch;
        row.metrics = train(model, data, cfg);
        row.metrics.accuracy = evaluate(model, eval_data);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write ablation csv: " + path);
    os << "arch,accuracy\n";
    for (const AblationRow& r : rows)
        os << arch_name(r.arch) << ',' << format_double(r.metrics.accuracy) << '\n';
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace bankfuse
