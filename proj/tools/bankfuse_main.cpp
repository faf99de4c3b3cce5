// bankfuse: fuse pre-trained feature banks with attention blocks, train the
// fused classifier, and verify the discrete information-theory bounds that
// motivate the aggregation.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "bankfuse/infotheory.hpp"
#include "bankfuse/training.hpp"

namespace bf = bankfuse;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int run_train(const std::string& bank_path, const std::string& arch_name,
              const std::string& config_path, const std::string& out_path,
              double label_fraction_override, int heads, int64_t seed_override) {
    const bf::FeatureBankDataset data = bf::load_bank(bank_path);
    bf::TrainConfig cfg = bf::load_train_config(config_path);
    if (label_fraction_override > 0.0) {
        if (label_fraction_override > 1.0) throw UsageError("--label-fraction must be in (0, 1]");
        cfg.label_fraction = label_fraction_override;
    }
    if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);

    bf::FusionModel model;
    try {
        const bf::Architecture arch = bf::parse_arch(arch_name, data.pretexts);
        model = bf::make_model(arch, data.pretexts, data.dim, data.classes, heads, cfg.seed);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const bf::Metrics metrics = bf::train(model, data, cfg);
    bf::save_checkpoint(model, out_path);
    bf::write_metrics(metrics, out_path + ".metrics");
    std::cout << "trained " << arch_name << " on " << data.size() << " samples, accuracy "
              << bf::format_double(metrics.accuracy) << "\n"
              << "checkpoint: " << out_path << "\nmetrics: " << out_path << ".metrics\n";
    return 0;
}

int run_eval(const std::string& bank_path, const std::string& ckpt_path,
             const std::string& out_path) {
    const bf::FeatureBankDataset data = bf::load_bank(bank_path);
    const bf::FusionModel model = bf::load_checkpoint(ckpt_path);
    const double acc = bf::evaluate(model, data);
    std::cout << "accuracy " << bf::format_double(acc) << "\n";
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        if (!os) throw std::runtime_error("cannot write " + out_path);
        os << "final," << bf::format_double(acc) << '\n';
    }
    return 0;
}

int run_ablate(const std::string& bank_path, const std::string& config_path,
               const std::string& out_path, int heads) {
    const bf::FeatureBankDataset data = bf::load_bank(bank_path);
    const bf::TrainConfig cfg = bf::load_train_config(config_path);
    const auto rows = bf::run_ablation(data, data, cfg, heads);
    bf::write_ablation_csv(rows, out_path);
    for (const auto& row : rows)
        std::cout << bf::arch_name(row.arch) << " accuracy "
                  << bf::format_double(row.metrics.accuracy) << "\n";
    std::cout << rows.size() << " variants -> " << out_path << "\n";
    return 0;
}

int run_verify_theory(int instances, uint64_t seed, int max_arity, const std::string& out_path,
                      bool canonical_xor) {
    if (max_arity < 2) throw UsageError("--max-arity must be >= 2");
    if (instances < 1) throw UsageError("--instances must be >= 1");

    const auto dpi = bf::dpi_sweep(instances, seed, max_arity);
    const auto chain = bf::chain_sweep(instances, seed + 1, max_arity);
    std::vector<bf::AggregationInstance> thm;
    if (canonical_xor) {
        // one hand-built parity instance instead of the random sweep
        for (int t = 0; t < instances; ++t) {
            bf::AggregationInstance inst;
            inst.index = static_cast<uint64_t>(t);
            inst.branch_count = 2;
            inst.report = bf::verify_aggregation_bound(bf::xor_joint());
            thm.push_back(inst);
        }
    } else {
        thm = bf::aggregation_sweep(instances, seed + 2, max_arity);
    }

    int dpi_pass = 0, chain_pass = 0, thm_pass = 0;
    std::ofstream os;
    if (!out_path.empty()) {
        os.open(out_path);
        if (!os) throw std::runtime_error("cannot write " + out_path);
        os << "check,instance,pass,lhs,rhs,margin,assumption_margin,grouped_margin\n";
    }
    auto emit = [&os](const std::string& check, uint64_t idx, bool pass, double lhs, double rhs,
                      double margin, const std::string& extra1, const std::string& extra2) {
        if (!os.is_open()) return;
        os << check << ',' << idx << ',' << (pass ? 1 : 0) << ',' << bf::format_double(lhs) << ','
           << bf::format_double(rhs) << ',' << bf::format_double(margin) << ',' << extra1 << ','
           << extra2 << '\n';
    };
    for (const auto& r : dpi) {
        dpi_pass += r.report.holds;
        emit("dpi", r.index, r.report.holds, r.report.i_yz, r.report.i_yx,
             r.report.i_yx - r.report.i_yz, "", "");
    }
    for (const auto& r : chain) {
        chain_pass += r.pass;
        emit("chain", r.index, r.pass, r.lhs, r.rhs, r.abs_diff, "", "");
    }
    for (const auto& r : thm) {
        thm_pass += r.report.inequality_ok;
        emit("aggregation", r.index, r.report.inequality_ok, r.report.joint_mi,
             r.report.best_single_mi, r.report.margin, bf::format_double(r.report.pairwise_min),
             bf::format_double(r.report.grouped_min));
    }

    std::printf("dpi       %d/%d  (I(y;z) <= I(y;x))\n", dpi_pass, instances);
    std::printf("chain     %d/%d  (I(y;b1,b2) = I(y;b1) + I(b2;y|b1))\n", chain_pass, instances);
    std::printf("aggregation  %d/%d  (I(y;b_1..b_N) > max_i I(y;b_i), assumption prechecked)\n",
                thm_pass, instances);
    if (!thm.empty()) {
        double min_margin = thm[0].report.margin;
        for (const auto& r : thm) min_margin = std::min(min_margin, r.report.margin);
        std::printf("aggregation minimum margin: %s bits\n", bf::format_double(min_margin).c_str());
    }
    const bool all = dpi_pass == instances && chain_pass == instances && thm_pass == instances;
    std::printf("%s\n", all ? "all checks passed" : "CHECK FAILURES PRESENT");
    return all ? 0 : 1;
}

int run_gen_synthetic(const std::string& kind_name, int dim, int banks, int classes, int train_n,
                      int test_n, double sigma, uint64_t seed, const std::string& out_train,
                      const std::string& out_test) {
    bf::SyntheticTaskSpec spec;
    try {
        spec.kind = bf::parse_synthetic_kind(kind_name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    spec.dim = dim;
    spec.pretexts = banks;
    spec.classes = classes;
    spec.train_samples = train_n;
    spec.test_samples = test_n;
    spec.sigma = sigma;
    spec.seed = seed;
    const bf::SyntheticData data = bf::gen_synthetic(spec);
    bf::save_bank(data.train, out_train);
    bf::save_bank(data.test, out_test);
    std::cout << "wrote " << data.train.size() << " train samples to " << out_train << " and "
              << data.test.size() << " test samples to " << out_test << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention-based fusion of pre-trained feature banks"};
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "train one architecture on a bank file");
    std::string bank_path, arch, config_path, out_path;
    double label_fraction = -1.0;
    int heads = 1;
    int64_t seed = -1;
    train->add_option("--bank", bank_path, "bank csv")->required();
    train->add_option("--arch", arch, "architecture kind")->required();
    train->add_option("--config", config_path, "train config file")->required();
    train->add_option("--out", out_path, "checkpoint output path")->required();
    train->add_option("--label-fraction", label_fraction, "stratified label fraction override");
    train->add_option("--heads", heads, "attention heads")->check(CLI::PositiveNumber);
    train->add_option("--seed", seed, "seed override");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a bank file");
    std::string eval_bank, eval_ckpt, eval_out;
    eval->add_option("--bank", eval_bank, "bank csv")->required();
    eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
    eval->add_option("--out", eval_out, "optional metrics output");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train every architecture variant, emit csv");
    std::string ab_bank, ab_config, ab_out;
    int ab_heads = 1;
    ablate->add_option("--bank", ab_bank, "bank csv")->required();
    ablate->add_option("--config", ab_config, "train config file")->required();
    ablate->add_option("--out", ab_out, "csv output path")->required();
    ablate->add_option("--heads", ab_heads, "attention heads")->check(CLI::PositiveNumber);

    // verify-theory
    auto* verify = app.add_subcommand("verify-theory", "randomized DPI/chain/aggregation checks");
    int instances = 200, max_arity = 4;
    uint64_t vseed = 1;
    std::string vout;
    bool canonical_xor = false;
    verify->add_option("--instances", instances, "instances per check");
    verify->add_option("--seed", vseed, "sweep seed");
    verify->add_option("--max-arity", max_arity, "maximum variable arity");
    verify->add_option("--out", vout, "csv report path");
    verify->add_flag("--canonical-xor", canonical_xor,
                     "use the hand-built parity instance for the aggregation check");

    // gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "generate synthetic bank files");
    std::string kind = "complementary-xor", out_train, out_test;
    int gdim = 8, gbanks = 2, gclasses = 2, gtrain = 2000, gtest = 1000;
    double gsigma = 0.1;
    uint64_t gseed = 1;
    gen->add_option("--kind", kind, "complementary-xor | redundant | separable");
    gen->add_option("--dim", gdim, "feature dimension")->check(CLI::PositiveNumber);
    gen->add_option("--banks", gbanks, "pretext count")->check(CLI::PositiveNumber);
    gen->add_option("--classes", gclasses, "class count")->check(CLI::PositiveNumber);
    gen->add_option("--train-samples", gtrain, "train split size")->check(CLI::PositiveNumber);
    gen->add_option("--test-samples", gtest, "test split size")->check(CLI::PositiveNumber);
    gen->add_option("--sigma", gsigma, "feature noise");
    gen->add_option("--seed", gseed, "generator seed");
    gen->add_option("--out-train", out_train, "train bank path")->required();
    gen->add_option("--out-test", out_test, "test bank path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (*train)
            return run_train(bank_path, arch, config_path, out_path, label_fraction, heads, seed);
        if (*eval) return run_eval(eval_bank, eval_ckpt, eval_out);
        if (*ablate) return run_ablate(ab_bank, ab_config, ab_out, ab_heads);
        if (*verify) return run_verify_theory(instances, vseed, max_arity, vout, canonical_xor);
        if (*gen)
            return run_gen_synthetic(kind, gdim, gbanks, gclasses, gtrain, gtest, gsigma, gseed,
                                     out_train, out_test);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
