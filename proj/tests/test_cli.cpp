#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

#include "bankfuse/bankio.hpp"
#include "bankfuse/training.hpp"

namespace {
std::string cli() {
    const char* p = std::getenv("BANKFUSE_CLI");
    REQUIRE_MESSAGE(p != nullptr, "BANKFUSE_CLI must point at the bankfuse binary");
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " > cli_stdout.tmp 2> cli_stderr.tmp";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

void write_config(const std::string& path, int epochs, uint64_t seed) {
    std::ofstream os(path);
    os << "epochs = " << epochs << "\nbatch_size = 64\nseed = " << seed
       << "\nlr_drop_epochs = " << epochs / 2 << "\n";
}

struct Workspace {
    Workspace() {
        REQUIRE(run("gen-synthetic --kind separable --dim 6 --train-samples 300 "
                    "--test-samples 120 --sigma 0.02 --seed 77 --out-train cli_train.csv "
                    "--out-test cli_test.csv") == 0);
        write_config("cli_cfg.tmp", 40, 9);
    }
    ~Workspace() {
        for (const char* f :
             {"cli_train.csv", "cli_test.csv", "cli_cfg.tmp", "cli_stdout.tmp", "cli_stderr.tmp",
              "cli_m.ckpt", "cli_m.ckpt.metrics", "cli_m2.ckpt", "cli_m2.ckpt.metrics",
              "cli_ab.csv", "cli_ab2.csv", "cli_vt.csv", "cli_eval.tmp"})
            std::remove(f);
    }
};
}  // namespace

TEST_CASE("cli end to end") {
    Workspace ws;

    SUBCASE("gen-synthetic output loads and validates") {
        const auto ds = bankfuse::load_bank("cli_train.csv");
        CHECK(ds.size() == 300);
        CHECK(ds.pretexts == 2);
        CHECK(ds.dim == 6);
    }

    SUBCASE("train reaches the metrics file contract and eval agrees") {
        REQUIRE(run("train --bank cli_train.csv --arch SINGLE0 --config cli_cfg.tmp "
                    "--out cli_m.ckpt") == 0);
        const std::string metrics = slurp("cli_m.ckpt.metrics");
        CHECK(metrics.find("final,") != std::string::npos);
        // final accuracy on the separable probe is essentially perfect
        const auto pos = metrics.rfind("final,");
        const double acc = std::stod(metrics.substr(pos + 6));
        CHECK(acc >= 0.99);
        REQUIRE(run("eval --bank cli_test.csv --ckpt cli_m.ckpt --out cli_eval.tmp") == 0);
        CHECK(slurp("cli_eval.tmp").rfind("final,", 0) == 0);
    }

    SUBCASE("identical flags and seed give byte-identical outputs") {
        REQUIRE(run("train --bank cli_train.csv --arch SA2CA --config cli_cfg.tmp "
                    "--out cli_m.ckpt --seed 4") == 0);
        REQUIRE(run("train --bank cli_train.csv --arch SA2CA --config cli_cfg.tmp "
                    "--out cli_m2.ckpt --seed 4") == 0);
        CHECK(slurp("cli_m.ckpt") == slurp("cli_m2.ckpt"));
        CHECK(slurp("cli_m.ckpt.metrics") == slurp("cli_m2.ckpt.metrics"));
    }

    SUBCASE("label fraction override takes ceil(f * n) per class") {
        // library-level check of the exact subsample the CLI applies
        const auto ds = bankfuse::load_bank("cli_train.csv");
        int per_class[2] = {0, 0};
        for (int l : ds.labels) per_class[l]++;
        bankfuse::Rng rng(9);
        const auto keep = bankfuse::stratified_subsample(ds.labels, 2, 0.1, rng);
        int kept[2] = {0, 0};
        for (size_t i : keep) kept[ds.labels[i]]++;
        for (int c = 0; c < 2; ++c)
            CHECK(kept[c] == static_cast<int>(std::ceil(0.1 * per_class[c] - 1e-9)));
        REQUIRE(run("train --bank cli_train.csv --arch SINGLE0 --config cli_cfg.tmp "
                    "--out cli_m.ckpt --label-fraction 0.1") == 0);
    }

    SUBCASE("unknown architecture exits 2 with usage text") {
        CHECK(run("train --bank cli_train.csv --arch NOPE --config cli_cfg.tmp --out x.ckpt") ==
              2);
        CHECK(slurp("cli_stderr.tmp").find("Usage") != std::string::npos);
    }

    SUBCASE("unknown flags are rejected") {
        CHECK(run("train --bank cli_train.csv --arch SINGLE0 --config cli_cfg.tmp "
                  "--out x.ckpt --frobnicate") == 2);
    }

    SUBCASE("missing bank file is a runtime failure, not usage") {
        CHECK(run("train --bank missing.csv --arch SINGLE0 --config cli_cfg.tmp --out x.ckpt") ==
              1);
    }

    SUBCASE("ablate emits 7 + 2N deterministic rows") {
        write_config("cli_cfg.tmp", 3, 5);
        REQUIRE(run("ablate --bank cli_train.csv --config cli_cfg.tmp --out cli_ab.csv") == 0);
        REQUIRE(run("ablate --bank cli_train.csv --config cli_cfg.tmp --out cli_ab2.csv") == 0);
        const std::string csv = slurp("cli_ab.csv");
        CHECK(csv == slurp("cli_ab2.csv"));
        size_t rows = 0;
        for (char c : csv) rows += c == '\n';
        CHECK(rows == 1 + 7 + 2 * 2);  // header + variants
        CHECK(csv.find("SA2CA,") != std::string::npos);
        CHECK(csv.find("SINGLE_SA1,") != std::string::npos);
    }

    SUBCASE("ablate on complementary-xor ranks fusion above both single banks") {
        REQUIRE(run("gen-synthetic --kind complementary-xor --dim 8 --train-samples 1200 "
                    "--test-samples 1 --sigma 0.1 --seed 3 --out-train cli_xor.csv "
                    "--out-test cli_xor_te.csv") == 0);
        write_config("cli_cfg.tmp", 60, 13);
        REQUIRE(run("ablate --bank cli_xor.csv --config cli_cfg.tmp --out cli_ab.csv") == 0);
        std::ifstream is("cli_ab.csv");
        std::string line;
        std::getline(is, line);  // header
        double sa2ca = -1.0, single0 = -1.0, single1 = -1.0;
        while (std::getline(is, line)) {
            const auto comma = line.find(',');
            const std::string name = line.substr(0, comma);
            const double acc = std::stod(line.substr(comma + 1));
            if (name == "SA2CA") sa2ca = acc;
            if (name == "SINGLE0") single0 = acc;
            if (name == "SINGLE1") single1 = acc;
        }
        CHECK(sa2ca > single0);
        CHECK(sa2ca > single1);
        CHECK(sa2ca >= 0.9);
        std::remove("cli_xor.csv");
        std::remove("cli_xor_te.csv");
    }

    SUBCASE("verify-theory sweep passes and writes the csv report") {
        REQUIRE(run("verify-theory --instances 60 --seed 12 --max-arity 4 --out cli_vt.csv") ==
                0);
        const std::string csv = slurp("cli_vt.csv");
        CHECK(csv.rfind("check,instance,pass", 0) == 0);
        CHECK(csv.find("aggregation,") != std::string::npos);
        const std::string out = slurp("cli_stdout.tmp");
        CHECK(out.find("dpi       60/60") != std::string::npos);
    }

    SUBCASE("canonical parity instance shows the one-bit margin") {
        REQUIRE(run("verify-theory --instances 1 --canonical-xor") == 0);
        CHECK(slurp("cli_stdout.tmp").find("minimum margin: 1 bits") != std::string::npos);
    }

    SUBCASE("max arity below 2 is a usage error") {
        CHECK(run("verify-theory --instances 5 --max-arity 1") == 2);
    }
}
