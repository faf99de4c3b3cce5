#include <doctest.h>

#include <cstdio>

#include "bankfuse/fusion.hpp"
#include "support/gradcheck.hpp"

using namespace bankfuse;

namespace {
std::vector<Matrix> random_bank(int n, int rows, int d, uint64_t seed) {
    Rng rng(seed);
    std::vector<Matrix> bank;
    for (int i = 0; i < n; ++i) bank.push_back(gradcheck::random_matrix(rows, d, rng));
    return bank;
}

void zero_attention_values(FusionModel& m) {
    for (auto& blk : m.sab)
        for (auto& h : blk.heads) h.wv = Matrix(h.wv.rows, h.wv.cols);
    for (auto& branch : m.cab.proj)
        for (auto& h : branch) h.wv = Matrix(h.wv.rows, h.wv.cols);
}

const char* kAttentionKinds[] = {"SA_ONLY", "CA_ONLY", "SA2CA", "CA2SA", "SCA"};
}  // namespace

TEST_CASE("architecture name round trip and validation") {
    for (const char* name :
         {"SA_ONLY", "CA_ONLY", "SA2CA", "CA2SA", "SCA", "ADD", "CONCAT", "SINGLE1", "SINGLE_SA0"})
        CHECK(arch_name(parse_arch(name, 2)) == name);
    CHECK_THROWS_AS(parse_arch("SA2CA_X", 2), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_arch("SINGLE5", 2), doctest::Contains("out of range"),
                         std::invalid_argument);
}

TEST_CASE("forward examples") {
    SUBCASE("SINGLE(0) with identity head passes features through") {
        FusionModel m = make_model(parse_arch("SINGLE0", 2), 2, 3, 3, 1, 1);
        m.fc_w = Matrix::identity(3);
        m.fc_b = Matrix(1, 3);
        const auto bank = random_bank(2, 4, 3, 31);
        CHECK(forward(m, bank) == bank[0]);
    }
    SUBCASE("ADD baseline sums branches") {
        FusionModel m = make_model(parse_arch("ADD", 2), 2, 2, 2, 1, 1);
        m.fc_w = Matrix::identity(2);
        m.fc_b = Matrix(1, 2);
        std::vector<Matrix> bank = {Matrix(1, 2, {1, 2}), Matrix(1, 2, {3, 4})};
        CHECK(forward(m, bank) == Matrix(1, 2, {4, 6}));
    }
    SUBCASE("bank size mismatch") {
        FusionModel m = make_model(parse_arch("CONCAT", 2), 2, 3, 2, 1, 1);
        CHECK_THROWS_AS(forward(m, random_bank(3, 1, 3, 32)), std::invalid_argument);
    }
}

TEST_CASE("aggregate semantics") {
    Tape t;
    SUBCASE("concat keeps order") {
        Value a = t.leaf(Matrix(1, 1, {1})), b = t.leaf(Matrix(1, 1, {2}));
        CHECK(concat_cols({a, b}).m() == Matrix(1, 2, {1, 2}));
        CHECK_FALSE(concat_cols({b, a}).m() == Matrix(1, 2, {1, 2}));
    }
    SUBCASE("add sums") {
        Value a = t.leaf(Matrix(1, 1, {1})), b = t.leaf(Matrix(1, 1, {2}));
        CHECK(add(a, b).m() == Matrix(1, 1, {3}));
    }
}

TEST_CASE("parameter count formula for SA2CA") {
    const int n = 2, d = 5, classes = 3;
    FusionModel m = make_model(parse_arch("SA2CA", n), n, d, classes, 1, 7);
    const size_t expect = static_cast<size_t>(n) * 3 * d * d    // SABs
                          + static_cast<size_t>(n) * 3 * d * d  // CAB branches
                          + static_cast<size_t>(n) * d * classes + classes;  // head
    CHECK(parameter_count(m) == expect);
    CHECK(parameters(m).size() == static_cast<size_t>(n) * 3 + n * 3 + 2);
}

TEST_CASE("zeroed attention reduces every attention kind to the concat baseline") {
    const int n = 2, d = 4, classes = 3;
    const auto bank = random_bank(n, 5, d, 33);
    FusionModel base = make_model(parse_arch("CONCAT", n), n, d, classes, 1, 55);
    const Matrix expect = forward(base, bank);
    for (const char* kind : kAttentionKinds) {
        FusionModel m = make_model(parse_arch(kind, n), n, d, classes, 1, 99);
        zero_attention_values(m);
        m.fc_w = base.fc_w;
        m.fc_b = base.fc_b;
        INFO(kind);
        CHECK(forward(m, bank) == expect);
    }
    // single-branch analogue: SINGLE_SA collapses onto SINGLE
    FusionModel s = make_model(parse_arch("SINGLE1", n), n, d, classes, 1, 55);
    FusionModel ssa = make_model(parse_arch("SINGLE_SA1", n), n, d, classes, 1, 99);
    zero_attention_values(ssa);
    ssa.fc_w = s.fc_w;
    ssa.fc_b = s.fc_b;
    CHECK(forward(ssa, bank) == forward(s, bank));
}

TEST_CASE("forward is deterministic and finite for every kind") {
    const int n = 3, d = 4, classes = 2;
    const auto bank = random_bank(n, 6, d, 34);
    std::vector<std::string> kinds(std::begin(kAttentionKinds), std::end(kAttentionKinds));
    kinds.insert(kinds.end(), {"ADD", "CONCAT", "SINGLE0", "SINGLE2", "SINGLE_SA1"});
    for (const auto& kind : kinds) {
        FusionModel m = make_model(parse_arch(kind, n), n, d, classes, 1, 4242);
        const Matrix l1 = forward(m, bank);
        const Matrix l2 = forward(m, bank);
        INFO(kind);
        CHECK(l1 == l2);
        CHECK(l1.rows == 6);
        CHECK(l1.cols == classes);
        for (double v : l1.data) CHECK(std::isfinite(v));
    }
}

TEST_CASE("same seed gives identical models, different seeds differ") {
    FusionModel a = make_model(parse_arch("SA2CA", 2), 2, 4, 3, 1, 11);
    FusionModel b = make_model(parse_arch("SA2CA", 2), 2, 4, 3, 1, 11);
    FusionModel c = make_model(parse_arch("SA2CA", 2), 2, 4, 3, 1, 12);
    CHECK(a.fc_w == b.fc_w);
    CHECK(a.sab[0].heads[0].wq == b.sab[0].heads[0].wq);
    CHECK_FALSE(a.fc_w == c.fc_w);
}

TEST_CASE("checkpoint round trip preserves every parameter") {
    for (const auto& [kind, heads] : std::vector<std::pair<const char*, int>>{
             {"SA2CA", 1}, {"SA2CA", 3}, {"SINGLE_SA1", 1}, {"ADD", 1}}) {
        FusionModel m = make_model(parse_arch(kind, 2), 2, 3, 4, heads, 77);
        const std::string path = std::string("ckpt_roundtrip_") + kind + ".tmp";
        save_checkpoint(m, path);
        FusionModel loaded = load_checkpoint(path);
        CHECK(arch_name(loaded.arch) == kind);
        CHECK(loaded.branch_count == m.branch_count);
        CHECK(loaded.classes == m.classes);
        CHECK(loaded.heads == heads);
        auto pa = parameters(m), pb = parameters(loaded);
        REQUIRE(pa.size() == pb.size());
        for (size_t i = 0; i < pa.size(); ++i) {
            CHECK(pa[i].name == pb[i].name);
            CHECK(*pa[i].value == *pb[i].value);
        }
        std::remove(path.c_str());
    }
}

TEST_CASE("multi-head model keeps shapes and the h=1 equivalence") {
    const auto bank = random_bank(2, 3, 8, 35);
    FusionModel m2h = make_model(parse_arch("SA2CA", 2), 2, 8, 3, 2, 5);
    const Matrix l = forward(m2h, bank);
    CHECK(l.cols == 3);
    for (double v : l.data) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(make_model(parse_arch("SA2CA", 2), 2, 6, 3, 4, 5), std::invalid_argument);
}
