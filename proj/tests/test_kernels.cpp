#include <doctest.h>

#include "bankfuse/kernels.hpp"
#include "support/gradcheck.hpp"

using namespace bankfuse;

TEST_CASE("matmul parallel kernel matches serial reference bitwise") {
    Rng rng(11);
    for (auto [r, k, c] : {std::tuple{1, 1, 1}, {3, 4, 2}, {17, 31, 9}, {64, 64, 64},
                           {200, 50, 120}}) {
        const Matrix a = gradcheck::random_matrix(r, k, rng);
        const Matrix b = gradcheck::random_matrix(k, c, rng);
        Matrix serial, parallel, dispatched;
        kernels::matmul_serial(a, b, serial);
        kernels::matmul_omp(a, b, parallel);
        kernels::matmul(a, b, dispatched);
        CHECK(serial == parallel);
        CHECK(serial == dispatched);
    }
}

TEST_CASE("sigmoid map parallel kernel matches serial reference bitwise") {
    Rng rng(12);
    const Matrix x = gradcheck::random_matrix(37, 61, rng, -40.0, 40.0);
    Matrix serial, parallel;
    kernels::map_sigmoid_serial(x, serial);
    kernels::map_sigmoid_omp(x, parallel);
    CHECK(serial == parallel);
}

TEST_CASE("softmax rows parallel kernel matches serial reference bitwise") {
    Rng rng(13);
    const Matrix x = gradcheck::random_matrix(55, 23, rng, -30.0, 30.0);
    Matrix serial, parallel;
    kernels::softmax_rows_serial(x, serial);
    kernels::softmax_rows_omp(x, parallel);
    CHECK(serial == parallel);
}

TEST_CASE("chunked sum is deterministic and near the plain reference") {
    Rng rng(14);
    std::vector<double> v(100013);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    const double plain = kernels::sum_all_serial(v.data(), v.size());
    const double chunked = kernels::sum_all_chunked_serial(v.data(), v.size());
    const double parallel = kernels::sum_all(v.data(), v.size());
    CHECK(parallel == chunked);  // identical chunk combination order
    CHECK(std::fabs(plain - chunked) <= 1e-9 * (1.0 + std::fabs(plain)));
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
    const Matrix a(3, 4), b(2, 5);
    Matrix out;
    CHECK_THROWS_WITH_AS(kernels::matmul(a, b, out),
                         doctest::Contains("3x4"), std::invalid_argument);
}
