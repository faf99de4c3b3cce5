#include "bankfuse/kernels.hpp"

#include <cmath>
#include <limits>

namespace bankfuse::kernels {

namespace {
// Problem sizes below these run serially; parallel output is identical either
// way, the cutoffs only avoid fork/join overhead on tiny shapes.
constexpr size_t kMatmulFlopCutoff = 1u << 15;
constexpr size_t kMapCutoff = 1u << 14;
constexpr size_t kSumChunk = 4096;

void check_matmul_shapes(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dimensions disagree, " + a.shape_str() +
                                    " * " + b.shape_str());
}

inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, int i) {
    double* o = out.data.data() + static_cast<size_t>(i) * out.cols;
    for (int j = 0; j < out.cols; ++j) o[j] = 0.0;
    const double* ai = a.data.data() + static_cast<size_t>(i) * a.cols;
    for (int k = 0; k < a.cols; ++k) {
        const double aik = ai[k];
        const double* bk = b.data.data() + static_cast<size_t>(k) * b.cols;
        for (int j = 0; j < out.cols; ++j) o[j] += aik * bk[j];
    }
}

inline void softmax_row(const double* in, double* out, int n) {
    double mx = in[0];
    for (int j = 1; j < n; ++j) mx = std::max(mx, in[j]);
    double denom = 0.0;
    for (int j = 0; j < n; ++j) {
        out[j] = std::exp(in[j] - mx);
        denom += out[j];
    }
    const double inv = 1.0 / denom;
    for (int j = 0; j < n; ++j) out[j] *= inv;
}
}  // namespace

double sigmoid_scalar(double x) {
    // Branch-stable form: only exponentiates negative magnitudes, then clamps
    // into the open interval so saturated inputs never round to exactly 0 or 1.
    static const double lo = std::numeric_limits<double>::denorm_min();
    static const double hi = std::nextafter(1.0, 0.0);
    double s;
    if (x >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        s = e / (1.0 + e);
    }
    if (s < lo) s = lo;
    if (s > hi) s = hi;
    return s;
}

void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out) {
    check_matmul_shapes(a, b);
    out = Matrix(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) matmul_row(a, b, out, i);
}

void matmul_omp(const Matrix& a, const Matrix& b, Matrix& out) {
    check_matmul_shapes(a, b);
    out = Matrix(a.rows, b.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < a.rows; ++i) matmul_row(a, b, out, i);
}

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
    check_matmul_shapes(a, b);
    const size_t flops = static_cast<size_t>(a.rows) * a.cols * b.cols;
    if (a.rows > 1 && flops >= kMatmulFlopCutoff)
        matmul_omp(a, b, out);
    else
        matmul_serial(a, b, out);
}

void map_sigmoid_serial(const Matrix& x, Matrix& out) {
    out = Matrix(x.rows, x.cols);
    for (size_t i = 0; i < x.size(); ++i) out.data[i] = sigmoid_scalar(x.data[i]);
}

void map_sigmoid_omp(const Matrix& x, Matrix& out) {
    out = Matrix(x.rows, x.cols);
    const long long n = static_cast<long long>(x.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) out.data[i] = sigmoid_scalar(x.data[i]);
}

void map_sigmoid(const Matrix& x, Matrix& out) {
    if (x.size() >= kMapCutoff)
        map_sigmoid_omp(x, out);
    else
        map_sigmoid_serial(x, out);
}

void softmax_rows_serial(const Matrix& x, Matrix& out) {
    if (x.cols < 1) throw std::invalid_argument("softmax_rows: need at least one column");
    out = Matrix(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i)
        softmax_row(&x.data[static_cast<size_t>(i) * x.cols],
                    &out.data[static_cast<size_t>(i) * x.cols], x.cols);
}

void softmax_rows_omp(const Matrix& x, Matrix& out) {
    if (x.cols < 1) throw std::invalid_argument("softmax_rows: need at least one column");
    out = Matrix(x.rows, x.cols);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.rows; ++i)
        softmax_row(&x.data[static_cast<size_t>(i) * x.cols],
                    &out.data[static_cast<size_t>(i) * x.cols], x.cols);
}

void softmax_rows(const Matrix& x, Matrix& out) {
    if (x.rows > 1 && x.size() >= kMapCutoff)
        softmax_rows_omp(x, out);
    else
        softmax_rows_serial(x, out);
}

double sum_all_serial(const double* p, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += p[i];
    return s;
}

double sum_all_chunked_serial(const double* p, size_t n) {
    double total = 0.0;
    for (size_t c = 0; c < n; c += kSumChunk) {
        const size_t end = std::min(n, c + kSumChunk);
        double part = 0.0;
        for (size_t i = c; i < end; ++i) part += p[i];
        total += part;
    }
    return total;
}

double sum_all(const double* p, size_t n) {
    if (n < 2 * kSumChunk) return sum_all_chunked_serial(p, n);
    const long long nchunks = static_cast<long long>((n + kSumChunk - 1) / kSumChunk);
    std::vector<double> partials(nchunks, 0.0);
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < nchunks; ++c) {
        const size_t begin = static_cast<size_t>(c) * kSumChunk;
        const size_t end = std::min(n, begin + kSumChunk);
        double part = 0.0;
        for (size_t i = begin; i < end; ++i) part += p[i];
        partials[c] = part;
    }
    double total = 0.0;
    for (long long c = 0; c < nchunks; ++c) total += partials[c];
    return total;
}

}  // namespace bankfuse::kernels
