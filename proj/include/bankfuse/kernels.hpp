#pragma once

#include "bankfuse/matrix.hpp"

namespace bankfuse::kernels {

// Dense kernels behind the tape ops. Each has a plain serial reference and
// an OpenMP variant. The parallel variants split work so that every output
// element is produced by exactly one thread with the same serial inner loop
// as the reference, so results are bitwise identical for any thread count.
// The unsuffixed entry points dispatch on problem size.

void matmul_serial(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_omp(const Matrix& a, const Matrix& b, Matrix& out);
void matmul(const Matrix& a, const Matrix& b, Matrix& out);

void map_sigmoid_serial(const Matrix& x, Matrix& out);
void map_sigmoid_omp(const Matrix& x, Matrix& out);
void map_sigmoid(const Matrix& x, Matrix& out);

void softmax_rows_serial(const Matrix& x, Matrix& out);
void softmax_rows_omp(const Matrix& x, Matrix& out);
void softmax_rows(const Matrix& x, Matrix& out);

// Chunked accumulation: partial sums over fixed 4096-element chunks combined
// in chunk order. sum_all parallelizes over chunks and matches
// sum_all_chunked_serial bitwise; the plain reference differs only in
// rounding and is compared with tolerance in tests.
double sum_all_serial(const double* p, size_t n);
double sum_all_chunked_serial(const double* p, size_t n);
double sum_all(const double* p, size_t n);
inline double sum_all(const Matrix& m) { return sum_all(m.data.data(), m.size()); }

double sigmoid_scalar(double x);

}  // namespace bankfuse::kernels
