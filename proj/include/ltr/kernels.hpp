#pragma once

#include <cstdint>

namespace ltr::kern {

// Multiply-add counter for the dense kernels below. Enabled per thread;
// used by the cost-model cross-check and nothing else.
extern thread_local bool count_macs;
extern thread_local std::uint64_t mac_count;

void reset_mac_count();

// Shared inner product. Both the serial and the OpenMP paths of every
// kernel call this exact function so their results are bit-identical.
double dot(const double* a, const double* b, int n);

// C[ar x bc] = A[ar x ac] * B[ac x bc]
void matmul(const double* a, int ar, int ac, const double* b, int bc, double* c);

// C[ar x br] = A[ar x ac] * B[br x ac]^T
void matmul_nt(const double* a, int ar, int ac, const double* b, int br, double* c);

// C[ac x bc] = A[ar x ac]^T * B[ar x bc]
void matmul_tn(const double* a, int ar, int ac, const double* b, int bc, double* c);

// y[r] = A[r x c] * x[c]
void matvec(const double* a, int r, int c, const double* x, double* y);

// y[c] = A[r x c]^T * x[r]
void matvec_t(const double* a, int r, int c, const double* x, double* y);

// out[i] = dot(items + i*d, query) for i in [0, n): the exact retrieval
// scan. `parallel` switches on the OpenMP path; per-item results land in
// disjoint slots, so both paths produce the same bytes.
void score_items(const double* items, std::int64_t n, int d, const double* query, double* out,
                 bool parallel);

void score_items_serial(const double* items, std::int64_t n, int d, const double* query,
                        double* out);

int max_threads();

}  // namespace ltr::kern
