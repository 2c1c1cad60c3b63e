#include "ltr/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ltr::kern {

thread_local bool count_macs = false;
thread_local std::uint64_t mac_count = 0;

void reset_mac_count() { mac_count = 0; }

static inline void record_macs(std::uint64_t n) {
  if (count_macs) mac_count += n;
}

#if defined(__GNUC__)
__attribute__((noinline))
#endif
double dot(const double* a, const double* b, int n) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  record_macs(static_cast<std::uint64_t>(n));
  return acc;
}

void matmul(const double* a, int ar, int ac, const double* b, int bc, double* c) {
  for (int i = 0; i < ar; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * bc;
    for (int j = 0; j < bc; ++j) crow[j] = 0.0;
    const double* arow = a + static_cast<std::size_t>(i) * ac;
    for (int k = 0; k < ac; ++k) {
      const double av = arow[k];
      const double* brow = b + static_cast<std::size_t>(k) * bc;
      for (int j = 0; j < bc; ++j) crow[j] += av * brow[j];
    }
  }
  record_macs(static_cast<std::uint64_t>(ar) * ac * bc);
}

void matmul_nt(const double* a, int ar, int ac, const double* b, int br, double* c) {
  for (int i = 0; i < ar; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * ac;
    double* crow = c + static_cast<std::size_t>(i) * br;
    for (int j = 0; j < br; ++j) crow[j] = dot(arow, b + static_cast<std::size_t>(j) * ac, ac);
  }
}

void matmul_tn(const double* a, int ar, int ac, const double* b, int bc, double* c) {
  for (int i = 0; i < ac; ++i)
    for (int j = 0; j < bc; ++j) c[static_cast<std::size_t>(i) * bc + j] = 0.0;
  for (int k = 0; k < ar; ++k) {
    const double* arow = a + static_cast<std::size_t>(k) * ac;
    const double* brow = b + static_cast<std::size_t>(k) * bc;
    for (int i = 0; i < ac; ++i) {
      const double av = arow[i];
      double* crow = c + static_cast<std::size_t>(i) * bc;
      for (int j = 0; j < bc; ++j) crow[j] += av * brow[j];
    }
  }
  record_macs(static_cast<std::uint64_t>(ar) * ac * bc);
}

void matvec(const double* a, int r, int c, const double* x, double* y) {
  for (int i = 0; i < r; ++i) y[i] = dot(a + static_cast<std::size_t>(i) * c, x, c);
}

void matvec_t(const double* a, int r, int c, const double* x, double* y) {
  for (int j = 0; j < c; ++j) y[j] = 0.0;
  for (int i = 0; i < r; ++i) {
    const double xi = x[i];
    const double* arow = a + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) y[j] += xi * arow[j];
  }
  record_macs(static_cast<std::uint64_t>(r) * c);
}

void score_items_serial(const double* items, std::int64_t n, int d, const double* query,
                        double* out) {
  for (std::int64_t i = 0; i < n; ++i)
    out[i] = dot(items + static_cast<std::size_t>(i) * d, query, d);
}

void score_items(const double* items, std::int64_t n, int d, const double* query, double* out,
                 bool parallel) {
  if (!parallel) {
    score_items_serial(items, n, d, query, out);
    return;
  }
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    out[i] = dot(items + static_cast<std::size_t>(i) * d, query, d);
#else
  score_items_serial(items, n, d, query, out);
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace ltr::kern
