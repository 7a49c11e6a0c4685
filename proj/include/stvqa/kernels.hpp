#pragma once
// Double-precision array kernels behind the tensor engine.
//
// Every kernel has a scalar reference implementation; the hot ones also have
// an AVX2+FMA variant. The active table is chosen once at startup (cpuid,
// overridable with STVQA_SIMD=scalar|avx2 or set_backend() from tests) and the
// two backends are equivalence-tested against each other.
//
// Transcendental kernels (vtanh/vsigmoid/vexp/vlog) are scalar on every
// backend: both tables share one implementation, so nonlinearity results are
// bit-identical regardless of dispatch.

#include <cstddef>
#include <string>

namespace stvqa::kern {

enum class Backend { scalar, avx2 };

struct KernelTable {
  // elementwise, out may alias inputs
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*affine)(const double* x, double alpha, double beta, double* out,
                 std::size_t n);  // out = alpha*x + beta
  void (*axpy)(double alpha, const double* x, double* y,
               std::size_t n);  // y += alpha*x
  // reductions
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*vmax)(const double* x, std::size_t n);  // n >= 1
  bool (*all_finite)(const double* x, std::size_t n);
  // fused bias-corrected ADAM update over one parameter block
  void (*adam_update)(double* p, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double beta1_pow_t, double beta2_pow_t);
  // transcendentals (scalar on all backends)
  void (*vtanh)(const double* x, double* out, std::size_t n);
  void (*vsigmoid)(const double* x, double* out, std::size_t n);
  void (*vexp)(const double* x, double* out, std::size_t n);
  void (*vlog)(const double* x, double* out, std::size_t n);
};

const KernelTable& scalar_table();
#if defined(STVQA_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

// Active table. Resolved once: STVQA_SIMD env override, else best supported.
const KernelTable& table();
Backend active_backend();
std::string backend_name(Backend b);

// Force a backend (tests). Throws std::runtime_error if unsupported here.
void set_backend(Backend b);
bool backend_supported(Backend b);

// ---------------------------------------------------------------------------
// Convenience wrappers over the active table.
// ---------------------------------------------------------------------------
inline void add(const double* a, const double* b, double* o, std::size_t n) { table().add(a, b, o, n); }
inline void sub(const double* a, const double* b, double* o, std::size_t n) { table().sub(a, b, o, n); }
inline void mul(const double* a, const double* b, double* o, std::size_t n) { table().mul(a, b, o, n); }
inline void affine(const double* x, double al, double be, double* o, std::size_t n) { table().affine(x, al, be, o, n); }
inline void axpy(double al, const double* x, double* y, std::size_t n) { table().axpy(al, x, y, n); }
inline double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }
inline double sum(const double* x, std::size_t n) { return table().sum(x, n); }
inline double vmax(const double* x, std::size_t n) { return table().vmax(x, n); }
inline bool all_finite(const double* x, std::size_t n) { return table().all_finite(x, n); }
inline void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                        double lr, double b1, double b2, double eps, double b1t, double b2t) {
  table().adam_update(p, m, v, g, n, lr, b1, b2, eps, b1t, b2t);
}
inline void vtanh(const double* x, double* o, std::size_t n) { table().vtanh(x, o, n); }
inline void vsigmoid(const double* x, double* o, std::size_t n) { table().vsigmoid(x, o, n); }
inline void vexp(const double* x, double* o, std::size_t n) { table().vexp(x, o, n); }
inline void vlog(const double* x, double* o, std::size_t n) { table().vlog(x, o, n); }

// ---------------------------------------------------------------------------
// Small dense linear algebra composed from the table kernels (row-major).
// ---------------------------------------------------------------------------

// y = A x, A is m x n
inline void matvec(const double* A, const double* x, double* y, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) y[i] = dot(A + i * n, x, n);
}

// y = x^T A, x has m entries, A is m x n, y has n entries
inline void vecmat(const double* x, const double* A, double* y, std::size_t m, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] = 0.0;
  for (std::size_t i = 0; i < m; ++i) axpy(x[i], A + i * n, y, n);
}

// C = A B, A is m x n, B is n x k (C zero-initialized here)
inline void matmul(const double* A, const double* B, double* C, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m * k; ++i) C[i] = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < n; ++p) axpy(A[i * n + p], B + p * k, C + i * k, k);
}

// C += A B
inline void matmul_acc(const double* A, const double* B, double* C, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < n; ++p) axpy(A[i * n + p], B + p * k, C + i * k, k);
}

// C += a b^T (outer product), a has m entries, b has n entries
inline void outer_acc(const double* a, const double* b, double* C, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) axpy(a[i], b, C + i * n, n);
}

}  // namespace stvqa::kern
