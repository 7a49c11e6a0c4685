#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "stvqa/kernels.hpp"
#include "stvqa/rng.hpp"

using namespace stvqa;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -3.0, double hi = 3.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

// sizes straddling the 4-lane vector width, including tails
const std::size_t kSizes[] = {1, 2, 3, 4, 5, 7, 8, 13, 16, 31, 64, 67, 255};

}  // namespace

#if defined(STVQA_HAVE_AVX2)

TEST_CASE("avx2 elementwise kernels are bit-identical to scalar") {
  if (!kern::backend_supported(kern::Backend::avx2)) return;
  const auto& s = kern::scalar_table();
  const auto& a = kern::avx2_table();
  Rng rng(101);
  for (std::size_t n : kSizes) {
    auto x = random_vec(n, rng);
    auto y = random_vec(n, rng);
    std::vector<double> os(n), oa(n);

    s.add(x.data(), y.data(), os.data(), n);
    a.add(x.data(), y.data(), oa.data(), n);
    CHECK(os == oa);

    s.sub(x.data(), y.data(), os.data(), n);
    a.sub(x.data(), y.data(), oa.data(), n);
    CHECK(os == oa);

    s.mul(x.data(), y.data(), os.data(), n);
    a.mul(x.data(), y.data(), oa.data(), n);
    CHECK(os == oa);

    CHECK(s.vmax(x.data(), n) == a.vmax(x.data(), n));
  }
}

TEST_CASE("avx2 fma/reduction kernels match scalar within 1e-12 relative") {
  if (!kern::backend_supported(kern::Backend::avx2)) return;
  const auto& s = kern::scalar_table();
  const auto& a = kern::avx2_table();
  Rng rng(202);
  for (std::size_t n : kSizes) {
    auto x = random_vec(n, rng);
    auto y = random_vec(n, rng);

    const double ds = s.dot(x.data(), y.data(), n);
    const double da = a.dot(x.data(), y.data(), n);
    CHECK(std::fabs(ds - da) <= 1e-12 * (1.0 + std::fabs(ds)));

    const double ss = s.sum(x.data(), n);
    const double sa = a.sum(x.data(), n);
    CHECK(std::fabs(ss - sa) <= 1e-12 * (1.0 + std::fabs(ss)));

    std::vector<double> ys = y, ya = y;
    s.axpy(0.37, x.data(), ys.data(), n);
    a.axpy(0.37, x.data(), ya.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(ys[i] - ya[i]) <= 1e-12 * (1.0 + std::fabs(ys[i])));

    std::vector<double> fs(n), fa(n);
    s.affine(x.data(), 1.7, -0.3, fs.data(), n);
    a.affine(x.data(), 1.7, -0.3, fa.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::fabs(fs[i] - fa[i]) <= 1e-12 * (1.0 + std::fabs(fs[i])));
  }
}

TEST_CASE("avx2 adam_update matches scalar within 1e-12 relative") {
  if (!kern::backend_supported(kern::Backend::avx2)) return;
  const auto& s = kern::scalar_table();
  const auto& a = kern::avx2_table();
  Rng rng(303);
  for (std::size_t n : kSizes) {
    auto g = random_vec(n, rng);
    auto p0 = random_vec(n, rng);
    auto m0 = random_vec(n, rng, 0.0, 0.1);
    auto v0 = random_vec(n, rng, 0.0, 0.1);
    auto ps = p0, ms = m0, vs = v0;
    auto pa = p0, ma = m0, va = v0;
    s.adam_update(ps.data(), ms.data(), vs.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8, 0.9, 0.999);
    a.adam_update(pa.data(), ma.data(), va.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8, 0.9, 0.999);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::fabs(ps[i] - pa[i]) <= 1e-12 * (1.0 + std::fabs(ps[i])));
      CHECK(std::fabs(ms[i] - ma[i]) <= 1e-12 * (1.0 + std::fabs(ms[i])));
      CHECK(std::fabs(vs[i] - va[i]) <= 1e-12 * (1.0 + std::fabs(vs[i])));
    }
  }
}

TEST_CASE("avx2 all_finite agrees with scalar on NaN/Inf placement") {
  if (!kern::backend_supported(kern::Backend::avx2)) return;
  const auto& s = kern::scalar_table();
  const auto& a = kern::avx2_table();
  Rng rng(404);
  for (std::size_t n : kSizes) {
    auto x = random_vec(n, rng);
    CHECK(s.all_finite(x.data(), n));
    CHECK(a.all_finite(x.data(), n));
    for (std::size_t bad = 0; bad < n; ++bad) {
      auto y = x;
      y[bad] = std::nan("");
      CHECK_FALSE(s.all_finite(y.data(), n));
      CHECK_FALSE(a.all_finite(y.data(), n));
      y[bad] = INFINITY;
      CHECK_FALSE(a.all_finite(y.data(), n));
      y[bad] = -INFINITY;
      CHECK_FALSE(a.all_finite(y.data(), n));
    }
  }
}

TEST_CASE("composed matmul agrees across backends") {
  if (!kern::backend_supported(kern::Backend::avx2)) return;
  Rng rng(505);
  const std::size_t m = 7, n = 13, k = 5;
  auto A = random_vec(m * n, rng);
  auto B = random_vec(n * k, rng);
  std::vector<double> Cs(m * k), Ca(m * k);

  const auto saved = kern::active_backend();
  kern::set_backend(kern::Backend::scalar);
  kern::matmul(A.data(), B.data(), Cs.data(), m, n, k);
  kern::set_backend(kern::Backend::avx2);
  kern::matmul(A.data(), B.data(), Ca.data(), m, n, k);
  kern::set_backend(saved);

  for (std::size_t i = 0; i < m * k; ++i)
    CHECK(std::fabs(Cs[i] - Ca[i]) <= 1e-12 * (1.0 + std::fabs(Cs[i])));
}

#endif  // STVQA_HAVE_AVX2

TEST_CASE("backend dispatch can be forced to scalar and back") {
  const auto saved = kern::active_backend();
  kern::set_backend(kern::Backend::scalar);
  CHECK(kern::active_backend() == kern::Backend::scalar);
  double x = 2.0, y = 3.0, out = 0.0;
  kern::add(&x, &y, &out, 1);
  CHECK(out == 5.0);
  kern::set_backend(saved);
}

TEST_CASE("adam_update kernel follows the bias-corrected formula") {
  // one step from zero moments: m=(1-b1)g, v=(1-b2)g^2, corrected by 1/(1-b^t)
  double p = 1.0, m = 0.0, v = 0.0, g = 0.5;
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  kern::adam_update(&p, &m, &v, &g, 1, lr, b1, b2, eps, b1, b2);
  const double mhat = (1 - b1) * g / (1 - b1);
  const double vhat = (1 - b2) * g * g / (1 - b2);
  const double expect = 1.0 - lr * mhat / (std::sqrt(vhat) + eps);
  CHECK(p == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("linear algebra helpers: matvec/vecmat/outer against hand results") {
  // A = [[1,2],[3,4],[5,6]]
  const std::vector<double> A{1, 2, 3, 4, 5, 6};
  const std::vector<double> x2{1, -1};
  std::vector<double> y3(3);
  kern::matvec(A.data(), x2.data(), y3.data(), 3, 2);
  CHECK(y3 == std::vector<double>{-1, -1, -1});

  const std::vector<double> x3{1, 0, -1};
  std::vector<double> y2(2);
  kern::vecmat(x3.data(), A.data(), y2.data(), 3, 2);
  CHECK(y2 == std::vector<double>{-4, -4});

  std::vector<double> C(6, 0.0);
  kern::outer_acc(x3.data(), x2.data(), C.data(), 3, 2);
  CHECK(C == std::vector<double>{1, -1, 0, 0, -1, 1});
}
