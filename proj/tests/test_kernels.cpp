#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "test_util.hpp"
#include "tollopt/kernels.hpp"

using namespace tollopt;
using tollopt::testutil::Uniform;

namespace {

struct Arrays {
  std::vector<double> a, b, w, d, mult;
};

Arrays random_arrays(std::size_t n, std::uint64_t seed) {
  Uniform u(seed);
  Arrays arr;
  for (std::size_t i = 0; i < n; ++i) {
    arr.a.push_back(u.next(0.0, 3.0));
    arr.b.push_back(u.next(0.0, 2.0));
    arr.w.push_back(u.next(0.0, 4.0));
    arr.d.push_back(u.next(-3.0, 3.0));
    arr.mult.push_back(u.next(0.0, 1.0));
  }
  return arr;
}

// Plain long-double reference, written independently of the backends.
long double ref_latency_integral(const Arrays& x) {
  long double acc = 0;
  for (std::size_t i = 0; i < x.a.size(); ++i) {
    const long double w = x.w[i];
    acc += x.a[i] * w + x.b[i] * w * w * w * w * w / 5.0L;
  }
  return acc;
}

long double ref_total_time(const Arrays& x, bool with_mult) {
  long double acc = 0;
  for (std::size_t i = 0; i < x.a.size(); ++i) {
    const long double w = x.w[i];
    long double v = w * (x.a[i] + x.b[i] * w * w * w * w);
    if (with_mult) v *= x.mult[i];
    acc += v;
  }
  return acc;
}

void check_backend_matches_scalar(const kernels::Backend& kb,
                                  const kernels::Backend& ref, std::size_t n,
                                  std::uint64_t seed) {
  const Arrays x = random_arrays(n, seed);
  const double t = 0.37;

  CHECK(kb.dot(x.a.data(), x.w.data(), n) ==
        doctest::Approx(ref.dot(x.a.data(), x.w.data(), n)).epsilon(1e-12));

  std::vector<double> y1 = x.w, y2 = x.w;
  kb.axpy(1.75, x.d.data(), y1.data(), n);
  ref.axpy(1.75, x.d.data(), y2.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));

  std::vector<double> o1(n), o2(n);
  kb.bpr_latency(x.a.data(), x.b.data(), x.w.data(), o1.data(), n);
  ref.bpr_latency(x.a.data(), x.b.data(), x.w.data(), o2.data(), n);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-14));

  for (const double* mult : {static_cast<const double*>(nullptr),
                             x.mult.data()}) {
    kb.bpr_marginal(mult, x.a.data(), x.b.data(), x.w.data(), o1.data(), n);
    ref.bpr_marginal(mult, x.a.data(), x.b.data(), x.w.data(), o2.data(), n);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(o1[i] == doctest::Approx(o2[i]).epsilon(1e-14));

    CHECK(kb.bpr_total_travel_time(mult, x.a.data(), x.b.data(), x.w.data(),
                                   n) ==
          doctest::Approx(ref.bpr_total_travel_time(mult, x.a.data(),
                                                    x.b.data(), x.w.data(), n))
              .epsilon(1e-12));
    CHECK(kb.bpr_marginal_dir(mult, x.a.data(), x.b.data(), x.w.data(),
                              x.d.data(), t, n) ==
          doctest::Approx(ref.bpr_marginal_dir(mult, x.a.data(), x.b.data(),
                                               x.w.data(), x.d.data(), t, n))
              .epsilon(1e-12));
  }

  CHECK(kb.bpr_latency_integral(x.a.data(), x.b.data(), x.w.data(), n) ==
        doctest::Approx(
            ref.bpr_latency_integral(x.a.data(), x.b.data(), x.w.data(), n))
            .epsilon(1e-12));
  CHECK(kb.bpr_latency_dir(x.a.data(), x.b.data(), x.w.data(), x.d.data(), t,
                           n) ==
        doctest::Approx(ref.bpr_latency_dir(x.a.data(), x.b.data(), x.w.data(),
                                            x.d.data(), t, n))
            .epsilon(1e-12));
}

}  // namespace

TEST_CASE("scalar kernels match a long-double reference") {
  for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{5},
                        std::size_t{32}, std::size_t{67}}) {
    const Arrays x = random_arrays(n, 42 + n);
    const auto& kb = kernels::scalar();
    CHECK(kb.bpr_latency_integral(x.a.data(), x.b.data(), x.w.data(), n) ==
          doctest::Approx(static_cast<double>(ref_latency_integral(x)))
              .epsilon(1e-13));
    CHECK(kb.bpr_total_travel_time(nullptr, x.a.data(), x.b.data(), x.w.data(),
                                   n) ==
          doctest::Approx(static_cast<double>(ref_total_time(x, false)))
              .epsilon(1e-13));
    CHECK(kb.bpr_total_travel_time(x.mult.data(), x.a.data(), x.b.data(),
                                   x.w.data(), n) ==
          doctest::Approx(static_cast<double>(ref_total_time(x, true)))
              .epsilon(1e-13));
  }
}

TEST_CASE("scalar kernel point values") {
  const double a[] = {1.0, 1.0};
  const double b[] = {1.0, 1.0};
  const double w[] = {1.0, 1.0};
  double out[2];
  const auto& kb = kernels::scalar();
  kb.bpr_latency(a, b, w, out, 2);
  CHECK(out[0] == 2.0);  // 1 + 1 * 1^4
  kb.bpr_marginal(nullptr, a, b, w, out, 2);
  CHECK(out[0] == 6.0);  // 1 + 5 * 1 * 1^4
  // integral of 1 + z^4 on [0,1] is 1.2 per edge
  CHECK(kb.bpr_latency_integral(a, b, w, 2) == doctest::Approx(2.4));
  CHECK(kb.bpr_total_travel_time(nullptr, a, b, w, 2) == doctest::Approx(4.0));
}

TEST_CASE("avx2 backend agrees with scalar" *
          doctest::skip(!kernels::avx2_supported())) {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL})
    for (std::size_t n : {std::size_t{0}, std::size_t{1}, std::size_t{3},
                          std::size_t{4}, std::size_t{8}, std::size_t{13},
                          std::size_t{64}, std::size_t{129}})
      check_backend_matches_scalar(kernels::avx2(), kernels::scalar(), n,
                                   seed * 131 + n);
}

TEST_CASE("active backend is selectable and callable") {
  const auto& kb = kernels::active();
  CHECK((std::string(kb.name) == "scalar" || std::string(kb.name) == "avx2"));
  const double x[] = {1.0, 2.0, 3.0, 4.0, 5.0};
  CHECK(kb.dot(x, x, 5) == doctest::Approx(55.0));
}
