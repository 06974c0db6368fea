#include <doctest.h>

#include <cmath>
#include <vector>

#include "gspdc/rng.hpp"
#include "testutil.hpp"

using namespace gspdc;

TEST_CASE("stream determinism and independence") {
  rng::Stream a(1, 7, rng::Tag::pair_times);
  rng::Stream b(1, 7, rng::Tag::pair_times);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  rng::Stream c(1, 8, rng::Tag::pair_times);
  rng::Stream d(1, 7, rng::Tag::control_thin);
  rng::Stream e(2, 7, rng::Tag::pair_times);
  rng::Stream f(1, 7, rng::Tag::pair_times);
  bool all_equal_c = true, all_equal_d = true, all_equal_e = true;
  for (int i = 0; i < 32; ++i) {
    const std::uint64_t r = f.next();
    all_equal_c &= (c.next() == r);
    all_equal_d &= (d.next() == r);
    all_equal_e &= (e.next() == r);
  }
  CHECK_FALSE(all_equal_c);
  CHECK_FALSE(all_equal_d);
  CHECK_FALSE(all_equal_e);
}

TEST_CASE("positional access matches sequential draws") {
  rng::Stream seq(99, 3, rng::Tag::signal_path);
  rng::Stream pos(99, 3, rng::Tag::signal_path);
  for (std::uint64_t i = 0; i < 50; ++i) {
    CHECK(seq.next() == pos.at(i));
  }
}

TEST_CASE("unit doubles stay in [0,1) and look uniform") {
  rng::Stream st(5, 0, rng::Tag::dark);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = st.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("poisson sampler moments") {
  SUBCASE("zero mean") {
    rng::Stream st(1, 0, rng::Tag::pair_count);
    CHECK(rng::poisson(st, 0.0) == 0);
  }
  SUBCASE("large mean (rejection sampler)") {
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      rng::Stream st(11, static_cast<std::uint64_t>(i), rng::Tag::pair_count);
      const double k = static_cast<double>(rng::poisson(st, 100.0));
      sum += k;
      sum_sq += k * k;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(mean == doctest::Approx(100.0).epsilon(0.0015));
    CHECK(var / mean == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("small mean (inversion sampler)") {
    const int n = 200000;
    std::uint64_t nonzero = 0;
    for (int i = 0; i < n; ++i) {
      rng::Stream st(13, static_cast<std::uint64_t>(i), rng::Tag::dark);
      if (rng::poisson(st, 0.01) > 0) ++nonzero;
    }
    const double frac = static_cast<double>(nonzero) / n;
    // P(k >= 1) = 1 - exp(-0.01) = 9.95e-3
    CHECK(frac == doctest::Approx(9.95e-3).epsilon(0.1));
  }
  SUBCASE("continuity across the sampler switch") {
    double m_lo = 0.0, m_hi = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      rng::Stream a(17, static_cast<std::uint64_t>(i), rng::Tag::pair_count);
      rng::Stream b(18, static_cast<std::uint64_t>(i), rng::Tag::pair_count);
      m_lo += static_cast<double>(rng::poisson(a, 9.9));
      m_hi += static_cast<double>(rng::poisson(b, 10.1));
    }
    CHECK(m_lo / n == doctest::Approx(9.9).epsilon(0.01));
    CHECK(m_hi / n == doctest::Approx(10.1).epsilon(0.01));
  }
}

TEST_CASE("poisson sampler distribution shape (chi-square)") {
  const std::uint64_t n = 200000;
  std::vector<std::uint64_t> hist;
  for (std::uint64_t i = 0; i < n; ++i) {
    rng::Stream st(23, i, rng::Tag::pair_count);
    const std::uint64_t k = rng::poisson(st, 8.0);
    if (k >= hist.size()) hist.resize(k + 1, 0);
    ++hist[k];
  }
  const auto gof = testutil::poisson_gof(hist, n, 8.0);
  CHECK(gof.p_value > 0.01);
}

TEST_CASE("normal sampler moments") {
  rng::Stream st(31, 0, rng::Tag::eta_sample);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng::normal(st);
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean) < 0.01);
  CHECK(sum_sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.02));
}
