#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "jpo/common.hpp"
#include "jpo/rng.hpp"

using namespace jpo;

TEST_CASE("expit/logit round trip and tails") {
  CHECK(expit(0.0) == doctest::Approx(0.5));
  CHECK(expit(-800.0) >= 0.0);
  CHECK(expit(800.0) <= 1.0);
  for (double p : {0.01, 0.3, 0.5, 0.9, 0.999})
    CHECK(expit(logit(p)) == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("normal quantile inverts the CDF") {
  for (double p : {0.001, 0.025, 0.3, 0.5, 0.975, 0.999})
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-9));
}

TEST_CASE("type-7 quantiles match the classic 1..100 quartiles") {
  std::vector<double> x;
  for (int i = 1; i <= 100; ++i) x.push_back(i);
  CHECK(quantile_type7_sorted(x, 0.25) == doctest::Approx(25.75));
  CHECK(quantile_type7_sorted(x, 0.5) == doctest::Approx(50.5));
  CHECK(quantile_type7_sorted(x, 0.75) == doctest::Approx(75.25));
  CHECK(quantile_type7_sorted(x, 0.0) == 1.0);
  CHECK(quantile_type7_sorted(x, 1.0) == 100.0);
}

TEST_CASE("counter rng: pure function of (seed, stream, counter)") {
  CounterRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  for (std::uint64_t i = 0; i < 16; ++i) {
    CHECK(a.at(i) == b.at(i));
    CHECK(a.at(i) != c.at(i));
    CHECK(a.at(i) != d.at(i));
  }
  // Random access agrees with sequential consumption.
  Substream s(42, 7);
  CHECK(s.next_u64() == a.at(0));
  CHECK(s.next_u64() == a.at(1));
}

TEST_CASE("substream uniforms, bounded ints, normals behave sanely") {
  Substream rng(2024, 1);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(sum2 / n == doctest::Approx(1.0 / 3.0).epsilon(0.03));

  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.next_below(13);
    CHECK(v < 13);
    seen.insert(v);
  }
  CHECK(seen.size() == 13);

  double zsum = 0.0, zsum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.next_normal();
    zsum += z;
    zsum2 += z * z;
  }
  CHECK(zsum / n == doctest::Approx(0.0).epsilon(0.05));
  CHECK(zsum2 / n == doctest::Approx(1.0).epsilon(0.05));

  for (int i = 0; i < 200; ++i) {
    const double t = rng.next_truncated_normal(-2.0, 2.0);
    CHECK(t >= -2.0);
    CHECK(t <= 2.0);
  }
}
