#include "doctest.h"

#include <cmath>
#include <vector>

#include "ssdraid/aging.hpp"

using namespace ssdraid;

namespace {

ArrayConfigd skewed_preset(Scheme scheme) {
  ArrayConfigd cfg = small_preset();
  cfg.scheme = scheme;
  cfg.parity_fractions.resize(4);
  cfg.parity_fractions << 0.1, 0.1, 0.1, 0.7;
  return cfg;
}

double brute_mean(const ArrayConfigd& cfg, const AgingProfiled& prof,
                  std::int64_t a, std::int64_t b) {
  double sum = 0;
  for (std::int64_t k = a; k < b; ++k)
    sum += aggregate_error_rate(cfg, prof, k);
  return sum / double(b - a);
}

double brute_max(const ArrayConfigd& cfg, const AgingProfiled& prof,
                 std::int64_t a, std::int64_t b) {
  double best = 0;
  for (std::int64_t k = a; k < b; ++k)
    best = std::max(best, aggregate_error_rate(cfg, prof, k));
  return best;
}

}  // namespace

TEST_SUITE("aging") {

TEST_CASE("profile from skewed parity") {
  auto prof = aging_profile(skewed_preset(Scheme::diffraid));
  REQUIRE(prof.aging_rates.size() == 4);
  CHECK(prof.aging_rates[0] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(prof.aging_rates[1] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(prof.aging_rates[2] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(prof.aging_rates[3] == doctest::Approx(2.4).epsilon(1e-12));
  CHECK(prof.erase_probabilities[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(prof.erase_probabilities[3] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(prof.remaining_fractions[0] == 1.0);  // exact by construction
  CHECK(prof.remaining_fractions[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(prof.remaining_fractions[2] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(prof.remaining_fractions[3] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("profile sorts roles by rate, keeps slot map") {
  ArrayConfigd cfg = small_preset();
  cfg.parity_fractions << 0.7, 0.1, 0.1, 0.1;
  auto prof = aging_profile(cfg);
  CHECK(prof.aging_rates[3] == doctest::Approx(2.4));
  CHECK(prof.input_index == std::vector<int>{1, 2, 3, 0});
  // Rates ascending, remaining fractions descending from exactly 1.
  for (int i = 0; i + 1 < 4; ++i) {
    CHECK(prof.aging_rates[i] <= prof.aging_rates[i + 1]);
    CHECK(prof.remaining_fractions[i] >= prof.remaining_fractions[i + 1]);
  }
  CHECK(prof.erase_probabilities.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(prof.remaining_fractions[3] ==
        doctest::Approx(prof.erase_probabilities[3]).epsilon(1e-12));
}

TEST_CASE("even parity closed forms") {
  for (int n : {3, 9}) {
    ArrayConfigd cfg = small_preset();
    cfg.data_drives = n;
    cfg.parity_fractions = even_parity(n);
    auto prof = aging_profile(cfg);
    for (int i = 0; i <= n; ++i) {
      CHECK(prof.erase_probabilities[i] ==
            doctest::Approx(1.0 / (n + 1)).epsilon(1e-12));
      CHECK(prof.remaining_fractions[i] ==
            doctest::Approx(double(n + 1 - i) / (n + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("truncated normal parity percentages") {
  auto p3 = truncated_normal_parity(3, 1.0);
  CHECK(p3.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(p3[3] - 0.6827) < 0.005);
  CHECK(std::abs(p3[2] - 0.2718) < 0.005);
  auto p9 = truncated_normal_parity(9, 5.0);
  CHECK(p9.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(p9[0] - 0.0276) < 0.005);
  CHECK(std::abs(p9[9] - 0.1661) < 0.005);
  for (int i = 0; i + 1 < 10; ++i) CHECK(p9[i] < p9[i + 1]);
  CHECK_THROWS_AS((void)truncated_normal_parity(3, 0.0), std::invalid_argument);
}

TEST_CASE("diffraid drive ages ladder") {
  auto cfg = skewed_preset(Scheme::diffraid);
  auto prof = aging_profile(cfg);
  auto st = drive_ages(cfg, prof, 4000);
  CHECK(st.drive_ages[0] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(st.drive_ages[1] == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(st.drive_ages[2] == doctest::Approx(50.0).epsilon(1e-12));
  CHECK(st.drive_ages[3] == doctest::Approx(80.0).epsilon(1e-12));
  // All roles wrap to their offsets at every multiple of M*B.
  auto wrapped = drive_ages(cfg, prof, 8000);
  CHECK(wrapped.drive_ages[0] == 0.0);
  CHECK(wrapped.drive_ages[1] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(wrapped.drive_ages[3] == doctest::Approx(60.0).epsilon(1e-12));
}

TEST_CASE("traditional drive ages") {
  ArrayConfigd cfg = small_preset();
  auto prof = aging_profile(cfg);
  auto st = drive_ages(cfg, prof, 16000);
  for (int i = 0; i < 4; ++i)
    CHECK(st.drive_ages[i] == doctest::Approx(50.0).epsilon(1e-12));
  // Full per-drive cycle: M*B/q erasures bring the age back to zero.
  auto cycled = drive_ages(cfg, prof, 32000);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(cycled.drive_ages[i]) < 1e-9);
}

TEST_CASE("diffraid age formula matches its expanded form") {
  auto cfg = skewed_preset(Scheme::diffraid);
  auto prof = aging_profile(cfg);
  const int n = cfg.data_drives;
  const double m = cfg.erasure_limit;
  const double qn = prof.erase_probabilities[n];
  const double kn0 = m * (1.0 - prof.remaining_fractions[n]);
  for (int role = 0; role <= n; ++role) {
    const double q = prof.erase_probabilities[role];
    // The role-relative modulus collapses to M*q.
    CHECK((q / qn) * (m - kn0) == doctest::Approx(m * q).epsilon(1e-12));
    const double ki0 = m * (1.0 - prof.remaining_fractions[role]);
    for (std::int64_t k : {0L, 1L, 123L, 4000L, 7999L, 12345L}) {
      const double expanded =
          std::fmod(double(k) * q / cfg.blocks_per_drive, (q / qn) * (m - kn0)) +
          ki0;
      CHECK(drive_age(cfg, prof, k, role) ==
            doctest::Approx(expanded).epsilon(1e-12));
    }
  }
}

TEST_CASE("chunk error rate quadratic and general shape agree") {
  ArrayConfigd cfg = small_preset();
  cfg.rate_constant = 3.5e-5;
  CHECK(chunk_error_rate(cfg, 40.0) ==
        doctest::Approx(2 * 3.5e-5 * 40.0).epsilon(1e-12));
  cfg.shape = 1.5;
  CHECK(chunk_error_rate(cfg, 40.0) ==
        doctest::Approx(3.5e-5 * 1.5 * std::pow(40.0, 0.5)).epsilon(1e-12));
  CHECK(chunk_error_rate(cfg, 0.0) == 0.0);
}

TEST_CASE("wear schedule cuts at replacement epochs") {
  auto diff = skewed_preset(Scheme::diffraid);
  auto dprof = aging_profile(diff);
  auto dsched = make_wear_schedule(diff, dprof, 24000);
  REQUIRE(dsched.segments.size() == 3);
  CHECK(dsched.segments[1].begin == 8000);
  CHECK(dsched.segments[2].begin == 16000);

  auto trad = skewed_preset(Scheme::traditional);
  auto tprof = aging_profile(trad);
  auto tsched = make_wear_schedule(trad, tprof, 48000);
  // Role periods: 8000/0.2 = 40000 and 8000/0.4 = 20000.
  REQUIRE(tsched.segments.size() == 3);
  CHECK(tsched.segments[1].begin == 20000);
  CHECK(tsched.segments[2].begin == 40000);
  CHECK(tsched.segment_of(0) == 0);
  CHECK(tsched.segment_of(19999) == 0);
  CHECK(tsched.segment_of(20000) == 1);
  CHECK(tsched.segment_end(2) == 48000);
}

TEST_CASE("non-integer epochs round up to the next period") {
  ArrayConfigd cfg = small_preset();
  cfg.data_drives = 2;
  cfg.parity_fractions.resize(3);
  cfg.parity_fractions << 0.2, 0.2, 0.6;  // rates 1.2, 1.2, 1.6; q = .3 .3 .4
  auto prof = aging_profile(cfg);
  auto sched = make_wear_schedule(cfg, prof, 48000);
  // 8000/0.3 = 26666.67 rides between integers; 8000/0.4 = 20000 is exact.
  std::vector<std::int64_t> begins;
  for (auto& s : sched.segments) begins.push_back(s.begin);
  CHECK(begins == std::vector<std::int64_t>{0, 20000, 26667, 40000});
}

TEST_CASE("interval mean matches brute force across wraps") {
  for (Scheme scheme : {Scheme::traditional, Scheme::diffraid}) {
    auto cfg = skewed_preset(scheme);
    cfg.rate_constant = 1.25e-4;
    auto prof = aging_profile(cfg);
    auto sched = make_wear_schedule(cfg, prof, 48000);
    for (auto [a, b] : std::vector<std::pair<std::int64_t, std::int64_t>>{
             {0, 300}, {7800, 8200}, {19800, 20200}, {39900, 40300},
             {0, 48000}}) {
      CHECK(mean_rate_over(cfg, prof, sched, a, b) ==
            doctest::Approx(brute_mean(cfg, prof, a, b)).epsilon(1e-9));
      CHECK(max_rate_over(cfg, prof, sched, a, b) ==
            doctest::Approx(brute_max(cfg, prof, a, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampled mean for non-quadratic shape stays close") {
  auto cfg = skewed_preset(Scheme::diffraid);
  cfg.shape = 1.8;
  auto prof = aging_profile(cfg);
  auto sched = make_wear_schedule(cfg, prof, 16000);
  CHECK_FALSE(sched.affine);
  const double approx = mean_rate_over(cfg, prof, sched, 100, 900);
  const double exact = brute_mean(cfg, prof, 100, 900);
  CHECK(approx == doctest::Approx(exact).epsilon(1e-3));
}

TEST_CASE("deployment-scale epochs snap despite rounding drift") {
  // At 1.3e10 periods the floating-point epoch lands a microsecond-scale
  // hair above the integer; the boundary must not slip a period late.
  ArrayConfigd cfg;
  cfg.data_drives = 9;
  cfg.blocks_per_drive = 131072;
  cfg.stripes = 131072;
  cfg.erasure_limit = 10000;
  cfg.rate_constant = 0.4e-13;
  cfg.recovery_rate = 1e-3;
  cfg.erase_interval = 1e-2;
  cfg.scheme = Scheme::traditional;
  cfg.parity_fractions = even_parity(9);

  const std::int64_t wrap = 13107200000ll;
  const auto prof = aging_profile(cfg);
  const auto sched = make_wear_schedule(cfg, prof, 2 * wrap - 200000000);
  REQUIRE(sched.segments.size() == 2);
  CHECK(sched.segments[1].begin == wrap);
  CHECK(sched.segments[1].rate_begin < 1e-15);

  // The uniformization envelope needs mean <= max on every interval,
  // including ones that straddle the replacement.
  const std::int64_t lo = wrap - 41664000, hi = wrap + 23872000;
  const double mean = mean_rate_over(cfg, prof, sched, lo, hi);
  const double mx = max_rate_over(cfg, prof, sched, lo, hi);
  CHECK(mean <= mx);
  CHECK(mx == doctest::Approx(sched.rate_at(wrap - 1, 0)));
}

TEST_CASE("config validation rejects bad inputs") {
  ArrayConfigd cfg = small_preset();
  CHECK_NOTHROW(cfg.validate());
  cfg.parity_fractions[0] = 0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_preset();
  cfg.shape = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_preset();
  cfg.stripes = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = small_preset();
  cfg.parity_fractions.resize(3);
  cfg.parity_fractions << 0.3, 0.3, 0.4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("config digest is order and value sensitive") {
  ArrayConfigd a = small_preset();
  ArrayConfigd b = small_preset();
  CHECK(a.digest() == b.digest());
  b.rate_constant *= 2;
  CHECK(a.digest() != b.digest());
  b = small_preset();
  b.scheme = Scheme::diffraid;
  CHECK(a.digest() != b.digest());
}

}  // TEST_SUITE
