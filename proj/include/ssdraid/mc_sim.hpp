#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ssdraid/aging.hpp"
#include "ssdraid/array_config.hpp"
#include "ssdraid/generator.hpp"

namespace ssdraid {

// Recorded in every SimResult so outputs are reproducible across platforms:
// run r draws from xoshiro256** whose state is seeded through splitmix64
// from master_seed + (r+1) * 0x9E3779B97F4A7C15.
inline constexpr char kRngId[] = "xoshiro256** / splitmix64 per-run streams";

struct SplitMix64 {
  std::uint64_t state = 0;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed) {
    SplitMix64 sm{seed};
    for (auto& word : state_) word = sm.next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform strictly inside (0, 1), so -log is finite and positive.
  double unit() { return (double(next() >> 11) + 0.5) * 0x1p-53; }
  double exponential() { return -std::log(unit()); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_;
};

// The declared seed-splitting rule: independent of scheduling, so runs may
// execute in any order or concurrently.
inline Xoshiro256ss run_stream(std::uint64_t master_seed, std::int64_t run) {
  return Xoshiro256ss(master_seed +
                      0x9E3779B97F4A7C15ull * std::uint64_t(run + 1));
}

struct SimState {
  std::int64_t flagged_stripes = 0;  // stripes holding one erroneous chunk
  std::int64_t system_age = 0;       // erasures performed so far
  double clock = 0;                  // seconds
  bool lost = false;
};

inline constexpr std::int64_t kCensored = -1;

namespace detail {

// First arrival of a Poisson process whose rate is S * sigma(k) within
// period k, starting from `within` seconds into period `k`. Inversion of one
// unit-exponential target through the piecewise-constant cumulative hazard;
// distributionally identical to redrawing a competing exponential each
// period, but it crosses long quiet stretches in closed form. Returns false
// when the horizon arrives first, leaving k == horizon.
template <typename Scalar>
bool next_error_arrival(const ArrayConfig<Scalar>& cfg,
                        const AgingProfile<Scalar>& prof,
                        const WearSchedule<Scalar>& sched,
                        std::int64_t horizon, Xoshiro256ss& rng,
                        std::int64_t& k, Scalar& within) {
  const Scalar big_s = Scalar(cfg.stripes);
  const Scalar period = cfg.erase_interval;
  Scalar target = Scalar(rng.exponential());

  std::size_t seg = sched.segment_of(std::min(k, horizon - 1));
  auto sigma_at = [&](std::int64_t age) {
    if (!sched.affine) return aggregate_error_rate(cfg, prof, age);
    while (age >= sched.segment_end(seg)) ++seg;
    return sched.rate_at(age, seg);
  };

  if (within > 0) {  // finish the period a repair left us inside
    const Scalar rate = big_s * sigma_at(k);
    const Scalar avail = rate * (period - within);
    if (target <= avail) {
      within += target / rate;
      return true;
    }
    target -= avail;
    ++k;
    within = 0;
  }

  while (k < horizon) {
    if (!sched.affine) {
      const Scalar rate = big_s * sigma_at(k);
      const Scalar step = rate * period;
      if (target <= step) {
        within = target / rate;
        return true;
      }
      target -= step;
      ++k;
      continue;
    }

    // Affine segment: hazard over n whole periods is an arithmetic series,
    // so the crossing period solves a quadratic.
    while (k >= sched.segment_end(seg)) ++seg;
    const std::int64_t seg_end = std::min(sched.segment_end(seg), horizon);
    const Scalar a = big_s * sched.rate_at(k, seg) * period;
    const Scalar b = big_s * sched.rate_slope * period;
    const Scalar n_max = Scalar(seg_end - k);
    auto hazard = [&](Scalar n) { return n * a + b * n * (n - 1) / 2; };
    if (hazard(n_max) < target) {
      target -= hazard(n_max);
      k = seg_end;
      continue;
    }
    std::int64_t n;
    if (b <= 0) {
      n = std::int64_t(std::ceil(double(target / a)));
    } else {
      const Scalar bb = a - b / 2;
      n = std::int64_t(
          std::ceil(double((std::sqrt(bb * bb + 2 * b * target) - bb) / b)));
    }
    if (n < 1) n = 1;
    if (n > seg_end - k) n = seg_end - k;
    while (n > 1 && hazard(Scalar(n - 1)) >= target) --n;
    while (hazard(Scalar(n)) < target && n < seg_end - k) ++n;
    const Scalar residual = target - hazard(Scalar(n - 1));
    k += n - 1;
    const Scalar rate = big_s * sigma_at(k);
    within = std::min(period, residual / rate);
    return true;
  }
  within = 0;
  return false;
}

template <typename Scalar>
SimState run_core(const ArrayConfig<Scalar>& cfg,
                  const AgingProfile<Scalar>& prof,
                  const WearSchedule<Scalar>& sched, std::int64_t horizon,
                  Xoshiro256ss& rng) {
  const Scalar period = cfg.erase_interval;
  const Scalar mu = cfg.recovery_rate;
  const std::int64_t big_s = cfg.stripes;

  std::int64_t j = 0;
  std::int64_t k = 0;
  Scalar within = 0;
  auto sigma_at = [&](std::int64_t age) {
    return sched.affine ? sched.rate_at(age, sched.segment_of(age))
                        : aggregate_error_rate(cfg, prof, age);
  };

  while (k < horizon) {
    if (j == 0) {
      if (!next_error_arrival(cfg, prof, sched, horizon, rng, k, within))
        break;  // censored at the horizon
      j = 1;    // every stripe was clean, so the error flags a new one
      continue;
    }

    // Degraded: competing next-error vs next-repair exponentials, redrawn
    // when the period boundary arrives first.
    const Scalar sigma = sigma_at(k);
    const Scalar error_rate = Scalar(big_s) * sigma;
    const Scalar total = error_rate + mu;
#ifndef NDEBUG
    {
      const auto gen = build_generator(big_s, sigma, mu);
      assert(std::abs(total - gen.exit_rate(j)) <=
             Scalar(1e-12) * (Scalar(1) + gen.exit_rate(j)));
    }
#endif
    if (!(total > 0)) {
      ++k;
      within = 0;
      continue;
    }
    const Scalar wait = Scalar(rng.exponential()) / total;
    if (within + wait >= period) {
      ++k;
      within = 0;
      continue;
    }
    within += wait;
    if (Scalar(rng.unit()) * total <= error_rate) {
      if (Scalar(rng.unit()) * Scalar(big_s) <= Scalar(j)) {
        SimState out;
        out.flagged_stripes = j;
        out.system_age = k;
        out.clock = double(Scalar(k) * period + within);
        out.lost = true;
        return out;
      }
      ++j;  // a clean stripe took its first error
    } else {
      --j;  // one repair completes at a time
    }
  }

  SimState out;
  out.flagged_stripes = j;
  out.system_age = horizon;
  out.clock = double(Scalar(horizon) * period);
  out.lost = false;
  return out;
}

}  // namespace detail

template <typename Scalar>
SimState simulate_run(const ArrayConfig<Scalar>& cfg, std::int64_t horizon,
                      Xoshiro256ss& rng) {
  if (horizon < 0) throw std::invalid_argument("simulate_run: bad horizon");
  cfg.validate();
  const AgingProfile<Scalar> prof = aging_profile(cfg);
  const WearSchedule<Scalar> sched =
      make_wear_schedule(cfg, prof, std::max<std::int64_t>(horizon, 1));
  return detail::run_core(cfg, prof, sched, horizon, rng);
}

template <typename Scalar>
SimState simulate_run(const ArrayConfig<Scalar>& cfg, std::int64_t horizon,
                      std::uint64_t seed) {
  Xoshiro256ss rng = run_stream(seed, 0);
  return simulate_run(cfg, horizon, rng);
}

inline constexpr double kWilsonZ99 = 2.5758293035489004;  // 99% two-sided

// Wilson score interval for successes out of n at normal quantile z.
inline std::pair<double, double> wilson_interval(std::int64_t successes,
                                                 std::int64_t n,
                                                 double z = kWilsonZ99) {
  if (n < 1) throw std::invalid_argument("wilson_interval: n must be >= 1");
  const double nn = double(n);
  const double p = double(successes) / nn;
  const double z2 = z * z;
  const double denom = 1 + z2 / nn;
  const double center = (p + z2 / (2 * nn)) / denom;
  const double half =
      z / denom * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

template <typename Scalar = double>
struct SimResult {
  std::vector<std::int64_t> loss_ages;  // kCensored for runs with no loss
  std::vector<std::int64_t> sample_ages;
  std::vector<Scalar> estimate;  // fraction of runs alive before each age
  std::vector<Scalar> ci_low;
  std::vector<Scalar> ci_high;
  std::int64_t runs = 0;
  std::uint64_t seed = 0;
  Scalar confidence = Scalar(0.99);
  std::string rng_id = kRngId;
};

using SimResultd = SimResult<double>;

template <typename Scalar>
SimResult<Scalar> estimate_reliability(
    const ArrayConfig<Scalar>& cfg, std::int64_t horizon, std::int64_t runs,
    std::vector<std::int64_t> sample_ages, std::uint64_t seed) {
  if (runs < 1)
    throw std::invalid_argument("estimate_reliability: runs must be >= 1");
  if (horizon < 0)
    throw std::invalid_argument("estimate_reliability: bad horizon");
  for (std::int64_t age : sample_ages)
    if (age < 0 || age > horizon)
      throw std::invalid_argument(
          "estimate_reliability: sample age outside [0, horizon]");
  cfg.validate();

  const AgingProfile<Scalar> prof = aging_profile(cfg);
  const WearSchedule<Scalar> sched =
      make_wear_schedule(cfg, prof, std::max<std::int64_t>(horizon, 1));

  SimResult<Scalar> result;
  result.loss_ages.reserve(std::size_t(runs));
  for (std::int64_t r = 0; r < runs; ++r) {
    Xoshiro256ss rng = run_stream(seed, r);
    const SimState end = detail::run_core(cfg, prof, sched, horizon, rng);
    result.loss_ages.push_back(end.lost ? end.system_age : kCensored);
  }

  std::vector<std::int64_t> sorted_losses;
  sorted_losses.reserve(result.loss_ages.size());
  for (std::int64_t age : result.loss_ages)
    if (age != kCensored) sorted_losses.push_back(age);
  std::sort(sorted_losses.begin(), sorted_losses.end());

  result.sample_ages = std::move(sample_ages);
  result.estimate.reserve(result.sample_ages.size());
  for (std::int64_t age : result.sample_ages) {
    const auto lost_before =
        std::lower_bound(sorted_losses.begin(), sorted_losses.end(), age) -
        sorted_losses.begin();
    const std::int64_t alive = runs - lost_before;
    result.estimate.push_back(Scalar(alive) / Scalar(runs));
    const auto [lo, hi] = wilson_interval(alive, runs);
    result.ci_low.push_back(Scalar(lo));
    result.ci_high.push_back(Scalar(hi));
  }
  result.runs = runs;
  result.seed = seed;
  return result;
}

}  // namespace ssdraid
