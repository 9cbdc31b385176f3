#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ssdraid/array_config.hpp"

namespace ssdraid {

// Steady-state wear profile of the array. Internally drives are ordered by
// aging rate ascending ("roles"): role 0 is the drive most recently replaced,
// role n the one carrying the most parity, which wears out and is replaced
// first. input_index maps a role back to the caller's drive slot.
template <typename Scalar = double>
struct AgingProfile {
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

  Vector aging_rates;          // relative wear speed per role, ascending
  Vector erase_probabilities;  // share of array erasures landing on each role
  Vector remaining_fractions;  // lifetime fraction ahead of each role at its
                               // last replacement; 1 for role 0, non-increasing
  std::vector<int> input_index;
};

using AgingProfiled = AgingProfile<double>;

// A parity share p turns into relative wear speed p*n + (1-p): parity chunks
// absorb n times the update traffic of data chunks.
template <typename Scalar>
AgingProfile<Scalar> aging_profile(const ArrayConfig<Scalar>& cfg) {
  cfg.validate();
  const int n1 = cfg.drive_count();
  const Scalar n = Scalar(cfg.data_drives);

  std::vector<int> order(n1);
  std::iota(order.begin(), order.end(), 0);
  auto rate_of = [&](int i) {
    const Scalar p = cfg.parity_fractions[i];
    return p * n + (Scalar(1) - p);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return rate_of(a) < rate_of(b); });

  AgingProfile<Scalar> prof;
  prof.aging_rates.resize(n1);
  prof.erase_probabilities.resize(n1);
  prof.remaining_fractions.resize(n1);
  prof.input_index = order;
  for (int role = 0; role < n1; ++role)
    prof.aging_rates[role] = rate_of(order[role]);

  // Suffix sums so that remaining_fractions[0] is exactly 1.
  Scalar suffix = 0;
  for (int role = n1 - 1; role >= 0; --role) {
    suffix += prof.aging_rates[role];
    prof.remaining_fractions[role] = suffix;
  }
  const Scalar total = prof.remaining_fractions[0];
  for (int role = 0; role < n1; ++role) {
    prof.erase_probabilities[role] = prof.aging_rates[role] / total;
    prof.remaining_fractions[role] /= total;
  }
  return prof;
}

// Per-drive erase counts after k array erasures.
template <typename Scalar = double>
struct AgeState {
  std::int64_t system_age = 0;
  Eigen::Vector<Scalar, Eigen::Dynamic> drive_ages;  // role order, in [0, M]
};

using AgeStated = AgeState<double>;

template <typename Scalar>
Scalar drive_age(const ArrayConfig<Scalar>& cfg, const AgingProfile<Scalar>& prof,
                 std::int64_t system_age, int role) {
  using std::fmod;
  const Scalar q = prof.erase_probabilities[role];
  if (cfg.scheme == Scheme::diffraid) {
    // Every role wraps together at multiples of M*B, so the reduction is
    // exact in integers and wrap boundaries carry no rounding noise.
    const std::int64_t mb = cfg.erasure_limit * cfg.blocks_per_drive;
    const Scalar within = Scalar(system_age % mb);
    return within * q / Scalar(cfg.blocks_per_drive) +
           Scalar(cfg.erasure_limit) *
               (Scalar(1) - prof.remaining_fractions[role]);
  }
  const Scalar m = Scalar(cfg.erasure_limit);
  Scalar x = fmod(Scalar(system_age) * q / Scalar(cfg.blocks_per_drive), m);
  // The product can land an ulp below a wrap multiple, in which case fmod
  // returns essentially the full modulus. Snap to zero when the gap to m is
  // too small for a real age step (q/B per erasure) yet larger than rounding.
  const Scalar step = q / Scalar(cfg.blocks_per_drive);
  if (m - x < std::min(Scalar(1e-9) * m, step / Scalar(4))) x = 0;
  return x;
}

template <typename Scalar>
AgeState<Scalar> drive_ages(const ArrayConfig<Scalar>& cfg,
                            const AgingProfile<Scalar>& prof,
                            std::int64_t system_age) {
  AgeState<Scalar> st;
  st.system_age = system_age;
  st.drive_ages.resize(cfg.drive_count());
  for (int role = 0; role < cfg.drive_count(); ++role)
    st.drive_ages[role] = drive_age(cfg, prof, system_age, role);
  return st;
}

// Error rate of one chunk on a drive with the given erase count:
// c * shape * age^(shape-1). Wear-driven, zero for a fresh drive.
template <typename Scalar>
Scalar chunk_error_rate(const ArrayConfig<Scalar>& cfg, Scalar age) {
  using std::pow;
  if (cfg.shape == Scalar(2)) return Scalar(2) * cfg.rate_constant * age;
  return cfg.rate_constant * cfg.shape * pow(age, cfg.shape - Scalar(1));
}

// Aggregate per-stripe error rate: one chunk per drive in every stripe.
template <typename Scalar>
Scalar aggregate_error_rate(const ArrayConfig<Scalar>& cfg,
                            const AgingProfile<Scalar>& prof,
                            std::int64_t system_age) {
  Scalar sum = 0;
  for (int role = 0; role < cfg.drive_count(); ++role)
    sum += chunk_error_rate(cfg, drive_age(cfg, prof, system_age, role));
  return sum;
}

// Replacement epochs partition system age into segments on which every drive
// age, and hence the aggregate error rate, grows without resets. Inside a
// segment the summed drive age climbs by exactly 1/blocks_per_drive per
// erasure, so for shape == 2 the aggregate rate is affine in k and interval
// means reduce to arithmetic series.
template <typename Scalar = double>
struct WearSegment {
  std::int64_t begin = 0;
  Scalar rate_begin = 0;  // aggregate error rate at the first period
};

template <typename Scalar = double>
struct WearSchedule {
  std::vector<WearSegment<Scalar>> segments;  // cover [0, horizon)
  std::int64_t horizon = 0;
  Scalar rate_slope = 0;  // per-erasure increment inside a segment; shape==2
  bool affine = false;

  std::int64_t segment_end(std::size_t i) const {
    return i + 1 < segments.size() ? segments[i + 1].begin : horizon;
  }
  // Index of the segment containing period k.
  std::size_t segment_of(std::int64_t k) const {
    auto it = std::upper_bound(
        segments.begin(), segments.end(), k,
        [](std::int64_t v, const WearSegment<Scalar>& s) { return v < s.begin; });
    return std::size_t(it - segments.begin()) - 1;
  }
  Scalar rate_at(std::int64_t k, std::size_t seg) const {
    return segments[seg].rate_begin +
           rate_slope * Scalar(k - segments[seg].begin);
  }
};

using WearScheduled = WearSchedule<double>;

// Replacement epochs of one role within (0, horizon), in system-age units.
// Traditional epochs are generally non-integer; boundaries snap to an integer
// within 1e-6 so the segment decomposition matches the fmod age evaluation.
template <typename Scalar>
std::int64_t snap_epoch(double epoch) {
  const double r = std::nearbyint(epoch);
  // The tolerance must track the epoch's own rounding error: at 1e10 periods
  // a few ulps of drift already exceed any fixed absolute threshold.
  const double tol = std::min(0.49, 1e-6 + epoch * 1e-14);
  if (std::abs(epoch - r) < tol) return std::int64_t(r);
  return std::int64_t(std::ceil(epoch));
}

template <typename Scalar>
WearSchedule<Scalar> make_wear_schedule(const ArrayConfig<Scalar>& cfg,
                                        const AgingProfile<Scalar>& prof,
                                        std::int64_t horizon) {
  WearSchedule<Scalar> sched;
  sched.horizon = horizon;
  sched.affine = (cfg.shape == Scalar(2));
  sched.rate_slope = sched.affine ? Scalar(2) * cfg.rate_constant /
                                        Scalar(cfg.blocks_per_drive)
                                  : Scalar(0);

  std::vector<std::int64_t> cuts{0};
  const double mb =
      double(cfg.erasure_limit) * double(cfg.blocks_per_drive);
  for (int role = 0; role < cfg.drive_count(); ++role) {
    const double period = cfg.scheme == Scheme::diffraid
                              ? mb
                              : mb / double(prof.erase_probabilities[role]);
    for (std::int64_t j = 1; period * double(j) < double(horizon); ++j) {
      const std::int64_t cut = snap_epoch<Scalar>(period * double(j));
      if (cut > 0 && cut < horizon) cuts.push_back(cut);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  sched.segments.reserve(cuts.size());
  for (std::int64_t cut : cuts)
    sched.segments.push_back({cut, aggregate_error_rate(cfg, prof, cut)});
  return sched;
}

// Mean aggregate error rate over integer periods [first, last). Exact
// arithmetic-series evaluation when the rate is affine per segment; otherwise
// the mean of up to 4096 evenly spaced samples.
template <typename Scalar>
Scalar mean_rate_over(const ArrayConfig<Scalar>& cfg,
                      const AgingProfile<Scalar>& prof,
                      const WearSchedule<Scalar>& sched, std::int64_t first,
                      std::int64_t last) {
  if (last <= first) throw std::invalid_argument("mean_rate_over: empty interval");
  const std::int64_t len = last - first;
  if (!sched.affine) {
    const std::int64_t samples = std::min<std::int64_t>(len, 4096);
    Scalar sum = 0;
    for (std::int64_t j = 0; j < samples; ++j) {
      const std::int64_t k = first + (2 * j + 1) * len / (2 * samples);
      sum += aggregate_error_rate(cfg, prof, k);
    }
    return sum / Scalar(samples);
  }
  Scalar acc = 0;
  std::size_t seg = sched.segment_of(first);
  std::int64_t u = first;
  while (u < last) {
    const std::int64_t v = std::min(last, sched.segment_end(seg));
    const Scalar start = sched.rate_at(u, seg);
    const Scalar count = Scalar(v - u);
    acc += count * (start + sched.rate_slope * (count - 1) / Scalar(2));
    u = v;
    ++seg;
  }
  return acc / Scalar(len);
}

// Largest aggregate error rate over integer periods [first, last). The rate
// climbs inside every segment (shape > 1), so the maximum sits on a segment's
// last period or on last-1. The affine path evaluates the same per-segment
// reconstruction the interval means use, keeping mean <= max structural.
template <typename Scalar>
Scalar max_rate_over(const ArrayConfig<Scalar>& cfg,
                     const AgingProfile<Scalar>& prof,
                     const WearSchedule<Scalar>& sched, std::int64_t first,
                     std::int64_t last) {
  if (last <= first) throw std::invalid_argument("max_rate_over: empty interval");
  Scalar best = 0;
  std::size_t seg = sched.segment_of(first);
  std::int64_t u = first;
  while (u < last) {
    const std::int64_t v = std::min(last, sched.segment_end(seg));
    best = std::max(best, sched.affine
                              ? sched.rate_at(v - 1, seg)
                              : aggregate_error_rate(cfg, prof, v - 1));
    u = v;
    ++seg;
  }
  return best;
}

}  // namespace ssdraid
