#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ssdraid/aging.hpp"
#include "ssdraid/array_config.hpp"
#include "ssdraid/generator.hpp"
#include "ssdraid/poisson.hpp"

namespace ssdraid {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename Scalar = double>
struct SolverSettings {
  std::int64_t step_size = 0;    // periods combined per solve interval
  Scalar max_error = Scalar(1e-3);  // series-truncation budget over the horizon
  std::int64_t state_cap = -1;   // cap the chain at this many degraded stripes
  bool adaptive_cap = false;     // grow the cap when overflow mass builds up
  Scalar cap_threshold = Scalar(1e-3);

  void validate() const {
    if (step_size < 1)
      throw std::invalid_argument("solver: step_size must be >= 1");
    if (!(max_error > 0 && max_error < 1))
      throw std::invalid_argument("solver: max_error must be in (0, 1)");
    if (state_cap == 0 || state_cap < -1)
      throw std::invalid_argument("solver: state_cap must be >= 1 (or -1)");
    if (adaptive_cap && !(cap_threshold > 0 && cap_threshold < 1))
      throw std::invalid_argument("solver: cap_threshold must be in (0, 1)");
  }
};

using SolverSettingsd = SolverSettings<double>;

// One solve interval covers at least a twentieth of a drive lifetime.
template <typename Scalar>
SolverSettings<Scalar> default_settings(const ArrayConfig<Scalar>& cfg) {
  SolverSettings<Scalar> s;
  s.step_size =
      std::max<std::int64_t>(1, cfg.erasure_limit * cfg.blocks_per_drive / 20);
  return s;
}

// Raw (unnormalized) chain state. Series truncation leaks probability mass,
// so live + loss + overflow stays within accumulated_bound of 1 rather than
// exactly 1; reliability is reported on the surviving mass.
template <typename Scalar = double>
struct StateVector {
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

  std::int64_t system_age = 0;
  Vector live;           // probabilities over 0..cap (or 0..S) degraded stripes
  Scalar loss = 0;       // absorbed data-loss mass
  Scalar overflow = 0;   // absorbed mass above the state cap
  Scalar accumulated_bound = 0;  // total series mass dropped so far

  Scalar mass() const { return live.sum() + loss + overflow; }
  Scalar mass_deficit() const { return Scalar(1) - mass(); }
  // Deviation bound for the reported curve: dropped series mass plus, on a
  // capped chain, everything that left through the cap.
  Scalar total_bound() const { return accumulated_bound + overflow; }
  Scalar reliability() const {
    const Scalar m = mass();
    return m > 0 ? (m - loss - overflow) / m : Scalar(0);
  }
};

using StateVectord = StateVector<double>;

template <typename Scalar = double>
struct CurveSample {
  std::int64_t system_age = 0;
  Scalar reliability = 0;
  Scalar bound = 0;  // total_bound() at this age
};

template <typename Scalar = double>
struct CurveMeta {
  std::uint64_t config_digest = 0;
  SolverSettings<Scalar> settings;
  std::int64_t horizon = 0;
  std::int64_t sample_stride = 0;
  std::int64_t final_cap = -1;   // cap in force at the end (-1 = full chain)
  bool exact_interval_means = true;  // false once rate means are sampled
  bool budget_warning = false;   // final bound exceeded max_error
};

template <typename Scalar = double>
struct ReliabilityCurve {
  std::vector<CurveSample<Scalar>> samples;
  CurveMeta<Scalar> meta;
};

using ReliabilityCurved = ReliabilityCurve<double>;

template <typename Scalar = double>
struct SolverWorkspace {
  typename StateVector<Scalar>::Vector v, scratch, acc;
};

// Advances the state across one interval of length tau under the averaged
// generator: accumulate Poisson(lambda*tau)-weighted powers of the
// uniformized step until the remaining series tail fits the budget, which is
// then added to the state's accumulated bound.
template <typename Scalar>
void uniformized_interval(StateVector<Scalar>& st,
                          const GeneratorMatrix<Scalar>& gen, Scalar lambda,
                          Scalar tau, Scalar budget,
                          SolverWorkspace<Scalar>& ws) {
  if (!(budget > 0)) throw SolverError("interval: budget must be positive");
  if (lambda < 0 || tau < 0) throw SolverError("interval: negative rate span");
  if (lambda == 0 || tau == 0) return;  // frozen chain, nothing moves
  if (st.live.size() != gen.live_states())
    throw SolverError("interval: state size does not match the chain");
  if (!(double(lambda) * double(tau) < 1e9))
    throw SolverError(
        "interval: series mean too large to sum; reduce the step size");

  TransitionApplier<Scalar> step(gen, lambda);
  PoissonTermWalker walk(double(lambda * tau));
  const std::int64_t ceiling =
      std::int64_t(10.0 * double(lambda * tau)) + 100;

  ws.v = st.live;
  Scalar loss = st.loss;
  Scalar overflow = st.overflow;
  ws.acc.setZero(st.live.size());
  Scalar acc_loss = 0, acc_overflow = 0;
  for (;;) {
    const Scalar w = Scalar(walk.weight());
    if (w != 0) {
      ws.acc += w * ws.v;
      acc_loss += w * loss;
      acc_overflow += w * overflow;
    }
    if (walk.tail() <= budget) break;
    if (walk.index() >= ceiling)
      throw SolverError(
          "interval: series did not meet its budget before the term ceiling; "
          "reduce the step size");
    step.apply(ws.v, loss, overflow, ws.scratch);
    walk.advance();
  }
  st.live.swap(ws.acc);
  st.loss = acc_loss;
  st.overflow = acc_overflow;
  st.accumulated_bound += Scalar(walk.tail());
}

namespace detail {

// Interval chaining shared by the full and capped solvers. The observer is
// called with the state after every interval.
template <typename Scalar, typename Observer>
ReliabilityCurve<Scalar> run_chain(const ArrayConfig<Scalar>& cfg,
                                   SolverSettings<Scalar> settings,
                                   std::int64_t horizon,
                                   std::int64_t sample_stride,
                                   Observer&& observe) {
  cfg.validate();
  settings.validate();
  if (horizon < 1) throw std::invalid_argument("solver: horizon must be >= 1");
  if (sample_stride < 1)
    throw std::invalid_argument("solver: sample stride must be >= 1");
  if (settings.state_cap >= cfg.stripes)
    throw std::invalid_argument(
        "solver: state cap must be below the stripe count");

  const auto prof = aging_profile(cfg);
  const auto sched = make_wear_schedule(cfg, prof, horizon);
  const std::int64_t S = cfg.stripes;
  const Scalar mu = cfg.recovery_rate;

  const bool capped = settings.state_cap >= 0 || settings.adaptive_cap;
  std::int64_t cap = -1;
  if (capped) {
    cap = settings.state_cap >= 1 ? settings.state_cap : 8;
    cap = std::min<std::int64_t>(cap, S - 1);
    if (cap < 1)
      throw std::invalid_argument("solver: stripe count too small to cap");
  }

  StateVector<Scalar> st;
  st.live.setZero((capped ? cap : S) + 1);
  st.live[0] = 1;

  ReliabilityCurve<Scalar> curve;
  curve.meta.config_digest = cfg.digest();
  curve.meta.settings = settings;
  curve.meta.horizon = horizon;
  curve.meta.sample_stride = sample_stride;
  curve.meta.exact_interval_means = sched.affine;
  curve.samples.push_back({0, Scalar(1), Scalar(0)});

  SolverWorkspace<Scalar> ws;
  StateVector<Scalar> snapshot;
  std::int64_t t = 0;
  while (t < horizon) {
    const std::int64_t next_sample = (t / sample_stride + 1) * sample_stride;
    const std::int64_t end =
        std::min({t + settings.step_size, next_sample, horizon});
    const std::int64_t len = end - t;
    const Scalar budget =
        Scalar(len) * settings.max_error / Scalar(horizon);
    const Scalar tau = Scalar(len) * cfg.erase_interval;

    // Once the chain is all but absorbed, the remaining live mass can move
    // later results by at most its own magnitude: fold it into the bound
    // and coast instead of uniformizing dead intervals.
    const Scalar live_mass = st.live.sum();
    if (live_mass <= Scalar(1e-14)) {
      st.accumulated_bound += live_mass;
      st.live.setZero();
      t = end;
      st.system_age = t;
      observe(st);
      if (t % sample_stride == 0 || t == horizon)
        curve.samples.push_back({t, st.reliability(), st.total_bound()});
      continue;
    }

    if (settings.adaptive_cap) snapshot = st;
    for (;;) {
      const Scalar mean_sig = mean_rate_over(cfg, prof, sched, t, end);
      const Scalar max_sig = max_rate_over(cfg, prof, sched, t, end);
      const auto gen = build_generator(S, mean_sig, mu, cap);
      const Scalar lambda = mu + Scalar(S) * max_sig;
      uniformized_interval(st, gen, lambda, tau, budget, ws);
      if (!settings.adaptive_cap || cap >= S - 1 ||
          st.overflow <= settings.cap_threshold / 2)
        break;
      // Too much mass has piled up against the cap: widen the chain and
      // replay this interval from the snapshot, zero-padded.
      cap = std::min<std::int64_t>(cap * 2, S - 1);
      st = snapshot;
      st.live.conservativeResizeLike(
          StateVector<Scalar>::Vector::Zero(cap + 1));
    }

    t = end;
    st.system_age = t;
    observe(st);
    if (t % sample_stride == 0 || t == horizon)
      curve.samples.push_back({t, st.reliability(), st.total_bound()});
  }

  curve.meta.final_cap = cap;
  curve.meta.budget_warning = st.total_bound() > settings.max_error;
  return curve;
}

inline void no_observer(const StateVectord&) {}

}  // namespace detail

// Full-chain transient solve; reliability sampled every sample_stride
// periods (plus the horizon), with the running deviation bound.
template <typename Scalar>
ReliabilityCurve<Scalar> solve(const ArrayConfig<Scalar>& cfg,
                               const SolverSettings<Scalar>& settings,
                               std::int64_t horizon,
                               std::int64_t sample_stride) {
  if (settings.state_cap >= 0 || settings.adaptive_cap)
    throw std::invalid_argument("solve: use truncated_solve for capped chains");
  return detail::run_chain(cfg, settings, horizon, sample_stride,
                           [](const StateVector<Scalar>&) {});
}

// Capped-chain solve: states above the cap collapse into an absorbing
// overflow bucket whose mass joins the reported bound.
template <typename Scalar>
ReliabilityCurve<Scalar> truncated_solve(const ArrayConfig<Scalar>& cfg,
                                         const SolverSettings<Scalar>& settings,
                                         std::int64_t horizon,
                                         std::int64_t sample_stride) {
  if (settings.state_cap < 0 && !settings.adaptive_cap)
    throw std::invalid_argument("truncated_solve: no state cap configured");
  return detail::run_chain(cfg, settings, horizon, sample_stride,
                           [](const StateVector<Scalar>&) {});
}

// Instrumented variant for verification: the observer sees the raw state
// after every interval. Full or capped per the settings.
template <typename Scalar, typename Observer>
ReliabilityCurve<Scalar> solve_observed(const ArrayConfig<Scalar>& cfg,
                                        const SolverSettings<Scalar>& settings,
                                        std::int64_t horizon,
                                        std::int64_t sample_stride,
                                        Observer&& observe) {
  return detail::run_chain(cfg, settings, horizon, sample_stride,
                           std::forward<Observer>(observe));
}

}  // namespace ssdraid
