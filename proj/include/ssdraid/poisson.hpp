#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace ssdraid {

// Walks Poisson(mean) point masses w_u = e^-mean mean^u / u! upward from
// u = 0, keeping a compensated running cdf. Large means start far below the
// smallest double, so the walk stays in log space until terms become
// representable; in the linear phase the multiplicative recurrence is
// re-anchored against lgamma periodically to stop drift.
class PoissonTermWalker {
 public:
  explicit PoissonTermWalker(double mean) : mean_(mean) {
    if (!(mean >= 0))
      mean_ = std::numeric_limits<double>::quiet_NaN();
    if (mean_ > 0) {
      log_mean_ = std::log(mean_);
      logw_ = -mean_;
      log_phase_ = logw_ < kLogTiny;
      weight_ = log_phase_ ? 0.0 : std::exp(logw_);
    } else {
      weight_ = 1.0;  // a zero mean puts all mass on u = 0
      log_phase_ = false;
    }
    accumulate(weight_);
  }

  std::int64_t index() const { return u_; }
  double weight() const { return weight_; }
  double cdf() const { return cdf_; }
  double tail() const { return cdf_ < 1.0 ? 1.0 - cdf_ : 0.0; }

  void advance() {
    ++u_;
    if (log_phase_) {
      logw_ += log_mean_ - std::log(double(u_));
      if (logw_ >= kLogTiny) {
        log_phase_ = false;
        resync();
      } else {
        weight_ = 0.0;
        return;
      }
    } else {
      weight_ *= mean_ / double(u_);
      if (++since_sync_ == 4096) resync();
    }
    accumulate(weight_);
  }

 private:
  // Stay in log space until terms are comfortably inside the normal double
  // range; subnormal weights would enter the multiplicative recurrence with
  // only a handful of significant bits.
  static constexpr double kLogTiny = -690.0;

  void resync() {
    weight_ = std::exp(double(u_) * log_mean_ - mean_ -
                       std::lgamma(double(u_) + 1.0));
    since_sync_ = 0;
  }

  void accumulate(double w) {
    const double y = w - comp_;
    const double t = cdf_ + y;
    comp_ = (t - cdf_) - y;
    cdf_ = t;
  }

  double mean_ = 0;
  double log_mean_ = 0;
  double logw_ = 0;
  double weight_ = 0;
  double cdf_ = 0;
  double comp_ = 0;
  std::int64_t u_ = 0;
  std::int64_t since_sync_ = 0;
  bool log_phase_ = false;
};

}  // namespace ssdraid
