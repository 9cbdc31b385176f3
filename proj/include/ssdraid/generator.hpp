#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

#include "ssdraid/array_config.hpp"

namespace ssdraid {

// Birth-death chain over the number of stripes holding one erroneous chunk.
// A second error in an already-degraded stripe loses data. States 0..S, plus
// an absorbing loss state; a truncated chain keeps 0..cap and routes the
// upward rate out of cap into an absorbing overflow state instead.
template <typename Scalar = double>
struct GeneratorMatrix {
  std::int64_t stripes = 0;
  Scalar stripe_error_rate = 0;  // rate at which any one stripe hits an error
  Scalar repair_rate = 0;
  std::int64_t state_cap = -1;  // -1 keeps the full chain

  bool truncated() const { return state_cap >= 0; }
  std::int64_t live_states() const {
    return (truncated() ? state_cap : stripes) + 1;
  }
  // Total rate out of live state j; the diagonal magnitude |q_jj|.
  Scalar exit_rate(std::int64_t j) const {
    return Scalar(stripes) * stripe_error_rate +
           (j > 0 ? repair_rate : Scalar(0));
  }
  // Live states, then overflow (truncated only), then loss.
  std::int64_t dim() const { return live_states() + (truncated() ? 2 : 1); }

  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dense() const {
    const std::int64_t L = live_states();
    const std::int64_t d = dim();
    const std::int64_t loss = d - 1;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> q =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(d, d);
    const Scalar sig = stripe_error_rate;
    for (std::int64_t j = 0; j < L; ++j) {
      const Scalar up = Scalar(stripes - j) * sig;
      const Scalar lose = Scalar(j) * sig;
      const Scalar down = j > 0 ? repair_rate : Scalar(0);
      q(j, j) = -exit_rate(j);
      if (j + 1 < L)
        q(j, j + 1) = up;
      else if (truncated())
        q(j, L) = up;  // overflow column
      if (lose > 0) q(j, loss) = lose;
      if (j > 0) q(j, j - 1) = down;
    }
    return q;
  }
};

using GeneratorMatrixd = GeneratorMatrix<double>;

template <typename Scalar>
GeneratorMatrix<Scalar> build_generator(std::int64_t stripes,
                                        Scalar stripe_error_rate,
                                        Scalar repair_rate,
                                        std::int64_t state_cap = -1) {
  if (stripes < 1) throw std::invalid_argument("generator: stripes must be >= 1");
  if (!(stripe_error_rate >= 0))
    throw std::invalid_argument("generator: error rate must be >= 0");
  if (!(repair_rate >= 0))
    throw std::invalid_argument("generator: repair rate must be >= 0");
  if (state_cap >= stripes)
    throw std::invalid_argument(
        "generator: state cap must be below the stripe count");
  return {stripes, stripe_error_rate, repair_rate, state_cap};
}

// Generator whose error rate is the mean of the inputs'; shape fields must
// agree. The chain is affine in the error rate, so this is the time average.
template <typename Scalar>
GeneratorMatrix<Scalar> average_generator(
    const std::vector<GeneratorMatrix<Scalar>>& parts) {
  if (parts.empty())
    throw std::invalid_argument("average_generator: no inputs");
  GeneratorMatrix<Scalar> out = parts.front();
  Scalar sum = 0;
  for (const auto& g : parts) {
    if (g.stripes != out.stripes || g.state_cap != out.state_cap ||
        g.repair_rate != out.repair_rate)
      throw std::invalid_argument("average_generator: mismatched shapes");
    sum += g.stripe_error_rate;
  }
  out.stripe_error_rate = sum / Scalar(parts.size());
  return out;
}

// One step of the uniformized chain, v <- v P with P = I + Q / lambda,
// applied matrix-free on the live band; absorbed mass accumulates into the
// loss and overflow scalars. Requires lambda >= S*sigma + mu so diagonal
// entries of P stay non-negative.
template <typename Scalar = double>
class TransitionApplier {
 public:
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

  TransitionApplier(const GeneratorMatrix<Scalar>& gen, Scalar lambda)
      : live_(gen.live_states()) {
    if (!(lambda > 0))
      throw std::invalid_argument("transition: lambda must be positive");
    const Scalar sig = gen.stripe_error_rate;
    const Scalar total = Scalar(gen.stripes) * sig + gen.repair_rate;
    if (lambda < total * (Scalar(1) - Scalar(1e-12)))
      throw std::invalid_argument("transition: lambda below exit rate");
    stay_.resize(live_);
    up_.resize(live_ > 1 ? live_ - 1 : 0);
    lossw_.resize(live_);
    down_ = gen.repair_rate / lambda;
    for (std::int64_t j = 0; j < live_; ++j) {
      stay_[j] = std::max<Scalar>(0, Scalar(1) - gen.exit_rate(j) / lambda);
      lossw_[j] = Scalar(j) * sig / lambda;
      if (j + 1 < live_) up_[j] = Scalar(gen.stripes - j) * sig / lambda;
    }
    over_ = gen.truncated()
                ? Scalar(gen.stripes - gen.state_cap) * sig / lambda
                : Scalar(0);
  }

  std::int64_t live_states() const { return live_; }

  // scratch must have live_states() entries; holds the previous v on return.
  void apply(Vector& v, Scalar& loss, Scalar& overflow, Vector& scratch) const {
    scratch.swap(v);
    loss += lossw_.dot(scratch);
    overflow += over_ * scratch[live_ - 1];
    v = scratch.cwiseProduct(stay_);
    if (live_ > 1) {
      v.tail(live_ - 1) += scratch.head(live_ - 1).cwiseProduct(up_);
      v.head(live_ - 1) += down_ * scratch.tail(live_ - 1);
    }
  }

 private:
  std::int64_t live_;
  Vector stay_, up_, lossw_;
  Scalar down_ = 0, over_ = 0;
};

using TransitionApplierd = TransitionApplier<double>;

}  // namespace ssdraid
