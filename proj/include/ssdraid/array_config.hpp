#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ssdraid {

// How parity is laid out across drives, which decides the wear-reset law at
// replacement epochs: an even layout wears all drives in lockstep, an
// age-staggered layout keeps a fixed age ladder by shifting parity to the
// oldest drive at every replacement.
enum class Scheme { traditional, diffraid };

inline const char* scheme_name(Scheme s) {
  return s == Scheme::traditional ? "traditional" : "diffraid";
}

template <typename Scalar = double>
struct ArrayConfig {
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

  int data_drives = 0;             // array holds data_drives + 1 SSDs
  std::int64_t blocks_per_drive = 0;
  std::int64_t stripes = 0;
  std::int64_t erasure_limit = 0;  // block erase-count ceiling per drive
  Scheme scheme = Scheme::traditional;
  Vector parity_fractions;         // share of parity chunks per drive, sums to 1

  Scalar rate_constant = 0;        // c in the per-chunk error-rate law
  Scalar shape = 2;                // exponent of the error-rate law, > 1
  Scalar recovery_rate = Scalar(1e-3);
  Scalar erase_interval = Scalar(1e-2);  // seconds between array erasures

  int drive_count() const { return data_drives + 1; }

  void validate() const {
    auto fail = [](const std::string& what) {
      throw std::invalid_argument("array config: " + what);
    };
    if (data_drives < 1) fail("data_drives must be >= 1");
    if (blocks_per_drive < 1) fail("blocks_per_drive must be >= 1");
    if (stripes < 1) fail("stripes must be >= 1");
    if (erasure_limit < 1) fail("erasure_limit must be >= 1");
    if (parity_fractions.size() != drive_count())
      fail("parity_fractions must have one entry per drive");
    Scalar sum = 0;
    for (Eigen::Index i = 0; i < parity_fractions.size(); ++i) {
      const Scalar p = parity_fractions[i];
      if (!(p >= 0 && p <= 1)) fail("parity fraction out of [0,1]");
      sum += p;
    }
    using std::abs;
    if (abs(sum - Scalar(1)) > Scalar(1e-9)) fail("parity fractions must sum to 1");
    if (!(rate_constant >= 0)) fail("rate_constant must be >= 0");
    if (!(shape > 1)) fail("shape must be > 1");
    if (!(recovery_rate >= 0)) fail("recovery_rate must be >= 0");
    if (!(erase_interval > 0)) fail("erase_interval must be > 0");
  }

  // FNV-1a over a canonical rendering; identifies the config in manifests.
  std::uint64_t digest() const {
    std::ostringstream os;
    os.precision(17);
    os << data_drives << '|' << blocks_per_drive << '|' << stripes << '|'
       << erasure_limit << '|' << scheme_name(scheme) << '|';
    for (Eigen::Index i = 0; i < parity_fractions.size(); ++i)
      os << double(parity_fractions[i]) << ',';
    os << '|' << double(rate_constant) << '|' << double(shape) << '|'
       << double(recovery_rate) << '|' << double(erase_interval);
    const std::string s = os.str();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }
};

using ArrayConfigd = ArrayConfig<double>;

// Even parity: every drive carries 1/(n+1) of the parity chunks.
template <typename Scalar = double>
Eigen::Vector<Scalar, Eigen::Dynamic> even_parity(int data_drives) {
  return Eigen::Vector<Scalar, Eigen::Dynamic>::Constant(
      data_drives + 1, Scalar(1) / Scalar(data_drives + 1));
}

// Parity shares from a normal density with mean n+1 and the given width,
// restricted to [0, n+1] and binned per drive: share_i is the density mass on
// [i, i+1] over the mass on [0, n+1]. Small widths concentrate parity on the
// last drive; large widths approach an even split.
template <typename Scalar = double>
Eigen::Vector<Scalar, Eigen::Dynamic> truncated_normal_parity(int data_drives,
                                                              Scalar width) {
  if (!(width > 0))
    throw std::invalid_argument("truncated_normal_parity: width must be > 0");
  const int n1 = data_drives + 1;
  using std::erf;
  const Scalar inv = Scalar(1) / (width * Scalar(std::sqrt(2.0)));
  auto cdf = [&](Scalar x) {
    return Scalar(0.5) * (Scalar(1) + erf((x - Scalar(n1)) * inv));
  };
  Eigen::Vector<Scalar, Eigen::Dynamic> p(n1);
  const Scalar total = cdf(Scalar(n1)) - cdf(Scalar(0));
  for (int i = 0; i < n1; ++i)
    p[i] = (cdf(Scalar(i + 1)) - cdf(Scalar(i))) / total;
  return p;
}

// The small bring-up array: 3+1 drives, 80 blocks, 80 stripes, limit 100,
// repair rate 1. The error-rate constant is left to the caller.
template <typename Scalar = double>
ArrayConfig<Scalar> small_preset() {
  ArrayConfig<Scalar> cfg;
  cfg.data_drives = 3;
  cfg.blocks_per_drive = 80;
  cfg.stripes = 80;
  cfg.erasure_limit = 100;
  cfg.rate_constant = Scalar(1.5625e-5);
  cfg.recovery_rate = 1;
  cfg.erase_interval = Scalar(1e-2);
  cfg.scheme = Scheme::traditional;
  cfg.parity_fractions = even_parity<Scalar>(3);
  return cfg;
}

}  // namespace ssdraid
