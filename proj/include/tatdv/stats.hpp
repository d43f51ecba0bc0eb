#pragma once

#include <cstdint>
#include <vector>

namespace tatdv {

double norm_pdf(double x);
double norm_cdf(double x);
// log Phi(x), stable far into the left tail.
double norm_lcdf(double x);
// Inverse standard normal CDF (Wichura's rational approximation plus one
// Newton polish step); |error| < 1e-15 over (0,1).
double inv_norm_cdf(double p);

double mean(const std::vector<double>& v);
// ddof=1 sample variance.
double variance(const std::vector<double>& v);
double median(std::vector<double> v);
// m3/m2^(3/2), population moments.
double skewness(const std::vector<double>& v);
// Linearly interpolated percentile of a sorted vector, rank = p/100*(n-1).
double percentile_sorted(const std::vector<double>& sorted, double p);

uint64_t splitmix64(uint64_t x);

// Deterministic across platforms: self-contained xoshiro256++ stream and
// inverse-CDF normals (library normal_distribution is not portable).
class Rng {
 public:
  explicit Rng(uint64_t seed);
  // uniform on (0,1)
  double uniform();
  double normal() { return inv_norm_cdf(uniform()); }
  double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  uint64_t next_u64();

 private:
  uint64_t s_[4];
};

// Stable child-stream seed for (master, index).
uint64_t derive_seed(uint64_t master, uint64_t index);

}  // namespace tatdv
