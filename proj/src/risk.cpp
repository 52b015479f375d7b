#include "rsoc/evaluation.hpp"
#include "rsoc/rng.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rsoc {

namespace {

// 1/sigma * log(1/n * sum exp(sigma * J_i)), max-shifted.
double log_mean_exp_risk(const std::vector<double>& costs, double sigma) {
  const size_t n = costs.size();
  if (sigma == 0.0) {
    double sum = 0.0;
    for (double c : costs) sum += c;
    return sum / static_cast<double>(n);
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (double c : costs) shift = std::max(shift, sigma * c);
  if (!std::isfinite(shift))
    throw ConfigError("sigma*cost overflows; reduce sigma or rescale the cost");
  double sum = 0.0;
  for (double c : costs) sum += std::exp(sigma * c - shift);
  return (shift + std::log(sum / static_cast<double>(n))) / sigma;
}

}  // namespace

RiskEstimate estimate_risk(const std::vector<double>& costs, double sigma,
                           int bootstrap_resamples, std::uint64_t bootstrap_seed) {
  const size_t n = costs.size();
  if (n == 0) throw ConfigError("risk estimate needs at least one cost sample");
  for (double c : costs)
    if (!std::isfinite(c)) throw ConfigError("cost sample contains non-finite values");

  RiskEstimate est;
  est.sigma = sigma;
  est.sample_count = static_cast<int>(n);

  double mean = 0.0;
  for (double c : costs) mean += c;
  mean /= static_cast<double>(n);
  est.mean = mean;

  if (n >= 2) {
    double ss = 0.0;
    for (double c : costs) ss += (c - mean) * (c - mean);
    est.variance = ss / static_cast<double>(n - 1);
  }
  if (n >= 3 && est.variance > 0.0) {
    // Standardize before cubing to avoid overflow, then scale back.
    const double s = std::sqrt(est.variance);
    double sc = 0.0;
    for (double c : costs) {
      const double z = (c - mean) / s;
      sc += z * z * z;
    }
    const double nn = static_cast<double>(n);
    est.skewness = sc * s * s * s * nn / ((nn - 1.0) * (nn - 2.0));
  }

  est.mc_risk = log_mean_exp_risk(costs, sigma);

  if (bootstrap_resamples > 1 && n >= 2) {
    std::vector<double> resample(n);
    std::vector<double> stats;
    stats.reserve(bootstrap_resamples);
    RandomStream stream = RandomStream::at(bootstrap_seed, 0, 2);
    for (int b = 0; b < bootstrap_resamples; ++b) {
      for (size_t i = 0; i < n; ++i) resample[i] = costs[stream.next_below(n)];
      stats.push_back(log_mean_exp_risk(resample, sigma));
    }
    double bm = 0.0;
    for (double v : stats) bm += v;
    bm /= static_cast<double>(stats.size());
    double bv = 0.0;
    for (double v : stats) bv += (v - bm) * (v - bm);
    est.std_error = std::sqrt(bv / static_cast<double>(stats.size() - 1));
  }
  return est;
}

}  // namespace rsoc
