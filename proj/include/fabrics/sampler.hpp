#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fabrics/rng.hpp"
#include "fabrics/search_space.hpp"

namespace fabrics {

enum class SamplerKind { Random, Tpe };

inline const char* name_of(SamplerKind k) {
  return k == SamplerKind::Random ? "random" : "tpe";
}

struct TpeConfig {
  int n_startup = 10;        // uniform trials before the estimator kicks in
  double gamma = 0.25;       // fraction of history forming the good set
  int n_candidates = 24;     // candidates drawn from the good estimator
  double bandwidth_floor = 0.01;  // as a fraction of the (transformed) range
};

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Tpe;
  TpeConfig tpe;
};

// Independent uniform draw: log-scaled parameters are uniform in log10
// space, integer parameters uniform on the inclusive integer range.
inline double sample_uniform(const ParameterDecl& d, Rng& rng) {
  double value;
  if (d.scale == Scale::Log) {
    value = std::pow(10.0, rng.uniform(std::log10(d.lower), std::log10(d.upper)));
  } else if (d.kind == ValueKind::Int) {
    value = static_cast<double>(
        rng.uniform_int(static_cast<std::int64_t>(d.lower), static_cast<std::int64_t>(d.upper)));
  } else {
    value = rng.uniform(d.lower, d.upper);
  }
  if (d.kind == ValueKind::Int) value = std::clamp(std::round(value), d.lower, d.upper);
  return std::clamp(value, d.lower, d.upper);
}

inline ParamValues sample_uniform(const SearchSpace& space, Rng& rng) {
  ParamValues values;
  for (const auto& d : space.decls()) values[d.name] = sample_uniform(d, rng);
  return values;
}

namespace detail {

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

// One-dimensional Parzen estimator: equally weighted Gaussian kernels at the
// observed values plus one wide prior kernel spanning the domain (the
// published TPE construction), truncated to the parameter bounds. Without
// the prior the sampler cannot leave the incumbent cluster once the
// bandwidth has shrunk.
class ParzenEstimator {
 public:
  ParzenEstimator(std::vector<double> centers, double lo, double hi, double bandwidth)
      : centers_(std::move(centers)), lo_(lo), hi_(hi), bandwidth_(bandwidth) {
    prior_center_ = 0.5 * (lo + hi);
    prior_bandwidth_ = hi - lo;
  }

  double sample(Rng& rng) const {
    // Kernel n is the prior.
    const auto k = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(centers_.size())));
    const bool prior = k == centers_.size();
    const double center = prior ? prior_center_ : centers_[k];
    const double bw = prior ? prior_bandwidth_ : bandwidth_;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double draw = rng.normal(center, bw);
      if (draw >= lo_ && draw <= hi_) return draw;
    }
    return std::clamp(center, lo_, hi_);
  }

  double log_pdf(double x) const {
    // log of the truncated-mixture density via log-sum-exp.
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(centers_.size() + 1);
    auto add_kernel = [&](double center, double bw) {
      const double z = (x - center) / bw;
      const double normalizer =
          standard_normal_cdf((hi_ - center) / bw) - standard_normal_cdf((lo_ - center) / bw);
      const double log_kernel = -0.5 * z * z - std::log(bw) - 0.5 * std::log(2.0 * M_PI) -
                                std::log(std::max(normalizer, 1e-300));
      terms.push_back(log_kernel);
      max_term = std::max(max_term, log_kernel);
    };
    for (double c : centers_) add_kernel(c, bandwidth_);
    add_kernel(prior_center_, prior_bandwidth_);
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - max_term);
    return max_term + std::log(acc / static_cast<double>(terms.size()));
  }

  double bandwidth() const { return bandwidth_; }

 private:
  std::vector<double> centers_;
  double lo_, hi_, bandwidth_ = 0.0;
  double prior_center_ = 0.0, prior_bandwidth_ = 1.0;
};

inline double to_estimator_domain(const ParameterDecl& d, double v) {
  return d.scale == Scale::Log ? std::log10(v) : v;
}

inline double from_estimator_domain(const ParameterDecl& d, double v) {
  double out = d.scale == Scale::Log ? std::pow(10.0, v) : v;
  if (d.kind == ValueKind::Int) out = std::round(out);
  return std::clamp(out, d.lower, d.upper);
}

}  // namespace detail

// Tree-structured Parzen Estimator step: split the history into the
// gamma-quantile of lowest-cost trials (good) and the rest (bad), model each
// parameter with a truncated Parzen density per set, draw candidates from
// the good model and keep the one maximizing sum_p [log l(p) - log g(p)].
// Falls back to uniform sampling until n_startup trials exist.
template <typename TrialRange>
ParamValues suggest_tpe(const SearchSpace& space, const TrialRange& history, Rng& rng,
                        const TpeConfig& config = {}) {
  const auto n = static_cast<std::size_t>(std::distance(std::begin(history), std::end(history)));
  if (n < static_cast<std::size_t>(config.n_startup)) return sample_uniform(space, rng);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::begin(history)[a].cost < std::begin(history)[b].cost;
  });
  const auto n_good =
      static_cast<std::size_t>(std::ceil(config.gamma * static_cast<double>(n)));

  struct ParamModel {
    detail::ParzenEstimator good;
    detail::ParzenEstimator bad;
  };
  std::vector<ParamModel> models;
  models.reserve(space.size());
  for (const auto& d : space.decls()) {
    const double lo = detail::to_estimator_domain(d, d.lower);
    const double hi = detail::to_estimator_domain(d, d.upper);
    std::vector<double> good_values, bad_values;
    double mean = 0.0;
    for (std::size_t rank = 0; rank < n; ++rank) {
      const auto& trial = std::begin(history)[order[rank]];
      const double v = detail::to_estimator_domain(d, trial.params.at(d.name));
      (rank < n_good ? good_values : bad_values).push_back(v);
      mean += v;
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : good_values) var += (v - mean) * (v - mean);
    for (double v : bad_values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    // Scott-style bandwidth from the whole history of this parameter, shared
    // by both estimators, floored so degenerate histories keep exploring.
    const double bandwidth =
        std::max(1.06 * std::sqrt(var) * std::pow(static_cast<double>(n), -0.2),
                 config.bandwidth_floor * (hi - lo));
    models.push_back({detail::ParzenEstimator(std::move(good_values), lo, hi, bandwidth),
                      detail::ParzenEstimator(std::move(bad_values), lo, hi, bandwidth)});
  }

  ParamValues best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int cand = 0; cand < config.n_candidates; ++cand) {
    ParamValues values;
    double score = 0.0;
    std::size_t pi = 0;
    for (const auto& d : space.decls()) {
      const auto& model = models[pi++];
      const double raw = model.good.sample(rng);
      const double value = detail::from_estimator_domain(d, raw);
      const double scored_at = detail::to_estimator_domain(d, value);
      score += model.good.log_pdf(scored_at) - model.bad.log_pdf(scored_at);
      values[d.name] = value;
    }
    if (score > best_score) {
      best_score = score;
      best = std::move(values);
    }
  }
  return best;
}

}  // namespace fabrics
