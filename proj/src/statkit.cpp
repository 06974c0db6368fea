#include "gspdc/statkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gspdc/errors.hpp"
#include "gspdc/rng.hpp"

namespace gspdc::stat {

namespace {

// Binomial pmf row: weights[i] = C(n,i) eta^i (1-eta)^(n-i), i = 0..n.
// Built by the stable multiplicative recurrence; all intermediates stay in
// [0,1] so the row is usable for n well beyond anything seen here.
std::vector<double> binomial_row(int n, double eta) {
  std::vector<double> w(static_cast<std::size_t>(n) + 1, 0.0);
  if (eta <= 0.0) {
    w[0] = 1.0;
    return w;
  }
  if (eta >= 1.0) {
    w[static_cast<std::size_t>(n)] = 1.0;
    return w;
  }
  const double ratio = eta / (1.0 - eta);
  w[0] = std::pow(1.0 - eta, n);
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i) + 1] =
        w[static_cast<std::size_t>(i)] * ratio * static_cast<double>(n - i) /
        static_cast<double>(i + 1);
  }
  return w;
}

double binom_coeff(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) {
    c *= static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return c;
}

void clip_negative(std::vector<double>& probs, double neg_tol, const char* op) {
  for (double& p : probs) {
    if (p < 0.0) {
      if (p < -neg_tol) {
        throw analysis_error(std::string(op) + ": negative probability mass " +
                             std::to_string(p) + " beyond tolerance " +
                             std::to_string(neg_tol) +
                             " (model mismatch or n_max too small)");
      }
      p = 0.0;
    }
  }
}

// Poisson pmf values pois(0..n; mu).
std::vector<double> poisson_row(int n, double mu) {
  std::vector<double> p(static_cast<std::size_t>(n) + 1, 0.0);
  p[0] = std::exp(-mu);
  for (int k = 1; k <= n; ++k) {
    p[static_cast<std::size_t>(k)] =
        p[static_cast<std::size_t>(k) - 1] * mu / static_cast<double>(k);
  }
  return p;
}

} // namespace

double PhotonDist::sum() const {
  return std::accumulate(probs.begin(), probs.end(), 0.0);
}

bool PhotonDist::is_normalized(double tol) const {
  return std::abs(sum() - 1.0) <= tol;
}

PhotonDist forward_loss(const PhotonDist& p, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw config_error("forward_loss: eta must be in [0,1]");
  }
  const int n = p.n_max();
  PhotonDist out;
  out.probs.assign(p.probs.size(), 0.0);
  for (int j = 0; j <= n; ++j) {
    const double pj = p.probs[static_cast<std::size_t>(j)];
    if (pj == 0.0) continue;
    const std::vector<double> w = binomial_row(j, eta);
    for (int i = 0; i <= j; ++i) {
      out.probs[static_cast<std::size_t>(i)] += w[static_cast<std::size_t>(i)] * pj;
    }
  }
  return out;
}

PhotonDist invert_loss(const PhotonDist& observed, double eta, int n_max,
                       double neg_tol) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw config_error("invert_loss: eta must be in (0,1]");
  }
  if (n_max < observed.n_max()) {
    throw config_error("invert_loss: n_max below highest observed count");
  }
  const auto at = [&](int i) -> double {
    return i <= observed.n_max() ? observed.probs[static_cast<std::size_t>(i)] : 0.0;
  };

  std::vector<double> p(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (int j = n_max; j >= 0; --j) {
    double acc = at(j);
    for (int k = j + 1; k <= n_max; ++k) {
      acc -= binom_coeff(k, j) * std::pow(eta, j) * std::pow(1.0 - eta, k - j) *
             p[static_cast<std::size_t>(k)];
    }
    p[static_cast<std::size_t>(j)] = acc / std::pow(eta, j);
  }
  // The division by eta^j amplifies observed-space noise by 1/eta^j, so the
  // clip bound is measured where the input lives: component j may be clipped
  // when its residual (P(j) * eta^j) is within -neg_tol.
  for (int j = 0; j <= n_max; ++j) {
    double& pj = p[static_cast<std::size_t>(j)];
    if (pj < 0.0) {
      if (pj * std::pow(eta, j) < -neg_tol) {
        throw analysis_error("invert_loss: negative probability mass " +
                             std::to_string(pj) + " at j=" + std::to_string(j) +
                             " beyond tolerance (model mismatch or n_max too "
                             "small; a looser tolerance may suit counting noise)");
      }
      pj = 0.0;
    }
  }
  return PhotonDist(std::move(p));
}

PhotonDist dark_correct(const PhotonDist& observed, double dark_mean,
                        double neg_tol) {
  if (!(dark_mean >= 0.0)) {
    throw config_error("dark_correct: dark_mean must be >= 0");
  }
  if (dark_mean == 0.0) return observed;
  const int n = observed.n_max();
  const std::vector<double> pk = poisson_row(n, dark_mean);
  std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 0; i <= n; ++i) {
    double acc = observed.probs[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) {
      acc -= out[static_cast<std::size_t>(k)] * pk[static_cast<std::size_t>(i - k)];
    }
    out[static_cast<std::size_t>(i)] = acc / pk[0];
  }
  clip_negative(out, neg_tol, "dark_correct");
  return PhotonDist(std::move(out));
}

PhotonDist deadtime_correct(const PhotonDist& observed, double merge_prob,
                            double neg_tol) {
  if (!(merge_prob >= 0.0 && merge_prob <= 1.0)) {
    throw config_error("deadtime_correct: merge_prob must be in [0,1]");
  }
  if (merge_prob == 0.0) return observed;
  PhotonDist out = observed;
  if (observed.n_max() < 2) return out;
  const double o2 = observed.probs[2];
  if (merge_prob == 1.0) {
    if (o2 > 0.0) {
      throw analysis_error(
          "deadtime_correct: merge_prob=1 with nonzero 2-count mass is "
          "non-invertible");
    }
    return out;
  }
  const double t2 = o2 / (1.0 - merge_prob);
  out.probs[2] = t2;
  out.probs[1] = observed.probs[1] - merge_prob * t2;
  clip_negative(out.probs, neg_tol, "deadtime_correct");
  return out;
}

double mean_photon(const PhotonDist& p) {
  double m = 0.0;
  for (int j = 0; j <= p.n_max(); ++j) {
    m += static_cast<double>(j) * p.probs[static_cast<std::size_t>(j)];
  }
  return m;
}

double fano(const PhotonDist& p) {
  const double m = mean_photon(p);
  if (m == 0.0) throw analysis_error("fano: undefined for <n> = 0");
  double m2 = 0.0;
  for (int j = 0; j <= p.n_max(); ++j) {
    m2 += static_cast<double>(j) * static_cast<double>(j) *
          p.probs[static_cast<std::size_t>(j)];
  }
  return (m2 - m * m) / m;
}

double g2_zero(const PhotonDist& p) {
  const double m = mean_photon(p);
  if (m == 0.0) throw analysis_error("g2_zero: undefined for <n> = 0");
  double fac = 0.0;
  for (int j = 2; j <= p.n_max(); ++j) {
    fac += static_cast<double>(j) * static_cast<double>(j - 1) *
           p.probs[static_cast<std::size_t>(j)];
  }
  return fac / (m * m);
}

PhotonDist poisson_dist(double mu, int n_max) {
  if (!(mu >= 0.0)) throw config_error("poisson_dist: mu must be >= 0");
  if (n_max < 0) throw config_error("poisson_dist: n_max must be >= 0");
  return PhotonDist(poisson_row(n_max, mu));
}

double match_wcl_by_mean(const PhotonDist& p) { return mean_photon(p); }

double match_wcl_by_p2(double target_p2) {
  if (target_p2 == 0.0) return 0.0;
  const auto p2_of = [](double mu) { return std::exp(-mu) * mu * mu / 2.0; };
  const double p2_max = p2_of(2.0); // pmf(2;mu) peaks at mu = 2
  if (!(target_p2 > 0.0) || target_p2 > p2_max) {
    throw config_error("match_wcl_by_p2: target P(2) unreachable");
  }
  double lo = 0.0, hi = 2.0;
  while (hi - lo > kDefaultTol.bisection) {
    const double mid = 0.5 * (lo + hi);
    (p2_of(mid) < target_p2 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

EfficiencyBudget budget_effective(const std::vector<EfficiencyStage>& stages) {
  if (stages.empty()) {
    throw config_error("budget_effective: at least one stage required");
  }
  EfficiencyBudget b;
  b.stages = stages;
  double rel_var = 0.0;
  for (const auto& s : stages) {
    if (!(s.efficiency > 0.0 && s.efficiency <= 1.0)) {
      throw config_error("budget_effective: stage efficiency must be in (0,1]");
    }
    b.effective *= s.efficiency;
    const double r = s.sigma / s.efficiency;
    rel_var += r * r;
  }
  b.effective_sigma = b.effective * std::sqrt(rel_var);
  return b;
}

std::vector<RatePoint> rate_sweep(std::span<const double> mean_control_grid) {
  std::vector<RatePoint> out;
  out.reserve(mean_control_grid.size());
  for (double m : mean_control_grid) {
    if (!(m >= 0.0)) throw config_error("rate_sweep: mean must be >= 0");
    out.push_back({m, std::exp(-m)});
  }
  return out;
}

namespace {

// Binomial(n, p) sampler used for multinomial resampling. Sequential
// inversion when the expected count is small, normal approximation with
// rounding otherwise (adequate for uncertainty estimation).
std::uint64_t binomial_sample(rng::Stream& st, std::uint64_t n, double p) {
  if (p <= 0.0 || n == 0) return 0;
  if (p >= 1.0) return n;
  const double np = static_cast<double>(n) * p;
  const double nq = static_cast<double>(n) * (1.0 - p);
  if (np > 50.0 && nq > 50.0) {
    const double g = rng::normal(st);
    double x = std::round(np + g * std::sqrt(np * (1.0 - p)));
    x = std::clamp(x, 0.0, static_cast<double>(n));
    return static_cast<std::uint64_t>(x);
  }
  const bool flip = np > nq;
  const double q = flip ? 1.0 - p : p;
  const double u = st.next_unit();
  // pmf recurrence from k = 0
  double pmf = std::pow(1.0 - q, static_cast<double>(n));
  double cdf = pmf;
  std::uint64_t k = 0;
  while (u >= cdf && k < n) {
    ++k;
    pmf *= (static_cast<double>(n - k + 1) / static_cast<double>(k)) *
           (q / (1.0 - q));
    cdf += pmf;
  }
  return flip ? n - k : k;
}

std::vector<double> multinomial_fractions(rng::Stream& st,
                                          const std::vector<double>& probs,
                                          std::uint64_t n) {
  std::vector<double> out(probs.size(), 0.0);
  std::uint64_t remaining = n;
  double rem_p = 1.0;
  for (std::size_t i = 0; i + 1 < probs.size() && remaining > 0; ++i) {
    const double cond = rem_p > 0.0 ? std::clamp(probs[i] / rem_p, 0.0, 1.0) : 0.0;
    const std::uint64_t k = binomial_sample(st, remaining, cond);
    out[i] = static_cast<double>(k) / static_cast<double>(n);
    remaining -= k;
    rem_p -= probs[i];
  }
  if (!probs.empty()) {
    out.back() = static_cast<double>(remaining) / static_cast<double>(n);
  }
  return out;
}

} // namespace

PhotonDist propagate_eta_uncertainty(const PhotonDist& observed,
                                     const EfficiencyBudget& budget, int n_max,
                                     std::uint64_t n_samples, std::uint64_t seed,
                                     std::optional<std::uint64_t> n_windows,
                                     double neg_tol) {
  if (n_samples < 1) {
    throw config_error("propagate_eta_uncertainty: n_samples must be >= 1");
  }
  if (budget.effective_sigma == 0.0 && !n_windows) {
    PhotonDist point = invert_loss(observed, budget.effective, n_max, neg_tol);
    point.sigma.assign(point.probs.size(), 0.0);
    return point;
  }

  const std::size_t nbins = static_cast<std::size_t>(n_max) + 1;
  std::vector<double> sum(nbins, 0.0), sum_sq(nbins, 0.0);
  // Per-sample inversions clip any negative excursion to zero: resampled
  // fractions carry counting noise by construction, so negatives here are
  // expected statistics rather than model mismatch.
  const double sample_tol = std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < n_samples; ++s) {
    rng::Stream st(seed, s, rng::Tag::eta_sample);
    double eta = budget.effective;
    if (budget.effective_sigma > 0.0) {
      do {
        eta = budget.effective + budget.effective_sigma * rng::normal(st);
      } while (!(eta > 0.0 && eta <= 1.0));
    }
    PhotonDist drawn = observed;
    if (n_windows) {
      drawn.probs = multinomial_fractions(st, observed.probs, *n_windows);
    }
    const PhotonDist inv = invert_loss(drawn, eta, n_max, sample_tol);
    for (std::size_t i = 0; i < nbins; ++i) {
      sum[i] += inv.probs[i];
      sum_sq[i] += inv.probs[i] * inv.probs[i];
    }
  }

  PhotonDist out;
  out.probs.resize(nbins);
  out.sigma.resize(nbins);
  const double n = static_cast<double>(n_samples);
  for (std::size_t i = 0; i < nbins; ++i) {
    const double mean = sum[i] / n;
    out.probs[i] = mean;
    const double var = n > 1 ? std::max(0.0, (sum_sq[i] - n * mean * mean) / (n - 1)) : 0.0;
    out.sigma[i] = std::sqrt(var);
  }
  return out;
}

} // namespace gspdc::stat
