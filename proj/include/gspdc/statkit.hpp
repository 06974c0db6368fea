#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gspdc::stat {

/// Numerical tolerances used by the analysis operations, collected in one
/// place. `negative_mass` separates floating-point rounding (clipped to zero)
/// from genuine model mismatch (hard error). Empirical histograms carry
/// multinomial noise far above rounding scale, so pipelines that consume
/// measured data usually widen it (see AnalysisSettings).
struct Tolerances {
  double negative_mass = 1e-9;
  double normalization = 1e-9;
  double bisection = 1e-12;
};

inline constexpr Tolerances kDefaultTol{};

/// Truncated photon-number distribution P(0..n_max) with optional 1-sigma
/// uncertainties. Probabilities are not forcibly normalized; `sum()` exposes
/// the represented mass and `tail_mass()` the remainder.
struct PhotonDist {
  std::vector<double> probs;
  std::vector<double> sigma; // empty or same size as probs

  PhotonDist() = default;
  explicit PhotonDist(std::vector<double> p) : probs(std::move(p)) {}

  int n_max() const { return static_cast<int>(probs.size()) - 1; }
  bool has_sigma() const { return !sigma.empty(); }
  double sum() const;
  double tail_mass() const { return 1.0 - sum(); }
  bool is_normalized(double tol = kDefaultTol.normalization) const;
};

struct EfficiencyStage {
  std::string name;
  double efficiency = 1.0;
  double sigma = 0.0;
};

/// Itemized detection-efficiency budget with the effective (product)
/// efficiency and its first-order propagated uncertainty.
struct EfficiencyBudget {
  std::vector<EfficiencyStage> stages;
  double effective = 1.0;
  double effective_sigma = 0.0;
};

/// Binomial loss channel: P'(i) = sum_{j>=i} C(j,i) eta^i (1-eta)^(j-i) P(j).
PhotonDist forward_loss(const PhotonDist& p, double eta);

/// Invert the binomial loss channel on the truncation j <= n_max by
/// back-substitution from the top. Negative components whose observed-space
/// residual P(j) * eta^j lies within -neg_tol are clipped to zero; anything
/// beyond raises analysis_error.
PhotonDist invert_loss(const PhotonDist& observed, double eta, int n_max,
                       double neg_tol = kDefaultTol.negative_mass);

/// Deconvolve an additive independent Poisson(dark_mean) count from the
/// observed count distribution (triangular forward substitution).
PhotonDist dark_correct(const PhotonDist& observed, double dark_mean,
                        double neg_tol = kDefaultTol.negative_mass);

/// Invert the two-count merge channel: a true 2-count window registers 2
/// with probability (1 - merge_prob), else 1. Restricted to counts <= 2;
/// higher bins pass through unchanged.
PhotonDist deadtime_correct(const PhotonDist& observed, double merge_prob,
                            double neg_tol = kDefaultTol.negative_mass);

double mean_photon(const PhotonDist& p);
double fano(const PhotonDist& p);    // (<n^2> - <n>^2) / <n>
double g2_zero(const PhotonDist& p); // <n(n-1)> / <n>^2

/// Poisson pmf truncated at n_max; tail mass is reported via tail_mass().
PhotonDist poisson_dist(double mu, int n_max);

/// Mean of a matched weak-coherent comparator (identity on the mean).
double match_wcl_by_mean(const PhotonDist& p);

/// Smaller root mu of exp(-mu) mu^2/2 = target_p2, bisected on (0, 2).
double match_wcl_by_p2(double target_p2);

EfficiencyBudget budget_effective(const std::vector<EfficiencyStage>& stages);

struct RatePoint {
  double mean_control;     // m
  double vacuum_gate_prob; // exp(-m)
};

std::vector<RatePoint> rate_sweep(std::span<const double> mean_control_grid);

/// Monte Carlo propagation of the efficiency uncertainty through the loss
/// inversion: eta ~ Normal(effective, effective_sigma) truncated to (0,1],
/// optionally folding the multinomial counting error of the observed
/// fractions for n_windows windows. Returns per-bin sample mean as probs and
/// sample standard deviation as sigma. Deterministic for a fixed seed.
PhotonDist propagate_eta_uncertainty(const PhotonDist& observed,
                                     const EfficiencyBudget& budget, int n_max,
                                     std::uint64_t n_samples, std::uint64_t seed,
                                     std::optional<std::uint64_t> n_windows = {},
                                     double neg_tol = kDefaultTol.negative_mass);

} // namespace gspdc::stat
