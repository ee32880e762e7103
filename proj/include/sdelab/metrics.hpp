#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdelab/sampler.hpp"
#include "sdelab/schedule.hpp"
#include "sdelab/score.hpp"

namespace sdelab {

double kl_gaussian(double m1, double v1, double m2, double v2);

// Monte-Carlo mean with its standard error; samples whose integrand is not
// finite are dropped and counted in `excluded`.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;
};

using LogDensity1D = std::function<double(double)>;
using Score1D = std::function<double(double)>;

// Mean of log p~(x) - log p(x) over samples x ~ p~.
Estimate kl_mc(std::span<const double> samples, const LogDensity1D& log_p_tilde,
               const LogDensity1D& log_p);
// Mean of (s~(x) - s(x))^2 over samples x ~ p~.
Estimate fisher_mc(std::span<const double> samples, const Score1D& score_tilde,
                   const Score1D& score_p);

struct HistogramOptions {
  std::size_t bins = 200;
  double lo = -10.0;
  double hi = 10.0;
  double smoothing = 1e-8;  // added to every bin's probability before renormalizing
};

// Normalized, smoothed histogram; samples outside [lo, hi] land in the edge
// bins.
std::vector<double> histogram_probabilities(std::span<const double> samples,
                                            const HistogramOptions& options = {});
// Discrete KL between the smoothed histograms of a and b.
double kl_histogram(std::span<const double> a, std::span<const double> b,
                    const HistogramOptions& options = {});
// Discrete KL between the smoothed histogram of `samples` and the bin masses
// of an analytic density (Simpson quadrature per bin; the tails beyond the
// range are folded into the edge bins).
double kl_histogram_to_density(std::span<const double> samples, const LogDensity1D& log_density,
                               const HistogramOptions& options = {});
// First-order plug-in bias of kl_histogram: (K - 1)(1/N_a + 1/N_b)/2 with K the
// number of bins occupied by either sample set.
double histogram_bias_band(std::span<const double> a, std::span<const double> b,
                           const HistogramOptions& options = {});

// ---------------------------------------------------------------------------
// Gaussian testbed: p~_t stays Gaussian under both exact-score flows.

struct GaussianMoments {
  std::vector<double> times;  // aligned with the grid, increasing
  std::vector<double> mean;
  std::vector<double> variance;
};

// Moments of the reverse SDE started from N(prior_mean, prior_var) at
// grid.back(); RK4 with `substeps` per grid interval.
GaussianMoments gaussian_reverse_sde_moments(const GaussianData& data, const NoiseSchedule& schedule,
                                             double prior_mean, double prior_var,
                                             const TimeGrid& grid, int substeps = 8);
// Same for the probability-flow ODE.
GaussianMoments gaussian_probability_flow_moments(const GaussianData& data,
                                                  const NoiseSchedule& schedule, double prior_mean,
                                                  double prior_var, const TimeGrid& grid,
                                                  int substeps = 8);

// E_{N(mean, var)} (s~ - s)^2 for the Gaussian scores of N(mean, var) and
// N(m, v).
double gaussian_fisher(double mean, double var, double m, double v);

enum class EstimateMethod { analytic_gaussian, mc_density, histogram };
std::string to_string(EstimateMethod method);

struct DivergenceReport {
  std::vector<double> times;  // decreasing
  std::vector<double> kl;
  std::vector<double> kl_stderr;
  std::optional<std::vector<double>> fisher;
  EstimateMethod method = EstimateMethod::analytic_gaussian;

  // time,kl,kl_stderr,fisher
  [[nodiscard]] std::string to_csv() const;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  bool trivial_zero = false;  // prior matches the model marginal; nothing to contract
  DivergenceReport report;
  double residual = 0.0;
  double tolerance = 0.0;
  std::string diagnostics;
};

// Contraction of the reverse SDE on the Gaussian testbed. KL is computed from
// the moment ODE; the identity residual compares KL_s against
// KL_t0 - int_s^t0 (g^2 / 2) D_Fisher (trapezoid) relative to KL_t0.
CheckResult theorem1_check_exact(const GaussianData& data, const NoiseSchedule& schedule,
                                 double prior_mean, double prior_var, const TimeGrid& grid);

struct MixtureCheckOptions {
  std::size_t particles = 100000;
  std::size_t checkpoints = 10;
  std::uint64_t seed = 0;
  HistogramOptions histogram;
};

// Reverse SDE ensemble on the mixture testbed; histogram KL against the
// analytic marginal at evenly spaced checkpoints.
CheckResult theorem1_check_mc(const GaussianMixture1D& mixture, const NoiseSchedule& schedule,
                              double prior_mean, double prior_var, const TimeGrid& grid,
                              const MixtureCheckOptions& options = {});

// Invariance of KL under the probability-flow ODE (Gaussian testbed).
CheckResult theorem2_check_exact(const GaussianData& data, const NoiseSchedule& schedule,
                                 double prior_mean, double prior_var, const TimeGrid& grid);

// Mixture testbed: trajectories of the probability-flow ODE carry their log
// density via d log rho / dt = -d/dx [f x - g^2 s / 2]; KL by kl_mc.
CheckResult theorem2_check_transport(const GaussianMixture1D& mixture,
                                     const NoiseSchedule& schedule, double prior_mean,
                                     double prior_var, const TimeGrid& grid,
                                     std::size_t trajectories = 10000, std::uint64_t seed = 0);

struct Theorem3Options {
  std::size_t particles = 100000;
  std::size_t repetitions = 100;
  std::size_t required = 95;
  std::uint64_t seed = 0;
  HistogramOptions histogram;
  std::size_t workers = 1;
};

// Each repetition records one Cycle-SDE channel on mixture data draws and
// replays a draw from every prior through it. A repetition passes for a prior
// when KL_0 + bias bands < KL_t0. One result per prior.
std::vector<CheckResult> theorem3_check(const GaussianMixture1D& mixture,
                                        const NoiseSchedule& schedule,
                                        const std::vector<Prior>& priors, const TimeGrid& grid,
                                        const Theorem3Options& options = {});

// KL_s <= exp(-(1/c) int_s^t g^2) KL_t (+ slack) on `pairs` random grid pairs
// plus all adjacent pairs. c defaults to max(data variance, 1).
CheckResult lsi_rate_check(const GaussianData& data, const NoiseSchedule& schedule,
                           double prior_mean, double prior_var, const TimeGrid& grid,
                           std::optional<double> lsi_constant = std::nullopt,
                           std::size_t pairs = 2000, double slack = 1e-6);

struct NearestResult {
  std::size_t index = 0;
  double distance = 0.0;
};

// L2-nearest dataset point (optionally among one label's members); ties go to
// the lowest index.
NearestResult nearest_dataset_distance(std::span<const double> x, const EmpiricalDataset& dataset,
                                       std::optional<Label> label = std::nullopt);

}  // namespace sdelab
