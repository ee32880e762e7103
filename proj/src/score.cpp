#include "sdelab/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sdelab/error.hpp"

namespace sdelab {
namespace {

// log(cosh(z)) without overflow.
double log_cosh(double z) {
  const double a = std::abs(z);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

void check_size(std::span<const double> x, std::size_t dim, const char* what) {
  if (x.size() != dim) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace

double guidance_scale_at(const GuidanceSchedule& schedule, double t) {
  if (!(schedule.scale_at_zero >= 0.0 && schedule.scale_at_t0 >= 0.0))
    throw DomainError("guidance scales must be nonnegative");
  if (!(schedule.t0 > 0.0)) throw DomainError("guidance ramp needs t0 > 0");
  if (!(t >= 0.0 && t <= schedule.t0 * (1.0 + 1e-12)))
    throw DomainError("guidance_scale_at: t outside [0, t0]");
  const double frac = std::min(t / schedule.t0, 1.0);
  return schedule.scale_at_zero + frac * (schedule.scale_at_t0 - schedule.scale_at_zero);
}

void ScoreModel::eps(std::span<const double> x, double t, std::optional<Label> label,
                     std::span<double> out) const {
  score(x, t, label, out);
  score_to_eps(out, schedule_, t, out);
}

void score_to_eps(std::span<const double> score, const NoiseSchedule& schedule, double t,
                  std::span<double> out) {
  const double scale = -std::sqrt(schedule.noise_variance(t));
  for (std::size_t i = 0; i < score.size(); ++i) out[i] = scale * score[i];
}

void eps_to_score(std::span<const double> eps, const NoiseSchedule& schedule, double t,
                  std::span<double> out) {
  const double var = schedule.noise_variance(t);
  if (!(var > 0.0)) throw DomainError("eps_to_score: undefined at t = 0");
  const double scale = -1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < eps.size(); ++i) out[i] = scale * eps[i];
}

void cfg_eps(const ScoreModel& model, std::span<const double> x, double t, Label label,
             double scale, std::span<double> out) {
  if (!model.supports_conditioning())
    throw CapabilityError("classifier-free guidance needs a conditional model");
  if (scale == 1.0) {
    model.eps(x, t, label, out);
    return;
  }
  if (scale == 0.0) {
    model.eps(x, t, std::nullopt, out);
    return;
  }
  std::vector<double> uncond(x.size());
  model.eps(x, t, std::nullopt, uncond);
  model.eps(x, t, label, out);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = uncond[i] + scale * (out[i] - uncond[i]);
}

void predict_eps(const ScoreModel& model, std::span<const double> x, double t,
                 const Conditioning& conditioning, std::span<double> out) {
  if (conditioning.guidance) {
    if (!conditioning.label) throw CapabilityError("guidance requires a label");
    cfg_eps(model, x, t, *conditioning.label, guidance_scale_at(*conditioning.guidance, t), out);
    return;
  }
  if (conditioning.label && !model.supports_conditioning())
    throw CapabilityError("model does not support conditioning");
  model.eps(x, t, conditioning.label, out);
}

// ---------------------------------------------------------------------------

namespace {

struct Gm1dMarginal {
  double mean;
  double variance;
};

Gm1dMarginal gm1d_marginal(const GaussianMixture1D& model, const NoiseSchedule& schedule,
                           double t) {
  if (!(model.sigma > 0.0)) throw DomainError("mixture sigma must be positive");
  const double a = schedule.alpha_bar(t);
  return {std::sqrt(a) * model.mu, a * model.sigma * model.sigma + schedule.noise_variance(t)};
}

}  // namespace

double gm1d_log_density(const GaussianMixture1D& model, const NoiseSchedule& schedule, double x,
                        double t) {
  const auto [mu, var] = gm1d_marginal(model, schedule, t);
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - (x * x + mu * mu) / (2.0 * var) +
         log_cosh(mu * x / var);
}

double gm1d_score(const GaussianMixture1D& model, const NoiseSchedule& schedule, double x,
                  double t) {
  const auto [mu, var] = gm1d_marginal(model, schedule, t);
  return mu / var * std::tanh(mu * x / var) - x / var;
}

double gm1d_score_derivative(const GaussianMixture1D& model, const NoiseSchedule& schedule,
                             double x, double t) {
  const auto [mu, var] = gm1d_marginal(model, schedule, t);
  const double c = std::cosh(mu * x / var);
  const double k = mu / var;
  return k * k / (c * c) - 1.0 / var;
}

GaussianMixture1DModel::GaussianMixture1DModel(GaussianMixture1D mixture, NoiseSchedule schedule,
                                               std::size_t dimension)
    : ScoreModel(schedule), mixture_(mixture), dimension_(dimension) {
  if (!(mixture.sigma > 0.0)) throw DomainError("mixture sigma must be positive");
  if (dimension == 0) throw DomainError("dimension must be positive");
}

void GaussianMixture1DModel::score(std::span<const double> x, double t, std::optional<Label> label,
                                   std::span<double> out) const {
  if (label) throw CapabilityError("Gaussian mixture model is unconditional");
  check_size(x, dimension_, "gm1d score");
  const auto [mu, var] = gm1d_marginal(mixture_, schedule(), t);
  const double k = mu / var;
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = k * std::tanh(k * x[i]) - x[i] / var;
}

std::optional<double> GaussianMixture1DModel::log_density(std::span<const double> x, double t,
                                                          std::optional<Label> label) const {
  if (label) throw CapabilityError("Gaussian mixture model is unconditional");
  check_size(x, dimension_, "gm1d log density");
  double total = 0.0;
  for (double v : x) total += gm1d_log_density(mixture_, schedule(), v, t);
  return total;
}

// ---------------------------------------------------------------------------

GaussianMarginal gaussian_marginal(const GaussianData& data, const NoiseSchedule& schedule,
                                   double t) {
  if (!(data.variance > 0.0)) throw DomainError("Gaussian data variance must be positive");
  const double a = schedule.alpha_bar(t);
  return {std::sqrt(a) * data.mean, a * data.variance + schedule.noise_variance(t)};
}

GaussianDataModel::GaussianDataModel(GaussianData data, NoiseSchedule schedule,
                                     std::size_t dimension)
    : ScoreModel(schedule), data_(data), dimension_(dimension) {
  if (!(data.variance > 0.0)) throw DomainError("Gaussian data variance must be positive");
  if (dimension == 0) throw DomainError("dimension must be positive");
}

void GaussianDataModel::score(std::span<const double> x, double t, std::optional<Label> label,
                              std::span<double> out) const {
  if (label) throw CapabilityError("Gaussian data model is unconditional");
  check_size(x, dimension_, "gaussian score");
  const auto [mean, var] = gaussian_marginal(data_, schedule(), t);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = -(x[i] - mean) / var;
}

std::optional<double> GaussianDataModel::log_density(std::span<const double> x, double t,
                                                     std::optional<Label> label) const {
  if (label) throw CapabilityError("Gaussian data model is unconditional");
  check_size(x, dimension_, "gaussian log density");
  const auto [mean, var] = gaussian_marginal(data_, schedule(), t);
  double sq = 0.0;
  for (double v : x) sq += (v - mean) * (v - mean);
  return -0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * var) -
         sq / (2.0 * var);
}

// ---------------------------------------------------------------------------

EmpiricalDataset::EmpiricalDataset(std::size_t dimension, std::vector<double> points,
                                   std::vector<Label> labels)
    : dimension_(dimension), points_(std::move(points)), labels_(std::move(labels)) {
  if (dimension_ == 0) throw DomainError("dataset dimension must be positive");
  if (points_.empty()) throw DomainError("dataset must not be empty");
  if (points_.size() % dimension_ != 0)
    throw DomainError("dataset points do not share the declared dimension");
  const std::size_t n = points_.size() / dimension_;
  if (!labels_.empty() && labels_.size() != n)
    throw DomainError("dataset labels must be given for every point");
  all_.resize(n);
  for (std::size_t i = 0; i < n; ++i) all_[i] = i;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    auto it = std::find_if(classes_.begin(), classes_.end(),
                           [&](const auto& c) { return c.first == labels_[i]; });
    if (it == classes_.end()) {
      classes_.push_back({labels_[i], {}});
      it = std::prev(classes_.end());
    }
    it->second.push_back(i);
  }
  std::sort(classes_.begin(), classes_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
}

std::span<const std::size_t> EmpiricalDataset::members(std::optional<Label> label) const {
  if (!label) return all_;
  for (const auto& [l, idx] : classes_) {
    if (l == *label) return idx;
  }
  throw EmptyClassError("no dataset point carries label " + std::to_string(label->value));
}

std::vector<Label> EmpiricalDataset::distinct_labels() const {
  std::vector<Label> out;
  for (const auto& c : classes_) out.push_back(c.first);
  return out;
}

namespace {

// Fills log-weights -|x - sqrt(a) x_i|^2 / (2 (1 - a)) for the selected points
// and returns their maximum.
double mixture_logits(const EmpiricalDataset& dataset, std::span<const std::size_t> members,
                      std::span<const double> x, double root_a, double var,
                      std::vector<double>& logits) {
  logits.resize(members.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto p = dataset.point(members[k]);
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = x[j] - root_a * p[j];
      sq += d * d;
    }
    logits[k] = -sq / (2.0 * var);
    best = std::max(best, logits[k]);
  }
  return best;
}

}  // namespace

void empirical_score(const EmpiricalDataset& dataset, const NoiseSchedule& schedule,
                     std::span<const double> x, double t, std::optional<Label> label,
                     std::span<double> out) {
  check_size(x, dataset.dimension(), "empirical score");
  if (!(t > 0.0)) throw DomainError("empirical score undefined at t = 0");
  const auto members = dataset.members(label);
  const double var = schedule.noise_variance(t);
  const double root_a = std::sqrt(schedule.alpha_bar(t));
  thread_local std::vector<double> logits;
  const double best = mixture_logits(dataset, members, x, root_a, var, logits);
  double total = 0.0;
  for (double& l : logits) {
    l = std::exp(l - best);
    total += l;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < members.size(); ++k) {
    const double w = logits[k] / total;
    if (w == 0.0) continue;
    const auto p = dataset.point(members[k]);
    for (std::size_t j = 0; j < x.size(); ++j) out[j] += w * p[j];
  }
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (root_a * out[j] - x[j]) / var;
}

double empirical_log_density(const EmpiricalDataset& dataset, const NoiseSchedule& schedule,
                             std::span<const double> x, double t, std::optional<Label> label) {
  check_size(x, dataset.dimension(), "empirical log density");
  if (!(t > 0.0)) throw DomainError("empirical density undefined at t = 0");
  const auto members = dataset.members(label);
  const double var = schedule.noise_variance(t);
  const double root_a = std::sqrt(schedule.alpha_bar(t));
  std::vector<double> logits;
  const double best = mixture_logits(dataset, members, x, root_a, var, logits);
  double total = 0.0;
  for (double l : logits) total += std::exp(l - best);
  const double d = static_cast<double>(x.size());
  return best + std::log(total) - std::log(static_cast<double>(members.size())) -
         0.5 * d * std::log(2.0 * std::numbers::pi * var);
}

EmpiricalScoreModel::EmpiricalScoreModel(std::shared_ptr<const EmpiricalDataset> dataset,
                                         NoiseSchedule schedule)
    : ScoreModel(schedule), dataset_(std::move(dataset)) {
  if (!dataset_) throw std::invalid_argument("EmpiricalScoreModel: null dataset");
}

void EmpiricalScoreModel::score(std::span<const double> x, double t, std::optional<Label> label,
                                std::span<double> out) const {
  empirical_score(*dataset_, schedule(), x, t, label, out);
}

std::optional<double> EmpiricalScoreModel::log_density(std::span<const double> x, double t,
                                                       std::optional<Label> label) const {
  return empirical_log_density(*dataset_, schedule(), x, t, label);
}

}  // namespace sdelab
