#pragma once

#include <compare>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "sdelab/schedule.hpp"

namespace sdelab {

// Class label of a conditional model (for the bump testbed: 0 = left, 1 = right).
struct Label {
  int value = 0;
  auto operator<=>(const Label&) const = default;
};

// Linear classifier-free guidance ramp: scale(0) = scale_at_zero,
// scale(t0) = scale_at_t0.
struct GuidanceSchedule {
  double scale_at_zero = 1.0;
  double scale_at_t0 = 3.0;
  double t0 = 0.6;
  bool operator==(const GuidanceSchedule&) const = default;
};

double guidance_scale_at(const GuidanceSchedule& schedule, double t);

// How noise predictions are formed: unconditional (no label), conditional
// (label only), or classifier-free guided (label and ramp).
struct Conditioning {
  std::optional<Label> label;
  std::optional<GuidanceSchedule> guidance;
  bool operator==(const Conditioning&) const = default;
};

// Exact score of an analytic data distribution diffused by the VP forward
// kernel N(sqrt(a_t) x0, (1 - a_t) I). Implementations are immutable and may be
// shared across threads.
class ScoreModel {
 public:
  explicit ScoreModel(NoiseSchedule schedule) : schedule_(schedule) {}
  virtual ~ScoreModel() = default;

  [[nodiscard]] virtual std::size_t dimension() const = 0;
  // out = grad_x log q_t(x | label).
  virtual void score(std::span<const double> x, double t, std::optional<Label> label,
                     std::span<double> out) const = 0;
  [[nodiscard]] virtual std::optional<double> log_density(std::span<const double> x, double t,
                                                          std::optional<Label> label) const {
    (void)x, (void)t, (void)label;
    return std::nullopt;
  }
  [[nodiscard]] virtual bool supports_conditioning() const { return false; }
  // Smallest time at which score() is defined.
  [[nodiscard]] virtual double min_time() const { return 0.0; }

  [[nodiscard]] const NoiseSchedule& schedule() const noexcept { return schedule_; }

  // Noise prediction eps = -sqrt(1 - a_t) * score.
  void eps(std::span<const double> x, double t, std::optional<Label> label,
           std::span<double> out) const;

 private:
  NoiseSchedule schedule_;
};

// eps = -sqrt(1 - a_t) * score (in place allowed).
void score_to_eps(std::span<const double> score, const NoiseSchedule& schedule, double t,
                  std::span<double> out);
// Inverse of score_to_eps; requires t > 0.
void eps_to_score(std::span<const double> eps, const NoiseSchedule& schedule, double t,
                  std::span<double> out);

// eps_uncond + scale * (eps_cond - eps_uncond).
void cfg_eps(const ScoreModel& model, std::span<const double> x, double t, Label label,
             double scale, std::span<double> out);

// Noise prediction under a conditioning policy; guidance uses
// guidance_scale_at(ramp, t).
void predict_eps(const ScoreModel& model, std::span<const double> x, double t,
                 const Conditioning& conditioning, std::span<double> out);

// ---------------------------------------------------------------------------
// Symmetric two-component mixture 1/2 N(-mu, sigma^2) + 1/2 N(mu, sigma^2).

struct GaussianMixture1D {
  double mu = 0.5;
  double sigma = 0.2;
};

double gm1d_log_density(const GaussianMixture1D& model, const NoiseSchedule& schedule, double x,
                        double t);
double gm1d_score(const GaussianMixture1D& model, const NoiseSchedule& schedule, double x,
                  double t);
double gm1d_score_derivative(const GaussianMixture1D& model, const NoiseSchedule& schedule,
                             double x, double t);

// With dimension > 1 the model is the i.i.d. product of the 1D mixture, which
// lets a whole particle ensemble run as one state vector.
class GaussianMixture1DModel final : public ScoreModel {
 public:
  GaussianMixture1DModel(GaussianMixture1D mixture, NoiseSchedule schedule,
                         std::size_t dimension = 1);
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  void score(std::span<const double> x, double t, std::optional<Label> label,
             std::span<double> out) const override;
  [[nodiscard]] std::optional<double> log_density(std::span<const double> x, double t,
                                                  std::optional<Label> label) const override;
  [[nodiscard]] const GaussianMixture1D& mixture() const noexcept { return mixture_; }

 private:
  GaussianMixture1D mixture_;
  std::size_t dimension_;
};

// ---------------------------------------------------------------------------
// Isotropic Gaussian data N(mean, variance I); diffused marginal
// N(sqrt(a_t) mean, (a_t variance + 1 - a_t) I).

struct GaussianData {
  double mean = 0.0;
  double variance = 1.0;
};

struct GaussianMarginal {
  double mean;
  double variance;
};

GaussianMarginal gaussian_marginal(const GaussianData& data, const NoiseSchedule& schedule,
                                   double t);

class GaussianDataModel final : public ScoreModel {
 public:
  GaussianDataModel(GaussianData data, NoiseSchedule schedule, std::size_t dimension = 1);
  [[nodiscard]] std::size_t dimension() const override { return dimension_; }
  void score(std::span<const double> x, double t, std::optional<Label> label,
             std::span<double> out) const override;
  [[nodiscard]] std::optional<double> log_density(std::span<const double> x, double t,
                                                  std::optional<Label> label) const override;
  [[nodiscard]] const GaussianData& data() const noexcept { return data_; }

 private:
  GaussianData data_;
  std::size_t dimension_;
};

// ---------------------------------------------------------------------------
// Finite dataset; the diffused marginal is the equal-weight mixture of
// N(sqrt(a_t) x_i, (1 - a_t) I). Conditioning restricts the mixture to the
// points carrying the label.

class EmpiricalDataset {
 public:
  EmpiricalDataset(std::size_t dimension, std::vector<double> points,
                   std::vector<Label> labels = {});

  [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
  [[nodiscard]] std::size_t size() const noexcept { return points_.size() / dimension_; }
  [[nodiscard]] std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * dimension_, dimension_};
  }
  [[nodiscard]] bool has_labels() const noexcept { return !labels_.empty(); }
  [[nodiscard]] Label label(std::size_t i) const { return labels_.at(i); }
  [[nodiscard]] const std::vector<Label>& labels() const noexcept { return labels_; }
  // Indices of the points with `label` (all points when nullopt). Throws
  // EmptyClassError if no point matches.
  [[nodiscard]] std::span<const std::size_t> members(std::optional<Label> label) const;
  [[nodiscard]] std::vector<Label> distinct_labels() const;

 private:
  std::size_t dimension_;
  std::vector<double> points_;
  std::vector<Label> labels_;
  std::vector<std::size_t> all_;
  std::vector<std::pair<Label, std::vector<std::size_t>>> classes_;
};

void empirical_score(const EmpiricalDataset& dataset, const NoiseSchedule& schedule,
                     std::span<const double> x, double t, std::optional<Label> label,
                     std::span<double> out);
double empirical_log_density(const EmpiricalDataset& dataset, const NoiseSchedule& schedule,
                             std::span<const double> x, double t, std::optional<Label> label);

class EmpiricalScoreModel final : public ScoreModel {
 public:
  EmpiricalScoreModel(std::shared_ptr<const EmpiricalDataset> dataset, NoiseSchedule schedule);
  [[nodiscard]] std::size_t dimension() const override { return dataset_->dimension(); }
  void score(std::span<const double> x, double t, std::optional<Label> label,
             std::span<double> out) const override;
  [[nodiscard]] std::optional<double> log_density(std::span<const double> x, double t,
                                                  std::optional<Label> label) const override;
  [[nodiscard]] bool supports_conditioning() const override { return dataset_->has_labels(); }
  [[nodiscard]] double min_time() const override { return kMinPositiveTime; }
  [[nodiscard]] const EmpiricalDataset& dataset() const noexcept { return *dataset_; }

 private:
  std::shared_ptr<const EmpiricalDataset> dataset_;
};

}  // namespace sdelab
