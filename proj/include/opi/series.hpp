#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace opi {

enum class NoiseFamily { Gaussian, LogNormal, Beta, WeibullNetLoad };

std::string to_string(NoiseFamily family);
NoiseFamily parse_noise_family(const std::string& name);

/// Additive noise: value = shift + amplitude * raw, raw drawn from the family.
/// WeibullNetLoad draws raw = -W with W ~ Weibull(shape, scale), the renewable
/// output subtracted from load.
struct NoiseParams {
  NoiseFamily family = NoiseFamily::Gaussian;
  double amplitude = 1.0;
  double shift = 0.0;
  double gaussian_sigma = 1.0;
  double lognormal_mu = 0.0;
  double lognormal_sigma = 1.0;
  double beta_a = 2.0;
  double beta_b = 5.0;
  double beta_scale = 4.0;
  double weibull_shape = 2.0;
  double weibull_scale = 1.0;

  double quantile(double alpha) const;
  double mean() const;
};

/// Either a CSV path or a synthetic generator description.
struct SeriesSpec {
  std::string source = "synthetic";
  std::size_t length = 10000;
  std::uint64_t seed = 1;
  double base_level = 10.0;
  double daily_amplitude = 2.0;
  double weekly_amplitude = 1.0;
  std::size_t daily_period = 24;
  std::size_t weekly_period = 168;
  NoiseParams noise{};
  std::size_t drift_step = 0;  // 0 disables drift
  double drift_mean_shift = 0.0;
  NoiseParams drift_noise{};

  bool synthetic() const { return source == "synthetic"; }
  bool has_drift() const { return drift_step > 0; }
  void validate() const;
};

/// A generated series plus its exact conditional quantiles.
struct SyntheticSeries {
  SeriesSpec spec;
  std::vector<double> values;

  double base(std::size_t t) const;
  const NoiseParams& noise_at(std::size_t t) const;
  double quantile(std::size_t t, double alpha) const;

  /// Grid index minimizing q(alpha + 1 - beta) - q(alpha) under the noise active at step t.
  std::size_t optimal_action(std::size_t t, std::span<const double> proportions, double beta) const;
};

SyntheticSeries generate_synthetic(const SeriesSpec& spec);

/// Loads the series described by `spec`: generated when synthetic, read from CSV otherwise.
std::vector<double> materialize(const SeriesSpec& spec);

/// Two columns with a header row: timestamp,value. Timestamps must increase strictly.
std::vector<double> load_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, std::span<const double> values);

/// The h values immediately preceding t, oldest first.
std::vector<double> make_window(std::span<const double> series, std::size_t t, std::size_t h);

/// Chronological split at floor(length * fraction). Each side must hold at least `min_side` values.
std::pair<std::vector<double>, std::vector<double>> split(std::span<const double> series, double train_fraction,
                                                          std::size_t min_side);
std::size_t split_index(std::size_t length, double train_fraction);

/// Linear interpolation between order statistics at rank (n + 1) p, clamped to the sample range.
double empirical_quantile(std::vector<double> values, double p);

}  // namespace opi
