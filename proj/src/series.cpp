#include "opi/series.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/lognormal.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/weibull.hpp>

#include "opi/errors.hpp"
#include "opi/random.hpp"

namespace opi {

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::Gaussian: return "gaussian";
    case NoiseFamily::LogNormal: return "lognormal";
    case NoiseFamily::Beta: return "beta";
    case NoiseFamily::WeibullNetLoad: return "weibull-netload";
  }
  return "unknown";
}

NoiseFamily parse_noise_family(const std::string& name) {
  if (name == "gaussian") return NoiseFamily::Gaussian;
  if (name == "lognormal") return NoiseFamily::LogNormal;
  if (name == "beta") return NoiseFamily::Beta;
  if (name == "weibull-netload") return NoiseFamily::WeibullNetLoad;
  throw DomainError("unknown noise family '" + name + "'");
}

namespace {

double raw_quantile(const NoiseParams& n, double alpha) {
  namespace bm = boost::math;
  switch (n.family) {
    case NoiseFamily::Gaussian: return bm::quantile(bm::normal(0.0, n.gaussian_sigma), alpha);
    case NoiseFamily::LogNormal: return bm::quantile(bm::lognormal(n.lognormal_mu, n.lognormal_sigma), alpha);
    case NoiseFamily::Beta: return n.beta_scale * bm::quantile(bm::beta_distribution<>(n.beta_a, n.beta_b), alpha);
    case NoiseFamily::WeibullNetLoad:
      return -bm::quantile(bm::weibull(n.weibull_shape, n.weibull_scale), 1.0 - alpha);
  }
  throw DomainError("unknown noise family");
}

double raw_mean(const NoiseParams& n) {
  switch (n.family) {
    case NoiseFamily::Gaussian: return 0.0;
    case NoiseFamily::LogNormal: return std::exp(n.lognormal_mu + 0.5 * n.lognormal_sigma * n.lognormal_sigma);
    case NoiseFamily::Beta: return n.beta_scale * n.beta_a / (n.beta_a + n.beta_b);
    case NoiseFamily::WeibullNetLoad: return -n.weibull_scale * std::tgamma(1.0 + 1.0 / n.weibull_shape);
  }
  throw DomainError("unknown noise family");
}

void validate_noise(const NoiseParams& n) {
  const bool ok = n.amplitude > 0.0 && n.gaussian_sigma > 0.0 && n.lognormal_sigma > 0.0 && n.beta_a > 0.0 &&
                  n.beta_b > 0.0 && n.beta_scale > 0.0 && n.weibull_shape > 0.0 && n.weibull_scale > 0.0 &&
                  std::isfinite(n.shift) && std::isfinite(n.lognormal_mu);
  if (!ok) throw DomainError("noise parameters must be finite with positive scales");
}

/// Draws raw noise values for one parameter set.
class NoiseSampler {
 public:
  explicit NoiseSampler(const NoiseParams& p)
      : p_(p),
        normal_(0.0, p.gaussian_sigma),
        lognormal_(p.lognormal_mu, p.lognormal_sigma),
        gamma_a_(p.beta_a, 1.0),
        gamma_b_(p.beta_b, 1.0),
        weibull_(p.weibull_shape, p.weibull_scale) {}

  double operator()(Rng& rng) {
    double raw = 0.0;
    switch (p_.family) {
      case NoiseFamily::Gaussian: raw = normal_(rng); break;
      case NoiseFamily::LogNormal: raw = lognormal_(rng); break;
      case NoiseFamily::Beta: {
        const double x = gamma_a_(rng);
        const double y = gamma_b_(rng);
        raw = p_.beta_scale * x / (x + y);
        break;
      }
      case NoiseFamily::WeibullNetLoad: raw = -weibull_(rng); break;
    }
    return p_.shift + p_.amplitude * raw;
  }

 private:
  NoiseParams p_;
  std::normal_distribution<double> normal_;
  std::lognormal_distribution<double> lognormal_;
  std::gamma_distribution<double> gamma_a_;
  std::gamma_distribution<double> gamma_b_;
  std::weibull_distribution<double> weibull_;
};

}  // namespace

double NoiseParams::quantile(double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("quantile proportion must lie in (0,1)");
  return shift + amplitude * raw_quantile(*this, alpha);
}

double NoiseParams::mean() const { return shift + amplitude * raw_mean(*this); }

void SeriesSpec::validate() const {
  if (length == 0) throw DomainError("series length must be positive");
  if (!synthetic()) return;
  validate_noise(noise);
  if (daily_period == 0 || weekly_period == 0) throw DomainError("seasonal periods must be positive");
  if (has_drift()) {
    if (drift_step >= length) throw DomainError("drift step must lie inside the series");
    validate_noise(drift_noise);
  }
}

double SyntheticSeries::base(std::size_t t) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double tt = static_cast<double>(t);
  double b = spec.base_level + spec.daily_amplitude * std::sin(two_pi * tt / static_cast<double>(spec.daily_period)) +
             spec.weekly_amplitude * std::sin(two_pi * tt / static_cast<double>(spec.weekly_period));
  if (spec.has_drift() && t >= spec.drift_step) b += spec.drift_mean_shift;
  return b;
}

const NoiseParams& SyntheticSeries::noise_at(std::size_t t) const {
  return spec.has_drift() && t >= spec.drift_step ? spec.drift_noise : spec.noise;
}

double SyntheticSeries::quantile(std::size_t t, double alpha) const { return base(t) + noise_at(t).quantile(alpha); }

std::size_t SyntheticSeries::optimal_action(std::size_t t, std::span<const double> proportions, double beta) const {
  if (proportions.empty()) throw DomainError("empty proportion grid");
  const auto& noise = noise_at(t);
  std::size_t best = 0;
  double best_width = 0.0;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    const double width = noise.quantile(proportions[i] + (1.0 - beta)) - noise.quantile(proportions[i]);
    if (i == 0 || width < best_width) {
      best = i;
      best_width = width;
    }
  }
  return best;
}

SyntheticSeries generate_synthetic(const SeriesSpec& spec) {
  if (!spec.synthetic()) throw DomainError("generate_synthetic needs a synthetic spec");
  spec.validate();
  SyntheticSeries out{spec, {}};
  out.values.reserve(spec.length);
  Rng rng = make_rng(spec.seed, kSeriesStream);
  NoiseSampler pre(spec.noise);
  NoiseSampler post(spec.drift_noise);
  for (std::size_t t = 0; t < spec.length; ++t) {
    const bool drifted = spec.has_drift() && t >= spec.drift_step;
    out.values.push_back(out.base(t) + (drifted ? post(rng) : pre(rng)));
  }
  return out;
}

std::vector<double> materialize(const SeriesSpec& spec) {
  if (spec.synthetic()) return generate_synthetic(spec).values;
  auto values = load_csv(spec.source);
  if (spec.length > 0 && spec.length < values.size()) values.resize(spec.length);
  return values;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(text.c_str(), &end);
  return errno == 0 && end == text.c_str() + text.size() && std::isfinite(out);
}

bool timestamp_less(const std::string& a, const std::string& b) {
  double x = 0.0, y = 0.0;
  if (parse_number(a, x) && parse_number(b, y)) return x < y;
  return a < b;
}

}  // namespace

std::vector<double> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open series file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header row in " + path.string(), 1);
  ++line_no;
  {
    // a header whose value column parses as a number is a data row
    const auto comma = line.find(',');
    double probe = 0.0;
    if (comma == std::string::npos || parse_number(trim(line.substr(comma + 1)), probe)) {
      throw ParseError("missing header row 'timestamp,value'", 1);
    }
  }
  std::vector<double> values;
  std::string prev_stamp;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw ParseError("expected two columns 'timestamp,value'", line_no);
    }
    const std::string stamp = trim(line.substr(0, comma));
    const std::string field = trim(line.substr(comma + 1));
    double value = 0.0;
    if (stamp.empty()) throw ParseError("empty timestamp", line_no);
    if (!parse_number(field, value)) throw ParseError("non-numeric value '" + field + "'", line_no);
    if (!values.empty() && !timestamp_less(prev_stamp, stamp)) {
      throw DomainError("timestamps must increase strictly (line " + std::to_string(line_no) + ")");
    }
    prev_stamp = stamp;
    values.push_back(value);
  }
  return values;
}

void write_csv(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write series file " + path.string());
  out << "timestamp,value\n" << std::setprecision(17);
  for (std::size_t t = 0; t < values.size(); ++t) out << t << ',' << values[t] << '\n';
}

std::vector<double> make_window(std::span<const double> series, std::size_t t, std::size_t h) {
  if (t < h) throw DomainError("window start precedes the series: t=" + std::to_string(t) + " < h=" + std::to_string(h));
  if (t > series.size()) throw DomainError("window end beyond the series");
  return {series.begin() + static_cast<std::ptrdiff_t>(t - h), series.begin() + static_cast<std::ptrdiff_t>(t)};
}

std::size_t split_index(std::size_t length, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("train fraction must lie in (0,1)");
  return static_cast<std::size_t>(std::floor(static_cast<double>(length) * train_fraction));
}

std::pair<std::vector<double>, std::vector<double>> split(std::span<const double> series, double train_fraction,
                                                          std::size_t min_side) {
  const std::size_t cut = split_index(series.size(), train_fraction);
  if (cut < min_side || series.size() - cut < min_side) {
    throw DomainError("split leaves a side shorter than " + std::to_string(min_side) + " values");
  }
  return {{series.begin(), series.begin() + static_cast<std::ptrdiff_t>(cut)},
          {series.begin() + static_cast<std::ptrdiff_t>(cut), series.end()}};
}

double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("empirical quantile of an empty sample");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile proportion must lie in (0,1)");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double rank = std::clamp((n + 1.0) * p, 1.0, n);  // 1-based
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  if (lo >= values.size()) return values.back();
  return values[lo - 1] + frac * (values[lo] - values[lo - 1]);
}

}  // namespace opi
