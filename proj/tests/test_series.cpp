#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "opi/errors.hpp"
#include "opi/series.hpp"

using namespace opi;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "opi_series_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

SeriesSpec pure_noise(NoiseFamily family, std::size_t n) {
  SeriesSpec s;
  s.length = n;
  s.seed = 17;
  s.base_level = 0.0;
  s.daily_amplitude = 0.0;
  s.weekly_amplitude = 0.0;
  s.noise.family = family;
  return s;
}

double sample_skewness(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double x : v) {
    m2 += (x - mean) * (x - mean) / n;
    m3 += (x - mean) * (x - mean) * (x - mean) / n;
  }
  return m3 / std::pow(m2, 1.5);
}

// Sorted-sample quantile, independent of empirical_quantile.
double sorted_quantile(const std::vector<double>& sorted, double p) {
  return sorted[static_cast<std::size_t>(p * static_cast<double>(sorted.size()))];
}

}  // namespace

TEST_CASE("load_csv") {
  const auto good = scratch("good.csv");
  write_text(good, "timestamp,value\n1,3.5\n2,-1\n3,7.25\n");
  CHECK(load_csv(good) == std::vector<double>{3.5, -1.0, 7.25});

  const auto iso = scratch("iso.csv");
  write_text(iso, "timestamp,value\n2024-01-01T00:00,1\n2024-01-01T01:00,2\n");
  CHECK(load_csv(iso).size() == 2);

  const auto bad = scratch("bad.csv");
  write_text(bad, "timestamp,value\n1,3.5\n2,abc\n3,1\n");
  try {
    load_csv(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }

  const auto order = scratch("order.csv");
  write_text(order, "timestamp,value\n1,1\n1,2\n");
  CHECK_THROWS_AS(load_csv(order), DomainError);

  const auto headerless = scratch("noheader.csv");
  write_text(headerless, "1,1\n2,2\n");
  CHECK_THROWS_AS(load_csv(headerless), ParseError);
  CHECK_THROWS(load_csv(scratch("missing.csv")));
}

TEST_CASE("csv round trip of a generated series") {
  SeriesSpec s;
  s.length = 500;
  s.noise.family = NoiseFamily::LogNormal;
  const auto gen = generate_synthetic(s);
  const auto path = scratch("round.csv");
  write_csv(path, gen.values);
  CHECK(load_csv(path) == gen.values);
}

TEST_CASE("make_window") {
  const std::vector<double> s{1, 2, 3, 4};
  CHECK(make_window(s, 3, 3) == std::vector<double>{1, 2, 3});
  CHECK(make_window(s, 4, 3) == std::vector<double>{2, 3, 4});
  CHECK(make_window(s, 2, 2) == std::vector<double>{1, 2});
  CHECK_THROWS_AS(make_window(s, 2, 3), DomainError);
  const auto a = make_window(s, 3, 3), b = make_window(s, 4, 3);
  CHECK(std::equal(a.begin() + 1, a.end(), b.begin()));
}

TEST_CASE("split") {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 0.0);
  const auto [train, test] = split(s, 0.7, 10);
  CHECK(train.size() == 70);
  CHECK(test.size() == 30);
  std::vector<double> joined = train;
  joined.insert(joined.end(), test.begin(), test.end());
  CHECK(joined == s);
  CHECK_THROWS_AS(split(s, 0.9, 20), DomainError);
  CHECK_THROWS_AS(split(s, 1.0, 1), DomainError);
}

TEST_CASE("empirical quantile by linear interpolation") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(empirical_quantile(v, 0.05) == doctest::Approx(5.05).epsilon(1e-12));
  CHECK(empirical_quantile(v, 0.95) == doctest::Approx(95.95).epsilon(1e-12));
  CHECK(empirical_quantile(std::vector<double>(12, 4.0), 0.05) == 4.0);
  CHECK(empirical_quantile({1.0, 2.0}, 0.001) == 1.0);
}

TEST_CASE("oracle examples") {
  SeriesSpec g;
  g.length = 400;
  const auto gs = generate_synthetic(g);
  for (std::size_t t : {0u, 17u, 200u}) CHECK(gs.quantile(t, 0.5) == doctest::Approx(gs.base(t)).epsilon(1e-12));

  NoiseParams beta;
  beta.family = NoiseFamily::Beta;
  CHECK(beta.mean() == doctest::Approx(8.0 / 7.0).epsilon(1e-14));

  // log-normal(0,1): enumerate q(a + 0.9) - q(a) over the 7-point grid with the closed form
  SeriesSpec ln;
  ln.length = 200;
  ln.noise.family = NoiseFamily::LogNormal;
  const auto ls = generate_synthetic(ln);
  std::vector<double> grid;
  for (int i = 1; i <= 7; ++i) grid.push_back(i * 0.1 / 8.0);
  // inverse standard normal at the 14 needed probabilities, from boost-free tables
  const double z_lo[] = {-2.2414027276, -1.9599639845, -1.7804643416, -1.6448536270,
                         -1.5341205443, -1.4395314709, -1.3563117453};
  const double z_hi[] = {1.3563117453, 1.4395314709, 1.5341205443, 1.6448536270,
                         1.7804643416, 1.9599639845, 2.2414027276};
  std::size_t best = 0;
  double best_width = 1e300;
  for (std::size_t i = 0; i < 7; ++i) {
    const double w = std::exp(z_hi[i]) - std::exp(z_lo[i]);
    CHECK(ls.quantile(5, grid[i] + 0.9) - ls.quantile(5, grid[i]) == doctest::Approx(w).epsilon(1e-8));
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  CHECK(best == 0);
  CHECK(ls.optimal_action(5, grid, 0.1) == best);
  CHECK(gs.optimal_action(5, grid, 0.1) == 3);

  CHECK_THROWS_AS(parse_noise_family("cauchy"), DomainError);
}

TEST_CASE("generator determinism") {
  SeriesSpec s;
  s.length = 2000;
  s.noise.family = NoiseFamily::Beta;
  CHECK(generate_synthetic(s).values == generate_synthetic(s).values);
  s.seed = 2;
  const auto other = generate_synthetic(s).values;
  s.seed = 1;
  CHECK(other != generate_synthetic(s).values);
}

TEST_CASE("noise quantiles match the closed form at a million draws") {
  for (auto family : {NoiseFamily::Gaussian, NoiseFamily::LogNormal, NoiseFamily::Beta, NoiseFamily::WeibullNetLoad}) {
    CAPTURE(to_string(family));
    const auto gen = generate_synthetic(pure_noise(family, 1000000));
    std::vector<double> sorted = gen.values;
    std::sort(sorted.begin(), sorted.end());
    for (double a : {0.05, 0.5, 0.95}) {
      CAPTURE(a);
      CHECK(std::abs(sorted_quantile(sorted, a) - gen.quantile(0, a)) < 0.01);
    }
  }
}

TEST_CASE("skewness signs") {
  const auto gauss = generate_synthetic(pure_noise(NoiseFamily::Gaussian, 1000000)).values;
  CHECK(std::abs(sample_skewness(gauss)) < 0.05);
  CHECK(sample_skewness(generate_synthetic(pure_noise(NoiseFamily::LogNormal, 1000000)).values) > 0.0);
  CHECK(sample_skewness(generate_synthetic(pure_noise(NoiseFamily::Beta, 1000000)).values) > 0.0);
  // load minus a Weibull draw: the long tail points downwards
  CHECK(sample_skewness(generate_synthetic(pure_noise(NoiseFamily::WeibullNetLoad, 1000000)).values) < 0.0);
}

TEST_CASE("drift shifts the mean after the drift step") {
  SeriesSpec s = pure_noise(NoiseFamily::Gaussian, 200000);
  s.drift_step = 100000;
  s.drift_mean_shift = 3.0;
  s.drift_noise.family = NoiseFamily::Gaussian;
  const auto gen = generate_synthetic(s);
  const double before = std::accumulate(gen.values.begin(), gen.values.begin() + 100000, 0.0) / 1e5;
  const double after = std::accumulate(gen.values.begin() + 100000, gen.values.end(), 0.0) / 1e5;
  CHECK(after - before == doctest::Approx(3.0).epsilon(0.01));
  CHECK(gen.quantile(100000, 0.5) - gen.quantile(99999, 0.5) == doctest::Approx(3.0).epsilon(1e-12));

  SeriesSpec bad = s;
  bad.drift_step = 300000;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("materialize dispatches on source") {
  SeriesSpec s;
  s.length = 300;
  CHECK(materialize(s) == generate_synthetic(s).values);
  const auto path = scratch("mat.csv");
  write_csv(path, std::vector<double>{1.0, 2.0});
  s.source = path.string();
  CHECK(materialize(s) == std::vector<double>{1.0, 2.0});
}
