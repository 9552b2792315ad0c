// Acceptance suite: one PASS/FAIL line per criterion.
//
// Every stochastic scenario runs twice from the same manifest into two
// directories; criterion 12 compares the artifacts byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opi/agent.hpp"
#include "opi/errors.hpp"
#include "opi/experiment.hpp"
#include "opi/metrics.hpp"
#include "opi/neural.hpp"
#include "opi/quantile_predictor.hpp"
#include "opi/replay.hpp"
#include "opi/trace_io.hpp"

namespace fs = std::filesystem;
using namespace opi;

namespace {

constexpr double kBeta = 0.1;
constexpr std::size_t kLongRun = 30000;
constexpr std::size_t kSweepRun = 20000;

// Standard-normal quantiles, frozen from tables.
constexpr double kZ95 = 1.6448536269514722;
// Phi^-1 at (i + 1) / 80 and at 0.9 + (i + 1) / 80, i = 0..6.
constexpr double kZLower[] = {-2.2414027276, -1.9599639845, -1.7804643416, -1.6448536270,
                              -1.5341205443, -1.4395314709, -1.3563117453};
constexpr double kZUpper[] = {1.3563117453, 1.4395314709, 1.5341205443, 1.6448536270,
                              1.7804643416, 1.9599639845, 2.2414027276};

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Report {
 public:
  void add(int id, const std::string& name, const Outcome& o, double seconds) {
    std::printf("%s %2d %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), seconds);
    std::fflush(stdout);
    failures_ += o.pass ? 0 : 1;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- scenarios

ExperimentManifest stationary(const std::string& name, NoiseFamily family, std::size_t steps) {
  ExperimentManifest m;
  m.name = name;
  m.engine.beta = kBeta;
  m.engine.n_actions = 7;
  m.engine.seed = 1;
  m.engine.agent.hidden = {64, 32};
  m.series.seed = 1;
  m.series.length = steps + m.engine.window;
  m.series.noise.family = family;
  m.ma_window = 1000;
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::set<std::string> names_a, names_b;
  for (const auto& e : fs::directory_iterator(a)) names_a.insert(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) names_b.insert(e.path().filename().string());
  if (names_a != names_b) {
    why = "file sets differ in " + a.filename().string();
    return false;
  }
  for (const auto& n : names_a) {
    if (slurp(a / n) != slurp(b / n)) {
      why = n + " differs in " + a.filename().string();
      return false;
    }
  }
  return true;
}

struct Scenario {
  std::string name;
  ExperimentResult result;
  bool identical_rerun = false;
  std::string rerun_note;
};

class Runner {
 public:
  explicit Runner(fs::path root) : root_(std::move(root)) {
    fs::remove_all(root_);
    fs::create_directories(root_ / "first");
    fs::create_directories(root_ / "second");
  }

  Scenario run(ExperimentManifest m, const std::function<ExperimentResult(const ExperimentManifest&)>& fn) {
    Scenario s;
    s.name = m.name;
    m.output_root = root_ / "first";
    s.result = fn(m);
    m.output_root = root_ / "second";
    const auto again = fn(m);
    s.identical_rerun = same_tree(s.result.directory, again.directory, s.rerun_note);
    scenarios_.push_back(s);
    return s;
  }

  const std::vector<Scenario>& scenarios() const { return scenarios_; }

 private:
  fs::path root_;
  std::vector<Scenario> scenarios_;
};

// Both traces restricted to the steps where neither arm is in warm-up.
std::pair<Trace, Trace> paired_headline(const Trace& a, const Trace& b) {
  std::map<std::size_t, const StepRecord*> other;
  for (const auto& r : b) {
    if (!r.warmup) other[r.step] = &r;
  }
  Trace pa, pb;
  for (const auto& r : a) {
    const auto it = other.find(r.step);
    if (r.warmup || it == other.end()) continue;
    pa.push_back(r);
    pb.push_back(*it->second);
  }
  return {pa, pb};
}

double mean_winkler(const Trace& t) { return score_trace(headline_records(t), 1.0 - kBeta).mean_winkler; }

// ---------------------------------------------------------------- criteria

Outcome metric_exactness() {
  // a few ulps of slack: 2.2 - 2.0 is not exactly 0.2 in binary floating point
  auto same = [](double got, double want) { return std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)); };
  const bool ok = same(pinball_loss(1.0, 0.0, 0.5), 0.5) && same(pinball_loss(0.0, 1.0, 0.1), 0.9) &&
                  pinball_loss(2.0, 2.0, 0.3) == 0.0 && same(winkler_score(1.5, {1.0, 2.0, 0.1}), 1.0) &&
                  same(winkler_score(0.5, {1.0, 2.0, 0.1}), 11.0) && same(winkler_score(2.2, {1.0, 2.0, 0.2}), 3.0) &&
                  reward_from_winkler(3.0) == -3.0 && reward_from_winkler(0.0) == 0.0 &&
                  reward_from_winkler(11.0) == -11.0;
  return {ok, "pinball, Winkler and reward examples"};
}

double fd_objective(const DenseNetwork& net, const std::vector<double>& x, const std::vector<double>& g) {
  const Eigen::VectorXd out = net.forward(x);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * out(static_cast<Eigen::Index>(i));
  return s;
}

Outcome gradient_check() {
  std::mt19937_64 rng(20);
  std::uniform_int_distribution<int> depth(1, 3), width(1, 12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::size_t total = 0, good = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::size_t> sizes{static_cast<std::size_t>(width(rng))};
    for (int l = depth(rng); l > 0; --l) sizes.push_back(static_cast<std::size_t>(width(rng)));
    DenseNetwork net(sizes, 500 + trial);
    std::vector<double> x(sizes.front()), g(sizes.back());
    for (auto& v : x) v = n(rng);
    for (auto& v : g) v = n(rng);
    const auto grads = net.backward(x, g);
    const double h = 1e-5;
    auto probe = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = fd_objective(net, x, g);
      param = keep - h;
      const double down = fd_objective(net, x, g);
      param = keep;
      const double numeric = (up - down) / (2 * h);
      const double rel = std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic));
      ++total;
      good += rel < 1e-4;
    };
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto& layer = net.layers()[l];
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) probe(layer.weight(r, c), grads[l].weight(r, c));
        probe(layer.bias(r), grads[l].bias(r));
      }
    }
  }
  const double frac = static_cast<double>(good) / static_cast<double>(total);
  return {frac >= 0.99, fmt("%.4f of %.0f coordinates within 1e-4", frac, static_cast<double>(total))};
}

std::vector<double> frequencies(const std::vector<double>& priorities, double sigma, std::size_t draws) {
  PerConfig cfg;
  cfg.sigma = sigma;
  cfg.rho_start = cfg.rho_end = 1.0;
  PrioritizedBuffer buf(priorities.size(), 1, cfg);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < priorities.size(); ++i) {
    buf.insert({0.0}, 0.0);
    idx.push_back(i);
  }
  buf.update_priorities(idx, priorities);
  Rng rng(3);
  std::vector<double> freq(priorities.size(), 0.0);
  std::size_t seen = 0;
  while (seen < draws) {
    const auto batch = buf.sample(priorities.size(), rng);
    for (auto j : batch->indices) {
      if (seen++ < draws) freq[j] += 1.0 / static_cast<double>(draws);
    }
  }
  return freq;
}

Outcome per_distribution() {
  const auto pri = frequencies({1.0, 2.0, 4.0}, 1.0, 100000);
  const auto uni = frequencies({1.0, 2.0, 4.0}, 0.0, 100000);
  double dev = 0.0;
  const double want[] = {1.0 / 7, 2.0 / 7, 4.0 / 7};
  for (int i = 0; i < 3; ++i) dev = std::max({dev, std::abs(pri[i] - want[i]), std::abs(uni[i] - 1.0 / 3)});

  // 2-element closed form: P = [0.25, 0.75], rho = 1 -> weights [1, 1/3]
  PerConfig cfg;
  cfg.sigma = 1.0;
  cfg.rho_start = cfg.rho_end = 1.0;
  PrioritizedBuffer two(2, 1, cfg);
  two.insert({0.0}, 0.0);
  two.insert({0.0}, 0.0);
  const std::vector<std::size_t> idx{0, 1};
  two.update_priorities(idx, std::vector<double>{1.0, 3.0});
  Rng rng(4);
  bool weights_ok = two.probability(0) == 0.25 && two.probability(1) == 0.75;
  for (int k = 0; k < 50; ++k) {
    const auto s = two.sample(2, rng);
    for (std::size_t j = 0; j < 2; ++j) {
      const double want_w = s->indices[j] == 0 ? 1.0 : 1.0 / 3.0;
      weights_ok = weights_ok && std::abs(s->weights[j] - want_w) <= 1e-15;
    }
  }
  return {dev <= 0.01 && weights_ok, fmt("max frequency deviation %.4f, IS weights ", dev) + (weights_ok ? "exact" : "wrong")};
}

Outcome quantile_convergence() {
  PredictorConfig cfg;
  const std::size_t h = 168;
  const std::vector<double> x(h, 1.0);
  const double alphas[] = {0.05, 0.5, 0.95};
  const double want[] = {-kZ95, 0.0, kZ95};
  double worst = 0.0;
  std::string got;
  for (int i = 0; i < 3; ++i) {
    QuantilePredictor p(alphas[i], h, cfg, 40 + i);
    Rng rng(60 + i);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int k = 0; k < 20000; ++k) p.observe_and_update(x, n(rng));
    const double q = p.predict(x);
    worst = std::max(worst, std::abs(q - want[i]));
    got += fmt("%+.3f ", q);
  }
  return {worst <= 0.15, "predictions " + got + fmt("max error %.3f", worst)};
}

double mean_lower_proportion(const Trace& t) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& r : headline_records(t)) {
    s += r.proportion;
    ++n;
  }
  return s / static_cast<double>(n);
}

// Grid index of the narrowest log-normal(0,1) pair, from the frozen z tables.
std::size_t lognormal_narrowest_pair() {
  std::size_t best = 0;
  for (std::size_t i = 1; i < 7; ++i) {
    if (std::exp(kZUpper[i]) - std::exp(kZLower[i]) < std::exp(kZUpper[best]) - std::exp(kZLower[best])) best = i;
  }
  return best;
}

Outcome reward_trend(const std::vector<const Scenario*>& runs) {
  bool ok = true;
  std::string worst;
  double worst_gap = 1e300;
  int checked = 0;
  for (const auto* s : runs) {
    for (const auto& [label, trace] : s->result.traces) {
      const auto ma = moving_average_reward(headline_records(trace), 1000);
      if (ma.empty()) continue;
      ++checked;
      const double gap = ma.back() - ma.front();
      if (gap < worst_gap) {
        worst_gap = gap;
        worst = s->name + "/" + label;
      }
      ok = ok && gap >= 0.0;
    }
  }
  return {ok && checked > 0, fmt("%.0f traces; smallest end-minus-start gain %.4f", checked, worst_gap) + " (" + worst + ")"};
}

std::string record_body(const fs::path& trace_file) {
  const std::string text = slurp(trace_file);
  const auto pos = text.find("\nstep,");
  return pos == std::string::npos ? std::string{} : text.substr(pos);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  fs::path trace_dir = "acceptance_traces";
  std::vector<int> only;
  app.add_option("--trace-dir", trace_dir, "where scenario artifacts are written");
  app.add_option("--only", only, "run just these criteria (10 and 12 cover whichever scenarios ran)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Report report;
  Runner runner(trace_dir);
  auto timed = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    report.add(id, name, o, seconds_since(t0));
  };
  auto run_all = [](const ExperimentManifest& m) { return run_experiment(m); };

  timed(1, "metric-exactness", metric_exactness);
  timed(2, "gradient-correctness", gradient_check);
  timed(3, "per-distribution", per_distribution);
  timed(4, "quantile-convergence", quantile_convergence);

  Scenario skew, symmetric;
  timed(5, "opi-vs-cpi", [&] {
    auto skew_m = stationary("lognormal", NoiseFamily::LogNormal, kLongRun);
    skew_m.arms = {Arm::Opi, Arm::Cpi, Arm::OpiNoPer};
    skew = runner.run(skew_m, run_all);
    auto sym_m = stationary("gaussian", NoiseFamily::Gaussian, kLongRun);
    sym_m.arms = {Arm::Opi, Arm::Cpi};
    symmetric = runner.run(sym_m, run_all);
    const double lo = mean_winkler(skew.result.traces.at("opi"));
    const double lc = mean_winkler(skew.result.traces.at("cpi"));
    const double go = mean_winkler(symmetric.result.traces.at("opi"));
    const double gc = mean_winkler(symmetric.result.traces.at("cpi"));
    const double rel = std::abs(go - gc) / gc;
    return Outcome{lo <= lc && rel <= 0.05,
                   fmt("log-normal OPI %.4f vs CPI %.4f; gaussian OPI %.4f vs CPI %.4f", lo, lc, go, gc) +
                       fmt(" (gap %.1f%%, limit 5%%)", 100 * rel)};
  });

  timed(6, "proportion-direction", [&] {
    if (skew.result.traces.empty()) return Outcome{false, "log-normal run unavailable"};
    const auto grid = make_action_space(7, kBeta).proportions;
    const std::size_t best = lognormal_narrowest_pair();
    const double target_dir = grid[best] - kBeta / 2;
    const double mean_prop = mean_lower_proportion(skew.result.traces.at("opi"));
    const double dir = mean_prop - kBeta / 2;
    const bool ok = dir != 0.0 && (dir > 0.0) == (target_dir > 0.0);
    return Outcome{ok, fmt("mean lower proportion %.5f vs beta/2 %.3f; oracle pair lower %.5f", mean_prop, kBeta / 2,
                           grid[best])};
  });

  std::vector<Scenario> amplitude_runs;
  timed(7, "skewness-monotonicity", [&] {
    std::vector<double> rel;
    std::string detail = "CPI minus OPI at amplitudes 1, 2, 4:";
    for (double amp : {1.0, 2.0, 4.0}) {
      auto m = stationary("beta-amp" + fmt("%.0f", amp), NoiseFamily::Beta, kSweepRun);
      m.series.noise.amplitude = amp;
      m.arms = {Arm::Opi, Arm::Cpi};
      amplitude_runs.push_back(runner.run(m, run_all));
      const auto& tr = amplitude_runs.back().result.traces;
      const auto [opi, cpi] = paired_headline(tr.at("opi"), tr.at("cpi"));
      rel.push_back(report_relative_winkler(opi, cpi));
      detail += fmt(" %.4f", rel.back());
    }
    return Outcome{rel[0] <= rel[1] && rel[1] <= rel[2], detail};
  });

  timed(8, "concept-drift", [&] {
    auto m = stationary("drift", NoiseFamily::Gaussian, kSweepRun);
    m.series.drift_step = m.series.length / 2;
    m.series.drift_mean_shift = 3.0;
    m.series.drift_noise.family = NoiseFamily::Beta;
    m.series.drift_noise.amplitude = 2.0;
    const auto s = runner.run(m, [](const ExperimentManifest& x) { return run_drift(x); });
    auto post = [&](const Trace& t) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& r : t) {
        if (r.step >= m.series.drift_step && !r.warmup) {
          sum += r.winkler;
          ++n;
        }
      }
      return sum / static_cast<double>(n);
    };
    const double online = post(s.result.traces.at("opi"));
    const double frozen = post(s.result.traces.at("frozen"));
    return Outcome{online < frozen, fmt("post-drift mean Winkler online %.4f vs frozen %.4f", online, frozen)};
  });

  timed(9, "per-ablation", [&] {
    if (skew.result.traces.empty()) return Outcome{false, "log-normal run unavailable"};
    const double per = mean_winkler(skew.result.traces.at("opi"));
    const double uniform = mean_winkler(skew.result.traces.at("opi-no-per"));
    return Outcome{per <= uniform, fmt("log-normal PER %.4f vs uniform replay %.4f", per, uniform)};
  });

  timed(10, "reward-convergence", [&] {
    std::vector<const Scenario*> stationary_runs{&skew, &symmetric};
    for (const auto& s : amplitude_runs) stationary_runs.push_back(&s);
    return reward_trend(stationary_runs);
  });

  timed(11, "single-action-degeneracy", [&] {
    auto m = stationary("single-action", NoiseFamily::Beta, 5000);
    m.engine.n_actions = 1;
    m.arms = {Arm::Opi, Arm::Cpi};
    const auto s = runner.run(m, run_all);
    const auto a = record_body(s.result.directory / "opi.trace.csv");
    const auto b = record_body(s.result.directory / "cpi.trace.csv");
    return Outcome{!a.empty() && a == b, fmt("%.0f record bytes compared", static_cast<double>(a.size()))};
  });

  timed(12, "determinism", [&] {
    std::size_t same = 0;
    std::string note;
    for (const auto& s : runner.scenarios()) {
      if (s.identical_rerun) {
        ++same;
      } else if (note.empty()) {
        note = "; " + s.rerun_note;
      }
    }
    const auto n = runner.scenarios().size();
    return Outcome{n > 0 && same == n, fmt("%.0f of %.0f scenarios byte-identical on rerun", same, n) + note};
  });

  std::printf("%s: %d criteria failed\n", report.failures() ? "FAIL" : "PASS", report.failures());
  return report.failures() ? 1 : 0;
}
