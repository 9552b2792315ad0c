#include "opi/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "opi/agent.hpp"
#include "opi/errors.hpp"
#include "opi/trace_io.hpp"

namespace fs = std::filesystem;

namespace opi {

std::string to_string(Arm arm) {
  switch (arm) {
    case Arm::Opi: return "opi";
    case Arm::Cpi: return "cpi";
    case Arm::Naive: return "naive";
    case Arm::Frozen: return "frozen";
    case Arm::OpiNoPer: return "opi-no-per";
  }
  return "unknown";
}

Arm parse_arm(const std::string& name) {
  for (Arm a : {Arm::Opi, Arm::Cpi, Arm::Naive, Arm::Frozen, Arm::OpiNoPer}) {
    if (to_string(a) == name) return a;
  }
  throw DomainError("unknown arm '" + name + "' (expected opi, cpi, naive, frozen or opi-no-per)");
}

namespace {

FieldSet experiment_only_fields(ExperimentManifest& m) {
  FieldSet set;
  set.add({"experiment.name", [&m] { return m.name; }, [&m](const std::string& v) { m.name = v; }});
  set.add({"experiment.arms",
           [&m] {
             std::string out;
             for (std::size_t i = 0; i < m.arms.size(); ++i) out += (i ? "," : "") + to_string(m.arms[i]);
             return out;
           },
           [&m](const std::string& v) {
             m.arms.clear();
             std::stringstream in(v);
             std::string item;
             while (std::getline(in, item, ',')) {
               item.erase(0, item.find_first_not_of(' '));
               item.erase(item.find_last_not_of(' ') + 1);
               if (!item.empty()) m.arms.push_back(parse_arm(item));
             }
           }});
  set.add({"experiment.sweep", [&m] { return render_count_list(m.sweep); },
           [&m](const std::string& v) { m.sweep = parse_count_list("experiment.sweep", v); }});
  set.add({"experiment.train_fraction", [&m] { return format_double(m.train_fraction); },
           [&m](const std::string& v) { m.train_fraction = parse_real("experiment.train_fraction", v); }});
  set.add({"experiment.ma_window", [&m] { return std::to_string(m.ma_window); },
           [&m](const std::string& v) { m.ma_window = parse_count("experiment.ma_window", v); }});
  return set;
}

std::string arm_config_echo_key() { return "arm"; }

TraceHeader trace_header(const ExperimentManifest& m, const std::string& label, const EngineConfig& engine) {
  TraceHeader header;
  header.emplace_back("manifest_hash", m.hash());
  header.emplace_back(arm_config_echo_key(), label);
  ExperimentManifest echo = m;
  echo.engine = engine;
  for (auto& kv : manifest_fields(echo).snapshot()) header.push_back(std::move(kv));
  return header;
}

std::string header_value(const TraceHeader& header, const std::string& key) {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  throw DomainError("trace header lacks '" + key + "'");
}

fs::path experiment_dir(const ExperimentManifest& m) {
  const fs::path root = m.output_root.empty() ? default_output_root() : m.output_root;
  return root / (m.name + "-" + m.hash());
}

ScoreRow make_row(const std::string& label, std::size_t n_actions, const Trace& trace, double ncp) {
  const Trace scored = headline_records(trace);
  if (scored.empty()) throw DomainError("arm " + label + " produced no post-warm-up records");
  return {label, n_actions, score_trace(scored, ncp)};
}

void write_ma_rewards(const fs::path& path, const std::map<std::string, Trace>& traces, std::size_t window,
                      const std::string& hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# manifest_hash = " << hash << "\nlabel,index,ma_reward\n";
  for (const auto& [label, trace] : traces) {
    const Trace scored = headline_records(trace);
    const auto ma = moving_average_reward(scored, window);
    for (std::size_t i = 0; i < ma.size(); ++i) out << label << ',' << i << ',' << format_double(ma[i]) << '\n';
  }
}

class Workspace {
 public:
  explicit Workspace(const ExperimentManifest& m) : m_(m), dir_(experiment_dir(m)) {
    fs::create_directories(dir_);
    std::ofstream out(dir_ / "manifest.cfg", std::ios::binary);
    if (!out) throw IoError("cannot write into " + dir_.string());
    out << "# manifest_hash = " << m.hash() << '\n' << m.canonical_text();
    result_.directory = dir_;
  }

  const Trace& record(const std::string& label, const EngineConfig& engine, Trace trace) {
    write_trace(dir_ / (label + ".trace.csv"), trace, trace_header(m_, label, engine));
    result_.scores.push_back(make_row(label, engine.n_actions, trace, engine.ncp()));
    return result_.traces[label] = std::move(trace);
  }

  ExperimentResult finish() {
    write_score_table(dir_ / "scores.csv", result_.scores, m_.hash());
    write_ma_rewards(dir_ / "ma_reward.csv", result_.traces, m_.ma_window, m_.hash());
    return std::move(result_);
  }

  const fs::path& dir() const { return dir_; }

 private:
  const ExperimentManifest& m_;
  fs::path dir_;
  ExperimentResult result_;
};

EngineConfig cpi_view(EngineConfig cfg) {
  cfg.n_actions = 1;
  return cfg;
}

}  // namespace

FieldSet manifest_fields(ExperimentManifest& m) {
  FieldSet set = experiment_only_fields(m);
  set.append(engine_fields(m.engine));
  set.append(series_fields(m.series));
  return set;
}

void ExperimentManifest::validate() const {
  if (name.empty() || name.find('/') != std::string::npos) throw DomainError("experiment.name must be a plain name");
  if (arms.empty()) throw DomainError("experiment.arms must name at least one arm");
  for (auto n : sweep) {
    if (!is_action_count(n)) throw DomainError("experiment.sweep values must be of the form 2^n - 1");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("experiment.train_fraction must lie in (0,1)");
  if (ma_window == 0) throw DomainError("experiment.ma_window must be positive");
  engine.validate();
  series.validate();
}

std::string ExperimentManifest::canonical_text() const {
  ExperimentManifest copy = *this;
  return manifest_fields(copy).render();
}

ExperimentManifest parse_manifest(const std::string& text) {
  ExperimentManifest m;
  const auto values = parse_key_values(text);
  KeyValues rest;
  for (const auto& kv : values) {
    if (kv.first == "experiment.output") {
      m.output_root = kv.second;
    } else {
      rest.push_back(kv);
    }
  }
  manifest_fields(m).apply(rest);
  return m;
}

ExperimentManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

EngineConfig without_per(EngineConfig cfg) {
  cfg.predictor.per.sigma = 0.0;
  cfg.predictor.per.rho_start = 0.0;
  cfg.predictor.per.rho_end = 0.0;
  return cfg;
}

Trace run_arm(Arm arm, std::span<const double> series, const EngineConfig& cfg, double train_fraction) {
  switch (arm) {
    case Arm::Opi: return run_online(series, cfg);
    case Arm::Cpi: return run_online_cpi(series, cfg);
    case Arm::Naive: return run_naive_baseline(series, cfg, train_fraction);
    case Arm::Frozen: return run_frozen(series, cfg, train_fraction);
    case Arm::OpiNoPer: return run_online(series, without_per(cfg));
  }
  throw DomainError("unknown arm");
}

ExperimentResult run_experiment(const ExperimentManifest& manifest) {
  manifest.validate();
  const auto series = materialize(manifest.series);
  if (series.size() < min_series_length(manifest.engine)) {
    throw DomainError("series too short: need at least " + std::to_string(min_series_length(manifest.engine)) +
                      " values, got " + std::to_string(series.size()));
  }
  Workspace ws(manifest);
  for (Arm arm : manifest.arms) {
    EngineConfig cfg = manifest.engine;
    if (arm == Arm::OpiNoPer) cfg = without_per(cfg);
    if (arm == Arm::Cpi || arm == Arm::Naive) cfg = cpi_view(cfg);
    ws.record(to_string(arm), cfg, run_arm(arm, series, manifest.engine, manifest.train_fraction));
  }
  if (!manifest.sweep.empty()) {
    std::ofstream plot(ws.dir() / "sweep.csv", std::ios::binary);
    if (!plot) throw IoError("cannot write sweep.csv");
    plot << "# manifest_hash = " << manifest.hash() << "\nn_actions,mean_winkler\n";
    for (auto n : manifest.sweep) {
      EngineConfig cfg = manifest.engine;
      cfg.n_actions = n;
      const auto& trace = ws.record("opi-n" + std::to_string(n), cfg, run_online(series, cfg));
      plot << n << ',' << format_double(score_trace(headline_records(trace), cfg.ncp()).mean_winkler) << '\n';
    }
  }
  return ws.finish();
}

ExperimentResult run_ablation_no_per(ExperimentManifest manifest) {
  manifest.arms = {Arm::Opi, Arm::OpiNoPer};
  return run_experiment(manifest);
}

ExperimentResult run_drift(ExperimentManifest manifest) {
  if (!manifest.series.synthetic() || !manifest.series.has_drift()) {
    throw DomainError("drift scenario needs a synthetic series with series.drift_step set");
  }
  manifest.arms = {Arm::Opi, Arm::Frozen};
  manifest.train_fraction =
      static_cast<double>(manifest.series.drift_step) / static_cast<double>(manifest.series.length);
  // floor(length * fraction) must land exactly on the drift step
  while (split_index(manifest.series.length, manifest.train_fraction) < manifest.series.drift_step) {
    manifest.train_fraction = std::nextafter(manifest.train_fraction, 1.0);
  }
  auto result = run_experiment(manifest);
  std::ofstream out(result.directory / "drift.csv", std::ios::binary);
  if (!out) throw IoError("cannot write drift.csv");
  out << "# manifest_hash = " << manifest.hash() << "\nlabel,post_drift_steps,post_drift_mean_winkler\n";
  for (const auto& [label, trace] : result.traces) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : trace) {
      if (r.step >= manifest.series.drift_step && !r.warmup) {
        sum += r.winkler;
        ++n;
      }
    }
    out << label << ',' << n << ',' << format_double(n ? sum / static_cast<double>(n) : 0.0) << '\n';
  }
  return result;
}

double report_relative_winkler(const Trace& a, const Trace& b) {
  if (a.size() != b.size()) throw DomainError("relative Winkler needs traces of equal length");
  if (a.empty()) throw DomainError("relative Winkler of empty traces");
  double sa = 0.0, sb = 0.0;
  for (const auto& r : a) sa += r.winkler;
  for (const auto& r : b) sb += r.winkler;
  return (sb - sa) / static_cast<double>(a.size());
}

std::vector<ScoreRow> score_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.size() > 10 && name.ends_with(".trace.csv")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ScoreRow> rows;
  for (const auto& file : files) {
    const auto loaded = read_trace(file);
    const double beta = parse_real("engine.beta", header_value(loaded.header, "engine.beta"));
    const auto n = parse_count("engine.n_actions", header_value(loaded.header, "engine.n_actions"));
    rows.push_back(make_row(header_value(loaded.header, "arm"), n, loaded.records, 1.0 - beta));
  }
  return rows;
}

void write_score_table(const fs::path& path, const std::vector<ScoreRow>& rows, const std::string& manifest_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_score_table(out, rows, manifest_hash);
}

void write_score_table(std::ostream& out, const std::vector<ScoreRow>& rows, const std::string& manifest_hash) {
  out << "# manifest_hash = " << manifest_hash << '\n'
      << "label,n_actions,n_steps,mean_winkler,coverage,avg_coverage_deviation,mean_sharpness,crossed_rate\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << row.label << ',' << row.n_actions << ',' << r.n_steps << ',' << format_double(r.mean_winkler) << ','
        << format_double(r.coverage) << ',' << format_double(r.avg_coverage_deviation) << ','
        << format_double(r.mean_sharpness) << ','
        << format_double(static_cast<double>(r.n_crossed) / static_cast<double>(r.n_steps)) << '\n';
  }
}

fs::path default_output_root() {
  if (const char* env = std::getenv("OPI_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

}  // namespace opi
