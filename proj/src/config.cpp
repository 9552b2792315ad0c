#include "opi/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "opi/errors.hpp"
#include "opi/trace_io.hpp"

namespace opi {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
FieldSet::Field real_field(std::string key, T& target) {
  return {key, [&target] { return format_double(target); },
          [&target, key](const std::string& v) { target = parse_real(key, v); }};
}

template <typename T>
FieldSet::Field count_field(std::string key, T& target) {
  return {key, [&target] { return std::to_string(target); },
          [&target, key](const std::string& v) { target = static_cast<T>(parse_count(key, v)); }};
}

FieldSet::Field list_field(std::string key, std::vector<std::size_t>& target) {
  return {key, [&target] { return render_count_list(target); },
          [&target, key](const std::string& v) { target = parse_count_list(key, v); }};
}

FieldSet::Field init_field(std::string key, WeightInit& target) {
  return {key, [&target] { return std::string(target == WeightInit::Zero ? "zero" : "fan-in-uniform"); },
          [&target, key](const std::string& v) {
            if (v == "zero") {
              target = WeightInit::Zero;
            } else if (v == "fan-in-uniform") {
              target = WeightInit::FanInUniform;
            } else {
              throw DomainError(key + ": expected zero or fan-in-uniform");
            }
          }};
}

void add_adam(FieldSet& set, const std::string& prefix, AdamConfig& adam) {
  set.add(real_field(prefix + ".learning_rate", adam.learning_rate));
  set.add(real_field(prefix + ".adam_beta1", adam.beta1));
  set.add(real_field(prefix + ".adam_beta2", adam.beta2));
  set.add(real_field(prefix + ".adam_epsilon", adam.epsilon));
  set.add(real_field(prefix + ".clip_norm", adam.clip_norm));
}

void add_noise(FieldSet& set, const std::string& prefix, NoiseParams& n) {
  set.add({prefix + ".family", [&n] { return to_string(n.family); },
           [&n](const std::string& v) { n.family = parse_noise_family(v); }});
  set.add(real_field(prefix + ".amplitude", n.amplitude));
  set.add(real_field(prefix + ".shift", n.shift));
  set.add(real_field(prefix + ".gaussian_sigma", n.gaussian_sigma));
  set.add(real_field(prefix + ".lognormal_mu", n.lognormal_mu));
  set.add(real_field(prefix + ".lognormal_sigma", n.lognormal_sigma));
  set.add(real_field(prefix + ".beta_a", n.beta_a));
  set.add(real_field(prefix + ".beta_b", n.beta_b));
  set.add(real_field(prefix + ".beta_scale", n.beta_scale));
  set.add(real_field(prefix + ".weibull_shape", n.weibull_shape));
  set.add(real_field(prefix + ".weibull_scale", n.weibull_scale));
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

KeyValues parse_key_values(const std::string& text) {
  std::istringstream in(text);
  return parse_key_values(in);
}

void FieldSet::append(const FieldSet& other) {
  fields_.insert(fields_.end(), other.fields_.begin(), other.fields_.end());
}

bool FieldSet::knows(const std::string& key) const {
  for (const auto& f : fields_) {
    if (f.key == key) return true;
  }
  return false;
}

void FieldSet::apply(const KeyValues& values) const {
  for (const auto& [key, value] : values) {
    const Field* field = nullptr;
    for (const auto& f : fields_) {
      if (f.key == key) field = &f;
    }
    if (!field) throw DomainError("unknown config key '" + key + "'");
    field->set(value);
  }
}

std::string FieldSet::render() const {
  std::string out;
  for (const auto& f : fields_) out += f.key + " = " + f.get() + "\n";
  return out;
}

KeyValues FieldSet::snapshot() const {
  KeyValues out;
  out.reserve(fields_.size());
  for (const auto& f : fields_) out.emplace_back(f.key, f.get());
  return out;
}

double parse_real(const std::string& key, const std::string& text) {
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || errno != 0 || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw DomainError(key + ": expected a real number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& text) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || text.front() == '-' || errno != 0 || end != text.c_str() + text.size()) {
    throw DomainError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::vector<std::size_t> parse_count_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<std::size_t>(parse_count(key, item)));
  }
  return out;
}

std::string render_count_list(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

FieldSet engine_fields(EngineConfig& cfg) {
  FieldSet set;
  set.add(real_field("engine.beta", cfg.beta));
  set.add(count_field("engine.n_actions", cfg.n_actions));
  set.add(count_field("engine.window", cfg.window));
  set.add(count_field("engine.lead", cfg.lead));
  set.add(count_field("engine.seed", cfg.seed));
  set.add({"engine.feature_scaling",
           [&cfg] { return std::string(cfg.scaling == FeatureScaling::MinMax ? "minmax" : "none"); },
           [&cfg](const std::string& v) {
             if (v == "none") {
               cfg.scaling = FeatureScaling::None;
             } else if (v == "minmax") {
               cfg.scaling = FeatureScaling::MinMax;
             } else {
               throw DomainError("engine.feature_scaling: expected none or minmax");
             }
           }});
  set.add(count_field("engine.scaling_window", cfg.scaling_window));
  set.add(real_field("engine.epsilon_decay_fraction", cfg.epsilon_decay_fraction));

  auto& p = cfg.predictor;
  set.add(list_field("predictor.hidden", p.hidden));
  set.add(count_field("predictor.batch_size", p.batch_size));
  set.add(count_field("predictor.buffer_capacity", p.buffer_capacity));
  add_adam(set, "predictor", p.adam);
  set.add({"predictor.loss",
           [&p] { return std::string(p.loss == QuantileLoss::SquaredPinball ? "squared-pinball" : "pinball"); },
           [&p](const std::string& v) {
             if (v == "pinball") {
               p.loss = QuantileLoss::Pinball;
             } else if (v == "squared-pinball") {
               p.loss = QuantileLoss::SquaredPinball;
             } else {
               throw DomainError("predictor.loss: expected pinball or squared-pinball");
             }
           }});
  set.add(init_field("predictor.init", p.init));
  set.add(real_field("per.sigma", p.per.sigma));
  set.add(real_field("per.rho_start", p.per.rho_start));
  set.add(real_field("per.rho_end", p.per.rho_end));
  set.add(count_field("per.rho_horizon", p.per.rho_horizon));
  set.add(real_field("per.priority_floor", p.per.priority_floor));

  auto& a = cfg.agent;
  set.add(list_field("agent.hidden", a.hidden));
  set.add(count_field("agent.batch_size", a.batch_size));
  set.add(count_field("agent.buffer_capacity", a.buffer_capacity));
  set.add(real_field("agent.gamma", a.gamma));
  set.add(real_field("agent.tau", a.tau));
  add_adam(set, "agent", a.adam);
  set.add(real_field("agent.epsilon_start", a.epsilon.start));
  set.add(real_field("agent.epsilon_end", a.epsilon.end));
  set.add(count_field("agent.epsilon_decay_steps", a.epsilon.decay_steps));
  set.add(init_field("agent.init", a.init));
  return set;
}

FieldSet series_fields(SeriesSpec& spec) {
  FieldSet set;
  set.add({"series.source", [&spec] { return spec.source; }, [&spec](const std::string& v) { spec.source = v; }});
  set.add(count_field("series.length", spec.length));
  set.add(count_field("series.seed", spec.seed));
  set.add(real_field("series.base_level", spec.base_level));
  set.add(real_field("series.daily_amplitude", spec.daily_amplitude));
  set.add(real_field("series.weekly_amplitude", spec.weekly_amplitude));
  set.add(count_field("series.daily_period", spec.daily_period));
  set.add(count_field("series.weekly_period", spec.weekly_period));
  add_noise(set, "series.noise", spec.noise);
  set.add(count_field("series.drift_step", spec.drift_step));
  set.add(real_field("series.drift_mean_shift", spec.drift_mean_shift));
  add_noise(set, "series.drift_noise", spec.drift_noise);
  return set;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace opi
