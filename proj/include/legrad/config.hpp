#pragma once

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "legrad/common.hpp"
#include "legrad/csv.hpp"
#include "legrad/estimators.hpp"
#include "legrad/optimizer.hpp"

namespace legrad {

enum class ExperimentKind { GaussFit, LogReg, Sbn, VarianceStudy };

inline const char* experiment_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::GaussFit: return "gauss-fit";
    case ExperimentKind::LogReg: return "logreg";
    case ExperimentKind::Sbn: return "sbn";
    case ExperimentKind::VarianceStudy: return "variance-study";
  }
  return "?";
}

/// Full experiment description. Parsed from whitespace-separated key=value
/// text ('#' starts a comment); unknown keys are rejected, missing keys get
/// per-experiment defaults.
struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::GaussFit;
  EstimatorKind estimator = EstimatorKind::LeGrad;
  std::vector<EstimatorKind> study_estimators;        // variance-study
  ExperimentKind study_target = ExperimentKind::GaussFit;

  int n = 100;        // gauss-fit dimension / logreg feature count (bias extra)
  int m = 500;        // logreg examples
  int hidden = 20;    // sbn hidden units
  int visible = 16;   // sbn synthetic pattern width
  int count = 0;      // data count; 0 = per-source default
  int quadrature_points = 5;  // K
  int sample_count = 0;       // S; 0 = budget-matched default
  double eta = 0.0;           // 0 = per-experiment default
  StepSchedule schedule = StepSchedule::Constant;
  double tau = 250.0;
  int iterations = 0;  // T; 0 = per-experiment default
  std::uint64_t seed = 1;
  int window = 10;
  std::vector<int> track = {0};
  int trace_every = 0;  // 0 = per-experiment default
  double prior_variance = 1.0;
  std::string data = "synthetic";  // synthetic | idx
  std::string images;
  std::string labels;
  std::vector<int> classes = {2, 7};
  std::string out;
  int workers = 1;
  int calls = 2000;     // variance-study
  int snapshots = 20;   // variance-study
  bool timing = false;

  bool operator==(const ExperimentConfig&) const = default;
};

namespace config_detail {

inline std::string strip_comments(const std::string& text) {
  std::string out;
  bool in_comment = false;
  for (char c : text) {
    if (c == '#') in_comment = true;
    if (c == '\n') in_comment = false;
    out.push_back(in_comment ? ' ' : c);
  }
  return out;
}

inline long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs an integer, got '" + value + "'");
  }
}

inline double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' needs a number, got '" + value + "'");
  }
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<int>(parse_int(key, item)));
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' needs at least one value");
  return out;
}

inline EstimatorKind parse_estimator(const std::string& key, const std::string& value) {
  if (value == "legrad") return EstimatorKind::LeGrad;
  if (value == "ldgrad") return EstimatorKind::LdGrad;
  if (value == "regrad") return EstimatorKind::ReGrad;
  throw ConfigError("config: key '" + key + "' must be legrad|ldgrad|regrad, got '" + value + "'");
}

inline ExperimentKind parse_experiment(const std::string& key, const std::string& value) {
  if (value == "gauss-fit") return ExperimentKind::GaussFit;
  if (value == "logreg") return ExperimentKind::LogReg;
  if (value == "sbn") return ExperimentKind::Sbn;
  if (value == "variance-study") return ExperimentKind::VarianceStudy;
  throw ConfigError("config: key '" + key +
                    "' must be gauss-fit|logreg|sbn|variance-study, got '" + value + "'");
}

inline std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

}  // namespace config_detail

/// Number of latent coordinates the variational model has for a run
/// experiment (logreg adds the bias weight).
inline int latent_dimension(const ExperimentConfig& cfg) {
  const ExperimentKind kind = cfg.experiment == ExperimentKind::VarianceStudy
                                  ? cfg.study_target
                                  : cfg.experiment;
  switch (kind) {
    case ExperimentKind::GaussFit: return cfg.n;
    case ExperimentKind::LogReg: return cfg.n + 1;
    case ExperimentKind::Sbn: return cfg.hidden;
    default: return cfg.n;
  }
}

/// Budget-matched sample count: n K evaluations, like one local expectation
/// pass (regrad defaults to a single sample).
inline int default_sample_count(const ExperimentConfig& cfg, EstimatorKind estimator) {
  if (estimator == EstimatorKind::ReGrad) return 1;
  return latent_dimension(cfg) * cfg.quadrature_points;
}

inline ExperimentConfig parse_config(const std::string& text,
                                     std::vector<std::string>* warnings = nullptr) {
  std::unordered_map<std::string, std::string> kv;
  {
    std::stringstream ss(config_detail::strip_comments(text));
    std::string token;
    while (ss >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ConfigError("config: expected key=value, got '" + token + "'");
      }
      kv[token.substr(0, eq)] = token.substr(eq + 1);
    }
  }

  static const std::vector<std::string> known = {
      "experiment", "estimator", "estimators", "target", "n", "m", "hidden", "visible",
      "count", "K", "S", "eta", "schedule", "tau", "T", "seed", "window", "track",
      "trace_every", "prior_variance", "data", "images", "labels", "classes", "out",
      "workers", "calls", "snapshots", "timing"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) throw ConfigError("config: unknown key '" + key + "'");
  }

  const auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  ExperimentConfig cfg;
  const auto experiment = get("experiment");
  if (!experiment) throw ConfigError("config: missing required key 'experiment'");
  cfg.experiment = config_detail::parse_experiment("experiment", *experiment);

  if (const auto v = get("estimator")) cfg.estimator = config_detail::parse_estimator("estimator", *v);
  if (const auto v = get("target")) cfg.study_target = config_detail::parse_experiment("target", *v);
  if (const auto v = get("estimators")) {
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      cfg.study_estimators.push_back(config_detail::parse_estimator("estimators", item));
    }
  } else {
    cfg.study_estimators = {EstimatorKind::LeGrad, EstimatorKind::ReGrad, EstimatorKind::LdGrad};
  }

  // Per-experiment defaults for the shared numeric knobs.
  switch (cfg.experiment) {
    case ExperimentKind::GaussFit:
      cfg.n = 100;
      cfg.eta = 0.08;
      cfg.schedule = StepSchedule::RobbinsMonro;
      cfg.tau = 250.0;
      cfg.iterations = 800000;
      cfg.trace_every = 100;
      break;
    case ExperimentKind::LogReg:
      cfg.n = 20;
      cfg.eta = 1e-4;
      cfg.iterations = 1500;
      cfg.trace_every = 1;
      break;
    case ExperimentKind::Sbn:
      cfg.eta = 0.05;
      cfg.iterations = 600;
      cfg.trace_every = 1;
      break;
    case ExperimentKind::VarianceStudy:
      cfg.n = cfg.study_target == ExperimentKind::LogReg ? 20 : 100;
      cfg.eta = 0.02;
      cfg.iterations = 2000;
      cfg.trace_every = 1;
      break;
  }

  if (const auto v = get("n")) cfg.n = static_cast<int>(config_detail::parse_int("n", *v));
  if (const auto v = get("m")) cfg.m = static_cast<int>(config_detail::parse_int("m", *v));
  if (const auto v = get("hidden")) cfg.hidden = static_cast<int>(config_detail::parse_int("hidden", *v));
  if (const auto v = get("visible")) cfg.visible = static_cast<int>(config_detail::parse_int("visible", *v));
  if (const auto v = get("count")) cfg.count = static_cast<int>(config_detail::parse_int("count", *v));
  if (const auto v = get("K")) cfg.quadrature_points = static_cast<int>(config_detail::parse_int("K", *v));
  if (const auto v = get("eta")) cfg.eta = config_detail::parse_real("eta", *v);
  if (const auto v = get("tau")) cfg.tau = config_detail::parse_real("tau", *v);
  if (const auto v = get("T")) cfg.iterations = static_cast<int>(config_detail::parse_int("T", *v));
  if (const auto v = get("seed")) cfg.seed = static_cast<std::uint64_t>(config_detail::parse_int("seed", *v));
  if (const auto v = get("window")) cfg.window = static_cast<int>(config_detail::parse_int("window", *v));
  if (const auto v = get("track")) cfg.track = config_detail::parse_int_list("track", *v);
  if (const auto v = get("trace_every")) cfg.trace_every = static_cast<int>(config_detail::parse_int("trace_every", *v));
  if (const auto v = get("prior_variance")) cfg.prior_variance = config_detail::parse_real("prior_variance", *v);
  if (const auto v = get("data")) cfg.data = *v;
  if (const auto v = get("images")) cfg.images = *v;
  if (const auto v = get("labels")) cfg.labels = *v;
  if (const auto v = get("classes")) cfg.classes = config_detail::parse_int_list("classes", *v);
  if (const auto v = get("out")) cfg.out = *v;
  if (const auto v = get("workers")) cfg.workers = static_cast<int>(config_detail::parse_int("workers", *v));
  if (const auto v = get("calls")) cfg.calls = static_cast<int>(config_detail::parse_int("calls", *v));
  if (const auto v = get("snapshots")) cfg.snapshots = static_cast<int>(config_detail::parse_int("snapshots", *v));
  if (const auto v = get("timing")) cfg.timing = config_detail::parse_int("timing", *v) != 0;
  if (const auto v = get("schedule")) {
    if (*v == "constant") {
      cfg.schedule = StepSchedule::Constant;
    } else if (*v == "robbins-monro") {
      cfg.schedule = StepSchedule::RobbinsMonro;
    } else {
      throw ConfigError("config: key 'schedule' must be constant|robbins-monro, got '" + *v + "'");
    }
  }

  if (const auto v = get("S")) {
    const bool run_uses_s = cfg.experiment == ExperimentKind::VarianceStudy ||
                            cfg.estimator != EstimatorKind::LeGrad;
    if (run_uses_s) {
      cfg.sample_count = static_cast<int>(config_detail::parse_int("S", *v));
    } else if (warnings != nullptr) {
      warnings->push_back("config: key 'S' is ignored for estimator=legrad");
    }
  }
  if (cfg.sample_count == 0) cfg.sample_count = default_sample_count(cfg, cfg.estimator);

  if (cfg.out.empty()) {
    const char* env = std::getenv("LEGRAD_OUT_DIR");
    cfg.out = env != nullptr ? env : "out";
  }

  // Validation.
  const auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError("config: " + message);
  };
  require(cfg.n >= 1, "key 'n' must be >= 1");
  require(cfg.m >= 1, "key 'm' must be >= 1");
  require(cfg.hidden >= 1, "key 'hidden' must be >= 1");
  require(cfg.visible >= 1, "key 'visible' must be >= 1");
  require(cfg.count >= 0, "key 'count' must be >= 0");
  require(cfg.quadrature_points >= 1 && cfg.quadrature_points <= 64,
          "key 'K' must be in [1, 64]");
  require(cfg.sample_count >= 1, "key 'S' must be >= 1");
  require(cfg.eta >= 0.0, "key 'eta' must be >= 0");
  require(cfg.tau > 0.0, "key 'tau' must be > 0");
  require(cfg.iterations >= 1, "key 'T' must be >= 1");
  require(cfg.window >= 2, "key 'window' must be >= 2");
  require(cfg.trace_every >= 1, "key 'trace_every' must be >= 1");
  require(cfg.prior_variance > 0.0, "key 'prior_variance' must be > 0");
  require(cfg.workers >= 1, "key 'workers' must be >= 1");
  require(cfg.calls >= 2, "key 'calls' must be >= 2");
  require(cfg.snapshots >= 1, "key 'snapshots' must be >= 1");
  require(cfg.data == "synthetic" || cfg.data == "idx",
          "key 'data' must be synthetic|idx");
  if (cfg.data == "idx") {
    require(!cfg.images.empty(), "data=idx requires key 'images'");
    require(!cfg.labels.empty(), "data=idx requires key 'labels'");
  }
  for (int p : cfg.track) require(p >= 0, "key 'track' indices must be >= 0");
  if (cfg.experiment == ExperimentKind::Sbn) {
    require(cfg.estimator == EstimatorKind::LeGrad,
            "the sbn experiment supports only estimator=legrad (its variational "
            "distribution is discrete)");
  }
  if (cfg.experiment == ExperimentKind::VarianceStudy) {
    require(cfg.study_target == ExperimentKind::GaussFit ||
                cfg.study_target == ExperimentKind::LogReg,
            "key 'target' must be gauss-fit|logreg");
  }
  return cfg;
}

/// Canonical key=value form, one key per line; parse(emit(c)) == c.
inline std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "experiment=" << experiment_name(cfg.experiment) << '\n';
  out << "estimator=" << estimator_name(cfg.estimator) << '\n';
  {
    out << "estimators=";
    for (std::size_t i = 0; i < cfg.study_estimators.size(); ++i) {
      if (i > 0) out << ',';
      out << estimator_name(cfg.study_estimators[i]);
    }
    out << '\n';
  }
  out << "target=" << experiment_name(cfg.study_target) << '\n';
  out << "n=" << cfg.n << '\n';
  out << "m=" << cfg.m << '\n';
  out << "hidden=" << cfg.hidden << '\n';
  out << "visible=" << cfg.visible << '\n';
  out << "count=" << cfg.count << '\n';
  out << "K=" << cfg.quadrature_points << '\n';
  const bool run_uses_s = cfg.experiment == ExperimentKind::VarianceStudy ||
                          cfg.estimator != EstimatorKind::LeGrad;
  if (run_uses_s) out << "S=" << cfg.sample_count << '\n';
  out << "eta=" << format_double(cfg.eta) << '\n';
  out << "schedule=" << (cfg.schedule == StepSchedule::Constant ? "constant" : "robbins-monro")
      << '\n';
  out << "tau=" << format_double(cfg.tau) << '\n';
  out << "T=" << cfg.iterations << '\n';
  out << "seed=" << cfg.seed << '\n';
  out << "window=" << cfg.window << '\n';
  out << "track=" << config_detail::join_ints(cfg.track) << '\n';
  out << "trace_every=" << cfg.trace_every << '\n';
  out << "prior_variance=" << format_double(cfg.prior_variance) << '\n';
  out << "data=" << cfg.data << '\n';
  if (!cfg.images.empty()) out << "images=" << cfg.images << '\n';
  if (!cfg.labels.empty()) out << "labels=" << cfg.labels << '\n';
  out << "classes=" << config_detail::join_ints(cfg.classes) << '\n';
  out << "out=" << cfg.out << '\n';
  out << "workers=" << cfg.workers << '\n';
  out << "calls=" << cfg.calls << '\n';
  out << "snapshots=" << cfg.snapshots << '\n';
  out << "timing=" << (cfg.timing ? 1 : 0) << '\n';
  return out.str();
}

/// FNV-1a 64 of the canonical config text, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = emit_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace legrad
