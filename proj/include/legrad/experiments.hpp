#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "legrad/config.hpp"
#include "legrad/csv.hpp"
#include "legrad/diagnostics.hpp"
#include "legrad/estimators.hpp"
#include "legrad/idx.hpp"
#include "legrad/optimizer.hpp"
#include "legrad/sbn.hpp"
#include "legrad/targets/correlated_gaussian.hpp"
#include "legrad/targets/logistic_regression.hpp"
#include "legrad/targets/sigmoid_belief_net.hpp"
#include "legrad/variational.hpp"

namespace legrad {

/// Fully factorized Gaussian model with mu = 0, ell = 1.
inline VariationalModel gaussian_mean_field(int n) {
  std::vector<Factor> factors;
  factors.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) factors.emplace_back(GaussianLocationScale{0.0, 1.0});
  return factorized_model(std::move(factors));
}

/// Loads the logistic-regression target: synthetic two-class blobs, or IDX
/// images filtered to two digit classes with pixels scaled to [0, 1].
/// When IDX data is used, cfg.n is superseded by the pixel count.
inline LogisticRegressionTarget load_logreg_target(const ExperimentConfig& cfg) {
  if (cfg.data == "synthetic") {
    const int m = cfg.count > 0 ? cfg.count : cfg.m;
    return make_synthetic_logreg(cfg.n, m, cfg.prior_variance,
                                 RandomStream(cfg.seed).fork(0x0da7a).seed());
  }
  const IdxImages images = read_idx_images(cfg.images);
  const std::vector<std::uint8_t> labels = read_idx_labels(cfg.labels);
  if (labels.size() != images.count()) {
    throw ConfigError("logreg: image and label counts differ");
  }
  if (cfg.classes.size() != 2) {
    throw ConfigError("logreg: key 'classes' must list exactly two classes");
  }
  const int pixels = static_cast<int>(images.rows * images.cols);
  std::vector<int> keep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cfg.classes[0] || labels[i] == cfg.classes[1]) {
      keep.push_back(static_cast<int>(i));
    }
  }
  if (cfg.count > 0 && static_cast<int>(keep.size()) > cfg.count) keep.resize(cfg.count);
  if (keep.empty()) throw ConfigError("logreg: no examples match the requested classes");
  Eigen::MatrixXd x(static_cast<int>(keep.size()), pixels);
  Eigen::VectorXd y(static_cast<int>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const int i = keep[r];
    for (int j = 0; j < pixels; ++j) {
      x(static_cast<int>(r), j) =
          images.pixels[static_cast<std::size_t>(i) * pixels + j] / 255.0;
    }
    y[static_cast<int>(r)] = labels[static_cast<std::size_t>(i)] == cfg.classes[0] ? 1.0 : -1.0;
  }
  return LogisticRegressionTarget::with_bias(x, std::move(y), cfg.prior_variance);
}

/// Loads the belief-net observations: noisy synthetic prototypes, or IDX
/// images binarized at threshold 0.5.
inline Eigen::MatrixXd load_sbn_data(const ExperimentConfig& cfg) {
  if (cfg.data == "synthetic") {
    const int count = cfg.count > 0 ? cfg.count : 200;
    return synthetic_binary_patterns(count, cfg.visible, 4, 0.05,
                                     RandomStream(cfg.seed).fork(0x0da7a).seed());
  }
  const IdxImages images = read_idx_images(cfg.images);
  Eigen::MatrixXd all = binarize_images(images);
  const int count = cfg.count > 0 ? cfg.count : 1000;
  if (all.rows() > count) return all.topRows(count);
  return all;
}

namespace experiment_detail {

inline void write_trace_csv(const std::string& path, const std::vector<TraceRecord>& trace,
                            const std::vector<int>& tracked) {
  CsvWriter csv(path);
  std::vector<std::string> names = {"iteration", "elapsed_seconds", "bound", "f_evaluations"};
  for (int p : tracked) names.push_back("grad_p" + std::to_string(p));
  for (int p : tracked) names.push_back("var_p" + std::to_string(p));
  csv.header(names);
  for (const TraceRecord& row : trace) {
    csv.field(row.iteration).field(row.elapsed_seconds).field(row.bound).field(row.f_evaluations);
    for (double g : row.tracked_gradients) csv.field(g);
    for (const auto& v : row.tracked_variances) csv.field(v);
    csv.end_row();
  }
}

inline void write_run_variance_csv(const std::string& path,
                                   const std::vector<TraceRecord>& trace,
                                   const std::vector<int>& tracked) {
  CsvWriter csv(path);
  const std::vector<std::string> names = {"iteration", "coordinate", "variance"};
  csv.header(names);
  for (const TraceRecord& row : trace) {
    for (std::size_t j = 0; j < tracked.size(); ++j) {
      csv.field(row.iteration).field(tracked[j]).field(row.tracked_variances[j]);
      csv.end_row();
    }
  }
}

inline void write_params_txt(const std::string& path, const Eigen::VectorXd& params) {
  std::ofstream out(path);
  for (int j = 0; j < params.size(); ++j) out << format_double(params[j]) << '\n';
}

inline void write_matrix_txt(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

inline void write_manifest(const std::string& path, const ExperimentConfig& cfg,
                           long total_f_evaluations, int trace_rows) {
  std::ofstream out(path);
  out << "config_hash=" << config_hash(cfg) << '\n';
  out << "seed=" << cfg.seed << '\n';
  out << "f_evaluations=" << total_f_evaluations << '\n';
  out << "trace_rows=" << trace_rows << '\n';
  out << "# canonical config\n";
  out << emit_config(cfg);
}

inline OptimizerConfig optimizer_config(const ExperimentConfig& cfg) {
  OptimizerConfig opt;
  opt.step_size = cfg.eta;
  opt.schedule = cfg.schedule;
  opt.tau = cfg.tau;
  opt.iterations = cfg.iterations;
  opt.seed = cfg.seed;
  opt.trace_every = cfg.trace_every;
  opt.tracked_params = cfg.track;
  opt.variance_window = cfg.window;
  opt.record_timing = cfg.timing;
  return opt;
}

inline Estimator make_estimator(const ExperimentConfig& cfg, EstimatorKind kind) {
  EstimatorConfig ec;
  ec.kind = kind;
  ec.quadrature_points = cfg.quadrature_points;
  ec.sample_count = kind == EstimatorKind::ReGrad &&
                            cfg.experiment == ExperimentKind::VarianceStudy
                        ? 1
                        : cfg.sample_count;
  ec.workers = cfg.workers;
  return Estimator(ec);
}

}  // namespace experiment_detail

/// Runs one configured experiment, writing trace.csv, variance.csv,
/// final_params.txt and manifest.txt (plus the belief net's W/V matrices and
/// reconstructions) into cfg.out. Returns a process exit status.
inline int run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  using namespace experiment_detail;
  fs::create_directories(cfg.out);
  const std::string dir = cfg.out + "/";

  try {
    switch (cfg.experiment) {
      case ExperimentKind::GaussFit: {
        VariationalModel model = gaussian_mean_field(cfg.n);
        const CorrelatedGaussianTarget target(cfg.n);
        const Estimator estimator = make_estimator(cfg, cfg.estimator);
        const RunResult result = run(model, target, estimator, optimizer_config(cfg));
        write_trace_csv(dir + "trace.csv", result.trace, cfg.track);
        write_run_variance_csv(dir + "variance.csv", result.trace, cfg.track);
        write_params_txt(dir + "final_params.txt", result.final_parameters);
        write_manifest(dir + "manifest.txt", cfg, result.total_f_evaluations,
                       static_cast<int>(result.trace.size()));
        break;
      }
      case ExperimentKind::LogReg: {
        const LogisticRegressionTarget target = load_logreg_target(cfg);
        VariationalModel model = gaussian_mean_field(target.dimension());
        const Estimator estimator = make_estimator(cfg, cfg.estimator);
        const RunResult result = run(model, target, estimator, optimizer_config(cfg));
        write_trace_csv(dir + "trace.csv", result.trace, cfg.track);
        write_run_variance_csv(dir + "variance.csv", result.trace, cfg.track);
        write_params_txt(dir + "final_params.txt", result.final_parameters);
        write_manifest(dir + "manifest.txt", cfg, result.total_f_evaluations,
                       static_cast<int>(result.trace.size()));
        break;
      }
      case ExperimentKind::Sbn: {
        const Eigen::MatrixXd data = load_sbn_data(cfg);
        SbnTrainConfig train;
        train.hidden = cfg.hidden;
        train.iterations = cfg.iterations;
        train.step_size = cfg.eta;
        train.seed = cfg.seed;
        train.trace_every = cfg.trace_every;
        train.workers = cfg.workers;
        train.record_timing = cfg.timing;
        const SbnTrainResult result = train_sbn(data, train);

        {
          CsvWriter csv(dir + "trace.csv");
          const std::vector<std::string> names = {"iteration",     "elapsed_seconds",
                                                  "bound",         "f_evaluations",
                                                  "recon_error",   "grad_v00",
                                                  "var_v00"};
          csv.header(names);
          VarianceTracker tracker({0}, cfg.window);
          for (const SbnTraceRow& row : result.trace) {
            const auto var = tracker.push_and_variance(0, row.gradient_v00);
            csv.field(row.iteration)
                .field(row.elapsed_seconds)
                .field(row.bound)
                .field(row.f_evaluations)
                .field(row.recon_error)
                .field(row.gradient_v00)
                .field(var);
            csv.end_row();
          }
        }
        {
          CsvWriter csv(dir + "variance.csv");
          const std::vector<std::string> names = {"iteration", "coordinate", "variance"};
          csv.header(names);
          VarianceTracker tracker({0}, cfg.window);
          for (const SbnTraceRow& row : result.trace) {
            const auto var = tracker.push_and_variance(0, row.gradient_v00);
            csv.field(row.iteration).field(0).field(var);
            csv.end_row();
          }
        }
        write_matrix_txt(dir + "w.txt", result.w);
        write_matrix_txt(dir + "v.txt", result.v);
        {
          SigmoidBeliefNetTarget sbn(result.w, data);
          RecognitionNetwork recog{result.v};
          CsvWriter csv(dir + "reconstructions.csv");
          std::vector<std::string> names = {"datum"};
          for (int d = 0; d < static_cast<int>(data.cols()); ++d) {
            names.push_back("p" + std::to_string(d));
          }
          csv.header(names);
          for (int i = 0; i < static_cast<int>(data.rows()); ++i) {
            csv.field(i);
            const Eigen::VectorXd r = reconstruct(sbn, recog, i);
            for (int d = 0; d < r.size(); ++d) csv.field(r[d]);
            csv.end_row();
          }
        }
        Eigen::VectorXd flat(result.v.size());
        for (int k = 0, j = 0; k < result.v.rows(); ++k)
          for (int d = 0; d < result.v.cols(); ++d) flat[j++] = result.v(k, d);
        write_params_txt(dir + "final_params.txt", flat);
        write_manifest(dir + "manifest.txt", cfg, result.total_f_evaluations,
                       static_cast<int>(result.trace.size()));
        break;
      }
      case ExperimentKind::VarianceStudy: {
        // Train with the local expectation estimator, pausing at evenly
        // spaced snapshots for a fixed-parameter comparison of all
        // configured estimators.
        const bool logreg = cfg.study_target == ExperimentKind::LogReg;
        const CorrelatedGaussianTarget gauss_target(cfg.n);
        LogisticRegressionTarget logreg_target =
            logreg ? load_logreg_target(cfg)
                   : LogisticRegressionTarget(Eigen::MatrixXd::Ones(1, 1),
                                              Eigen::VectorXd::Ones(1), 1.0);
        const TargetModel& target =
            logreg ? static_cast<const TargetModel&>(logreg_target)
                   : static_cast<const TargetModel&>(gauss_target);
        VariationalModel model = gaussian_mean_field(target.dimension());

        std::vector<Estimator> estimators;
        for (EstimatorKind kind : cfg.study_estimators) {
          estimators.push_back(make_estimator(cfg, kind));
        }
        const Estimator train_estimator = make_estimator(cfg, EstimatorKind::LeGrad);

        CsvWriter csv(dir + "variance.csv");
        const std::vector<std::string> names = {"snapshot", "iteration", "estimator",
                                                "coordinate", "variance"};
        csv.header(names);

        std::vector<TraceRecord> trace;
        long total_evals = 0;
        const int chunk = std::max(1, cfg.iterations / cfg.snapshots);
        int done = 0;
        for (int snap = 0; snap < cfg.snapshots; ++snap) {
          const VarianceStudy study = fixed_point_variance_study(
              model, target, estimators, cfg.calls,
              RandomStream(cfg.seed).fork(0x57ddULL + static_cast<std::uint64_t>(snap)).seed(),
              cfg.workers);
          for (std::size_t e = 0; e < study.estimator_names.size(); ++e) {
            for (int p = 0; p < study.variances[e].size(); ++p) {
              csv.field(snap).field(done).field(study.estimator_names[e]).field(p);
              csv.field(study.variances[e][p]);
              csv.end_row();
            }
          }
          if (done < cfg.iterations) {
            OptimizerConfig opt = optimizer_config(cfg);
            opt.iterations = std::min(chunk, cfg.iterations - done);
            opt.seed = RandomStream(cfg.seed).fork(0xc41c + static_cast<std::uint64_t>(snap)).seed();
            const RunResult part = run(model, target, train_estimator, opt);
            total_evals += part.total_f_evaluations;
            for (TraceRecord row : part.trace) {
              row.iteration += done;
              trace.push_back(std::move(row));
            }
            done += opt.iterations;
          }
        }
        write_trace_csv(dir + "trace.csv", trace, cfg.track);
        write_params_txt(dir + "final_params.txt", model.parameters());
        write_manifest(dir + "manifest.txt", cfg, total_evals, static_cast<int>(trace.size()));
        break;
      }
    }
  } catch (const DivergenceError& e) {
    std::cerr << "experiment diverged: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace legrad
