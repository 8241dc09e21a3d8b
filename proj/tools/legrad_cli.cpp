// Command-line harness for the stochastic variational inference experiments:
// run experiments from key=value configs, compare estimator variances, and
// ingest IDX image data.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "legrad/config.hpp"
#include "legrad/experiments.hpp"
#include "legrad/idx.hpp"

namespace {

struct KeyFlags {
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> assignments;
};

// One CLI option per config key; set flags are appended after the config
// file text so they override it.
void add_key_options(CLI::App* cmd, KeyFlags& flags) {
  cmd->add_option("--config", flags.config_file, "config file with key=value lines");
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"experiment", "experiment: gauss-fit|logreg|sbn|variance-study"},
      {"estimator", "gradient estimator: legrad|ldgrad|regrad"},
      {"estimators", "variance-study estimator list (comma separated)"},
      {"target", "variance-study base experiment: gauss-fit|logreg"},
      {"n", "problem dimension / feature count"},
      {"m", "logistic-regression example count"},
      {"hidden", "belief-net hidden units"},
      {"visible", "belief-net synthetic pattern width"},
      {"count", "data count (0 = source default)"},
      {"K", "Gauss-Hermite grid points"},
      {"S", "sample count for ldgrad/regrad"},
      {"eta", "step size"},
      {"schedule", "step schedule: constant|robbins-monro"},
      {"tau", "robbins-monro decay constant"},
      {"T", "iterations"},
      {"seed", "random seed"},
      {"window", "running variance window"},
      {"track", "tracked parameter indices (comma separated)"},
      {"trace_every", "trace row period"},
      {"prior_variance", "logistic-regression prior variance"},
      {"data", "data source: synthetic|idx"},
      {"images", "IDX image file"},
      {"labels", "IDX label file"},
      {"classes", "two class labels for logreg (comma separated)"},
      {"out", "output directory (default $LEGRAD_OUT_DIR or ./out)"},
      {"workers", "worker threads for parallel probes"},
      {"calls", "variance-study calls per estimator"},
      {"snapshots", "variance-study parameter snapshots"},
      {"timing", "record wall-clock seconds in traces (breaks rerun byte-identity)"},
  };
  for (const auto& [key, help] : keys) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [&flags, key = key](const std::string& value) {
          flags.assignments.emplace_back(key, value);
        },
        help);
  }
}

std::string collect_config_text(const KeyFlags& flags, const char* forced_experiment) {
  std::ostringstream text;
  if (forced_experiment != nullptr) text << "experiment=" << forced_experiment << '\n';
  if (!flags.config_file.empty()) {
    std::ifstream in(flags.config_file);
    if (!in) throw legrad::ConfigError("config: cannot open " + flags.config_file);
    text << in.rdbuf() << '\n';
  }
  for (const auto& [key, value] : flags.assignments) text << key << '=' << value << '\n';
  return text.str();
}

legrad::ExperimentConfig parse_with_warnings(const std::string& text) {
  std::vector<std::string> warnings;
  legrad::ExperimentConfig cfg = legrad::parse_config(text, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return cfg;
}

int cmd_run(const KeyFlags& flags, const char* forced_experiment) {
  const legrad::ExperimentConfig cfg =
      parse_with_warnings(collect_config_text(flags, forced_experiment));
  const int status = legrad::run_experiment(cfg);
  if (status == 0) {
    std::cout << "wrote " << cfg.out << "/trace.csv, variance.csv, final_params.txt, manifest.txt\n";
  }
  return status;
}

int cmd_print_config(const KeyFlags& flags) {
  const legrad::ExperimentConfig cfg = parse_with_warnings(collect_config_text(flags, nullptr));
  std::cout << legrad::emit_config(cfg);
  return 0;
}

struct IngestArgs {
  std::string images;
  std::string labels;
  std::string classes;
  int count = 0;
  std::string out = "out";
};

int cmd_ingest_idx(const IngestArgs& args) {
  const legrad::IdxImages images = legrad::read_idx_images(args.images);
  const std::vector<std::uint8_t> labels = legrad::read_idx_labels(args.labels);
  if (labels.size() != images.count()) {
    std::cerr << "ingest-idx: image and label counts differ\n";
    return 1;
  }

  std::vector<int> wanted;
  if (!args.classes.empty()) {
    wanted = legrad::config_detail::parse_int_list("classes", args.classes);
  }
  const int pixel_count = static_cast<int>(images.rows * images.cols);
  legrad::IdxImages filtered;
  filtered.rows = images.rows;
  filtered.cols = images.cols;
  std::vector<std::uint8_t> kept_labels;
  std::vector<long> per_class(256, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool keep = wanted.empty();
    for (int c : wanted) keep = keep || labels[i] == c;
    if (!keep) continue;
    if (args.count > 0 && static_cast<int>(kept_labels.size()) >= args.count) break;
    kept_labels.push_back(labels[i]);
    ++per_class[labels[i]];
    const auto begin = images.pixels.begin() + static_cast<long>(i) * pixel_count;
    filtered.pixels.insert(filtered.pixels.end(), begin, begin + pixel_count);
  }

  std::filesystem::create_directories(args.out);
  legrad::write_idx_images(args.out + "/images.idx", filtered);
  legrad::write_idx_labels(args.out + "/labels.idx", kept_labels);

  std::cout << "read " << images.count() << " images (" << images.rows << "x" << images.cols
            << "), kept " << kept_labels.size() << ":\n";
  for (int c = 0; c < 256; ++c) {
    if (per_class[c] > 0) std::cout << "  class " << c << ": " << per_class[c] << '\n';
  }
  std::cout << "wrote " << args.out << "/images.idx, labels.idx\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"local expectation gradients experiment harness"};
  app.require_subcommand(1);

  KeyFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "run a configured experiment");
  add_key_options(run_cmd, run_flags);

  KeyFlags study_flags;
  CLI::App* study_cmd =
      app.add_subcommand("variance-study", "fixed-point estimator variance comparison");
  add_key_options(study_cmd, study_flags);

  KeyFlags print_flags;
  CLI::App* print_cmd = app.add_subcommand("print-config", "print the resolved canonical config");
  add_key_options(print_cmd, print_flags);

  IngestArgs ingest;
  CLI::App* ingest_cmd = app.add_subcommand("ingest-idx", "validate and filter IDX image data");
  ingest_cmd->add_option("--images", ingest.images, "IDX image file")->required();
  ingest_cmd->add_option("--labels", ingest.labels, "IDX label file")->required();
  ingest_cmd->add_option("--classes", ingest.classes, "keep these classes (comma separated)");
  ingest_cmd->add_option("--count", ingest.count, "keep at most this many images");
  ingest_cmd->add_option("--out", ingest.out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return cmd_run(run_flags, nullptr);
    if (study_cmd->parsed()) return cmd_run(study_flags, "variance-study");
    if (print_cmd->parsed()) return cmd_print_config(print_flags);
    if (ingest_cmd->parsed()) return cmd_ingest_idx(ingest);
  } catch (const legrad::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const legrad::IdxError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
