#include "cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dmia/dataset_io.h"
#include "dmia/dmia.h"
#include "dmia/errors.h"
#include "dmia/experiment.h"
#include "dmia/parallel.h"
#include "dmia/serialize.h"
#include "dmia/world.h"

namespace dmia::cli {

namespace fs = std::filesystem;

namespace {

// Flags shared by every subcommand.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string format = "csv";
  int threads = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON configuration file");
  app->add_option("--seed", c.seed, "Root RNG seed");
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--format", c.format, "Dataset format")
      ->check(CLI::IsMember({"csv", "f32bin"}))
      ->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads (default: DMIA_THREADS or 1)")
      ->check(CLI::NonNegativeNumber);
}

DatasetFormat format_of(const Common& c) { return *parse_format(c.format); }

Json load_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(DataErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

Json config_or_empty(const Common& c) {
  return c.config.empty() ? Json::object() : load_json(c.config);
}

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

// Draws rows with replacement from a stored sample of the student's outputs.
Sampler pool_sampler(Matrix pool) {
  require(pool.rows() > 0, "student pool is empty");
  return [pool = std::move(pool)](Index n, RngStream& rng) {
    return take_rows(pool, sample_indices(pool.rows(), n, rng, true));
  };
}

Matrix load(const std::string& path, const Common& c) { return load_dataset(path, format_of(c)); }

int run_simulate(const Common& c) {
  WorldSpec spec = c.config.empty() ? reference_world_spec() : world_spec_from_json(load_json(c.config));
  if (c.seed) spec.seed = *c.seed;
  const WorldInstance w = build_world(spec);
  const fs::path out(c.out);
  const DatasetFormat f = format_of(c);
  const std::string ext(format_extension(f));
  save_dataset(out / ("member" + ext), w.d_mem, f);
  save_dataset(out / ("nonmember" + ext), w.d_non, f);
  save_dataset(out / ("nonmember_holdout" + ext), w.d_non_holdout, f);
  save_dataset(out / ("teacher_gen" + ext), w.teacher_gen.samples(), f);
  save_dataset(out / ("student_gen" + ext), w.d_student_gen, f);
  write_json(out / "world.json",
             {{"schema", "dmia.world"},
              {"version", kReportSchemaVersion},
              {"spec", to_json(spec)},
              {"encoder", encoder_to_json(w.encoder)}});
  return kExitOk;
}

struct TrainArgs {
  std::string nonmember;
  std::string student;
  std::string encoder;
};

Encoder encoder_for(const std::string& path, Index dim) {
  if (path.empty()) return Encoder::identity(dim);
  const Json j = load_json(path);
  return encoder_from_json(j.contains("encoder") ? j.at("encoder") : j);
}

int run_train(const Common& c, const TrainArgs& a) {
  const TrainConfig cfg = train_config_from_json(config_or_empty(c));
  const Matrix d_non = load(a.nonmember, c);
  const Encoder enc = encoder_for(a.encoder, d_non.cols());
  const TrainResult r = train_deep_kernel(d_non, pool_sampler(load(a.student, c)), enc, cfg,
                                          RngStream(c.seed.value_or(0), 1));
  write_json(fs::path(c.out) / "kernel.json", kernel_to_json({r.kernel, r.anchor, enc}));
  std::string hist = "epoch,loss\n";
  for (std::size_t i = 0; i < r.loss_history.size(); ++i) {
    hist += std::to_string(i) + "," + Json(r.loss_history[i]).dump() + "\n";
  }
  write_file(fs::path(c.out) / "loss_history.csv", hist);
  return kExitOk;
}

struct DetectArgs {
  std::vector<std::string> kernels;
  std::string candidate;
  std::string nonmember;
};

Detector detector_from_bundle(const std::string& path, const Matrix& d_non, const DetectConfig& cfg,
                              RngStream rng, int id) {
  KernelBundle b = kernel_from_json(load_json(path));
  if (!b.anchor) throw DataError(DataErrorCode::kSchema, path + ": kernel has no anchor batch");
  const Encoder enc = b.encoder ? *b.encoder : Encoder::identity(d_non.cols());
  return Detector(std::move(b.kernel), std::move(*b.anchor), enc, d_non, cfg, rng, id);
}

int run_detect(const Common& c, const DetectArgs& a) {
  DetectConfig cfg = detect_config_from_json(config_or_empty(c));
  cfg.threads = resolve_thread_count(c.threads);
  const Matrix d_can = load(a.candidate, c);
  const Matrix d_non = load(a.nonmember, c);
  const RngStream root(c.seed.value_or(0), 2);
  const Detector det = detector_from_bundle(a.kernels.at(0), d_non, cfg, root.child(0), 0);
  write_json(fs::path(c.out) / "detection.json", to_json(det.detect(d_can, root.child(1))));
  return kExitOk;
}

struct EnsembleArgs {
  DetectArgs detect;
  std::string student;
  int h = 5;
  double tau = 0.7;
};

int run_ensemble(const Common& c, const EnsembleArgs& a) {
  const Json j = config_or_empty(c);
  for (const auto& [key, _] : j.items()) {
    if (key != "train" && key != "detect" && key != "h" && key != "tau") {
      throw DataError(DataErrorCode::kSchema, "ensemble config: unknown key '" + key + "'");
    }
  }
  const TrainConfig train_cfg = train_config_from_json(j.value("train", Json::object()));
  DetectConfig detect_cfg = detect_config_from_json(j.value("detect", Json::object()));
  const int h = j.value("h", a.h);
  const double tau = j.value("tau", a.tau);
  const int threads = resolve_thread_count(c.threads);
  detect_cfg.threads = 1;

  const Matrix d_can = load(a.detect.candidate, c);
  const Matrix d_non = load(a.detect.nonmember, c);
  const RngStream root(c.seed.value_or(0), 3);
  const fs::path out(c.out);

  std::vector<std::optional<Detector>> slots;
  if (!a.detect.kernels.empty()) {
    // Saved kernels: the whole non-member file is the reference pool.
    slots.resize(a.detect.kernels.size());
    parallel_for(slots.size(), threads, [&](std::size_t i) {
      slots[i].emplace(detector_from_bundle(a.detect.kernels[i], d_non, detect_cfg,
                                            root.child(2, i), static_cast<int>(i)));
    });
  } else {
    require(!a.student.empty(), "ensemble: need --kernel files or --student samples");
    require(d_non.rows() >= 8, "ensemble: non-member pool too small to split");
    const Index half = d_non.rows() / 2;
    const Matrix train_pool = d_non.topRows(half);
    const Matrix detect_pool = d_non.bottomRows(d_non.rows() - half);
    const Encoder enc = Encoder::identity(d_non.cols());
    const auto trained = train_ensemble(train_pool, pool_sampler(load(a.student, c)), enc, h,
                                        train_cfg, root.child(1), threads);
    slots.resize(trained.size());
    parallel_for(trained.size(), threads, [&](std::size_t i) {
      slots[i].emplace(trained[i].kernel, trained[i].anchor, enc, detect_pool, detect_cfg,
                       root.child(2, i), static_cast<int>(i));
    });
    for (std::size_t i = 0; i < trained.size(); ++i) {
      write_json(out / ("kernel_" + std::to_string(i) + ".json"),
                 kernel_to_json({trained[i].kernel, trained[i].anchor, enc}));
    }
  }
  std::vector<DetectionReport> reports(slots.size());
  parallel_for(slots.size(), threads, [&](std::size_t i) {
    reports[i] = slots[i]->detect(d_can, root.child(3, i));
  });
  write_json(out / "ensemble.json", to_json(aggregate_ensemble(std::move(reports), tau)));
  return kExitOk;
}

int exit_for_kind(const std::string& kind) {
  if (kind.empty()) return kExitOk;
  return kind == "numerical" ? kExitNumerical : kExitData;
}

int run_experiment_cmd(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? default_experiment_config()
                                          : experiment_config_from_json(load_json(c.config));
  if (c.seed) cfg.seed = *c.seed;
  cfg.threads = resolve_thread_count(c.threads);
  const RunReport r = run_experiment(cfg);
  const fs::path out(c.out);
  write_json(out / "report.json", to_json(r));
  if (!r.partial) {
    write_file(out / "metrics.csv", metrics_csv(r));
    write_json(out / "histograms.json", histograms_json(r));
  }
  write_json(out / "timing.json",
             {{"wall_clock_seconds", r.wall_clock_seconds}, {"threads", cfg.threads}});
  if (r.partial) std::cerr << "experiment aborted: " << r.error << "\n";
  return exit_for_kind(r.error_kind);
}

int run_report(const Common& c, const std::vector<std::string>& inputs, int bins) {
  std::string csv = "report,ratio,asr,auc,tpr_at_fpr_0.05,decision_accuracy,mean_p_bar\n";
  Json hists = Json::array();
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    RunReport r = run_report_from_json(load_json(inputs[i]));
    if (r.partial) {
      throw DataError(DataErrorCode::kSchema, inputs[i] + ": partial report has no metrics");
    }
    // Metrics are recomputed from the per-round records, not copied.
    r.metrics.clear();
    for (std::size_t k = 0; k < r.config.ratios.size(); ++k) r.metrics.push_back(ratio_metrics(r, k));
    const std::string rows = metrics_csv(r);
    std::size_t pos = rows.find('\n') + 1;
    while (pos < rows.size()) {
      const std::size_t end = rows.find('\n', pos);
      csv += std::to_string(i) + "," + rows.substr(pos, end - pos + 1);
      pos = end + 1;
    }
    hists.push_back({{"report", i}, {"source", inputs[i]}, {"histograms", histograms_json(r, bins)}});
  }
  const fs::path out(c.out);
  write_file(out / "metrics.csv", csv);
  write_json(out / "histograms.json", hists);
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  CLI::App app{"Distribution-level membership inference for distilled generative models", "dmia"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common common;
  CLI::App* simulate = app.add_subcommand("simulate", "Build a synthetic world and export its datasets");
  add_common(simulate, common);

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train-kernel", "Train one deep kernel and save it");
  add_common(train, common);
  train->add_option("--nonmember", train_args.nonmember, "Auxiliary non-member dataset")->required();
  train->add_option("--student", train_args.student, "Samples generated by the student")->required();
  train->add_option("--encoder", train_args.encoder, "Encoder JSON (world.json works)");

  DetectArgs detect_args;
  CLI::App* detect = app.add_subcommand("detect", "Score a candidate dataset with a saved kernel");
  add_common(detect, common);
  detect->add_option("--kernel", detect_args.kernels, "Kernel JSON")->required()->expected(1);
  detect->add_option("--candidate", detect_args.candidate, "Candidate dataset")->required();
  detect->add_option("--nonmember", detect_args.nonmember, "Reference non-member dataset")->required();

  EnsembleArgs ens_args;
  CLI::App* ensemble = app.add_subcommand("ensemble", "Ensemble detection over several kernels");
  add_common(ensemble, common);
  ensemble->add_option("--kernel", ens_args.detect.kernels, "Saved kernel JSON (repeatable)");
  ensemble->add_option("--candidate", ens_args.detect.candidate, "Candidate dataset")->required();
  ensemble->add_option("--nonmember", ens_args.detect.nonmember, "Non-member dataset")->required();
  ensemble->add_option("--student", ens_args.student, "Student samples, used when no --kernel");
  ensemble->add_option("--kernels", ens_args.h, "Kernels to train")->capture_default_str();
  ensemble->add_option("--tau", ens_args.tau, "Decision threshold")->capture_default_str();

  CLI::App* experiment = app.add_subcommand("experiment", "Run the full detection protocol");
  add_common(experiment, common);

  std::vector<std::string> report_inputs;
  int bins = 20;
  CLI::App* report = app.add_subcommand("report", "Summarize saved run reports");
  add_common(report, common);
  report->add_option("--input", report_inputs, "report.json (repeatable)")->required();
  report->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    if (app.exit(e) == 0) return kExitOk;
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(common);
    if (*train) return run_train(common, train_args);
    if (*detect) return run_detect(common, detect_args);
    if (*ensemble) return run_ensemble(common, ens_args);
    if (*experiment) return run_experiment_cmd(common);
    if (*report) return run_report(common, report_inputs, bins);
  } catch (const DataError& e) {
    std::cerr << "data error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return kExitData;
  } catch (const ContractError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace dmia::cli
