#include "dmia/experiment.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

#include "dmia/baseline.h"
#include "dmia/errors.h"
#include "dmia/parallel.h"

namespace dmia {

namespace {

// Stream keys under the experiment root.
enum StreamKey : std::uint64_t {
  kTrainStream = 1,
  kDetectorStream = 2,
  kCalibrationStream = 3,
  kRoundStream = 4,
  kBaselineStream = 5,
};

}  // namespace

void ExperimentConfig::validate() const {
  world.validate();
  train.validate();
  detect.validate();
  require(ensemble_size >= 1, "experiment: ensemble_size must be >= 1");
  require(tau > 0.0 && tau < 1.0, "experiment: tau must lie in (0, 1)");
  require(calibration_rounds >= 0, "experiment: calibration_rounds must be >= 0");
  require(!ratios.empty(), "experiment: empty ratio grid");
  for (double r : ratios) require(r >= 0.0 && r <= 1.0, "experiment: ratios must lie in [0, 1]");
  require(rounds >= 1, "experiment: rounds must be >= 1");
  require(candidate_size >= 2, "experiment: candidate_size must be >= 2");
  require(nonmember_train_size >= 4, "experiment: nonmember_train_size must be >= 4");
  require(nonmember_detect_size >= 2, "experiment: nonmember_detect_size must be >= 2");
  const Index cal = calibration_rounds > 0 ? calibration_pool_size : 0;
  require(nonmember_train_size + nonmember_detect_size + cal <= world.n_nonmember,
          "experiment: non-member splits exceed the world's auxiliary pool");
  require(calibration_rounds == 0 || calibration_pool_size >= candidate_size,
          "experiment: calibration pool smaller than a candidate set");
  require(candidate_size <= world.n_member && candidate_size <= world.n_nonmember_holdout,
          "experiment: candidate_size exceeds the world's pools");
  require(baseline_queries >= 1 && baseline_queries <= world.n_member &&
              baseline_queries <= world.n_nonmember_holdout,
          "experiment: baseline_queries exceeds the world's pools");
}

ExperimentConfig default_experiment_config(std::uint64_t seed) {
  ExperimentConfig c;
  c.world = reference_world_spec(seed);
  c.seed = seed;
  return c;
}

std::vector<ExperimentConfig> size_sweep_configs(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> out;
  for (Index size : {500, 200, 60, 30}) {
    ExperimentConfig c = base;
    c.candidate_size = size;
    c.nonmember_train_size = size;
    c.nonmember_detect_size = 2 * size;
    c.calibration_pool_size = 2 * size;
    c.ratios = {1.0};
    out.push_back(c);
  }
  return out;
}

namespace {

CandidateRecord score_candidate(const std::vector<Detector>& detectors, const Matrix& candidate,
                                double ratio, double tau, const RngStream& rng) {
  std::vector<DetectionReport> reports;
  reports.reserve(detectors.size());
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    reports.push_back(detectors[i].detect(candidate, rng.child(i)));
  }
  const EnsembleReport e = aggregate_ensemble(std::move(reports), tau);
  CandidateRecord rec;
  rec.ratio = ratio;
  rec.p_bar = e.p_bar;
  rec.decision = e.decision;
  for (const auto& m : e.members) rec.p_mem.push_back(m.p_mem);
  return rec;
}

}  // namespace

RatioMetrics ratio_metrics(const RunReport& report, std::size_t ratio_index) {
  RatioMetrics m;
  m.ratio = report.config.ratios.at(ratio_index);
  std::vector<ScoredSample> samples;
  std::size_t correct = 0;
  double sum = 0.0;
  for (const auto& r : report.rounds) {
    const auto& pos = r.positives.at(ratio_index);
    samples.push_back({pos.p_bar, true});
    samples.push_back({r.negative.p_bar, false});
    correct += (pos.p_bar >= report.tau_used) ? 1 : 0;
    correct += (r.negative.p_bar >= report.tau_used) ? 0 : 1;
    sum += pos.p_bar;
  }
  m.summary = summarize(samples);
  m.decision_accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  m.mean_p_bar = sum / static_cast<double>(report.rounds.size());
  return m;
}

RunReport run_experiment(const ExperimentConfig& cfg_in) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  ExperimentConfig cfg = cfg_in;
  cfg.world.seed = cfg.seed;
  report.config = cfg;
  report.tau_used = cfg.tau;
  try {
    cfg.validate();
    const int threads = resolve_thread_count(cfg.threads);
    const RngStream root(cfg.seed, 0x6578706572ULL);  // "exper"

    const WorldInstance world = build_world(cfg.world);
    const Matrix train_pool = world.d_non.topRows(cfg.nonmember_train_size);
    const Matrix detect_pool = world.d_non.middleRows(cfg.nonmember_train_size,
                                                      cfg.nonmember_detect_size);
    const Matrix cal_pool =
        cfg.calibration_rounds > 0
            ? Matrix(world.d_non.middleRows(cfg.nonmember_train_size + cfg.nonmember_detect_size,
                                            cfg.calibration_pool_size))
            : Matrix(0, world.d_non.cols());

    TrainConfig train_cfg = cfg.train;
    train_cfg.batch_size = std::min(train_cfg.batch_size, cfg.nonmember_train_size / 2);
    DetectConfig detect_cfg = cfg.detect;
    detect_cfg.batch_size =
        std::min({detect_cfg.batch_size, cfg.candidate_size, cfg.nonmember_detect_size});
    detect_cfg.threads = 1;
    report.train_batch = train_cfg.batch_size;
    report.detect_batch = detect_cfg.batch_size;

    const Sampler student = world.student_sampler();
    const auto trained = train_ensemble(train_pool, student, world.encoder, cfg.ensemble_size,
                                        train_cfg, root.child(kTrainStream), threads);
    for (std::size_t i = 0; i < trained.size(); ++i) {
      const auto& k = trained[i].kernel;
      report.kernels.push_back(KernelSummary{static_cast<int>(i), k.epsilon, k.gamma_phi,
                                             k.gamma_q, trained[i].initial_loss,
                                             trained[i].final_loss});
    }

    std::vector<std::optional<Detector>> slots(trained.size());
    parallel_for(trained.size(), threads, [&](std::size_t i) {
      slots[i].emplace(trained[i].kernel, trained[i].anchor, world.encoder, detect_pool,
                       detect_cfg, root.child(kDetectorStream, i), static_cast<int>(i));
    });
    std::vector<Detector> detectors;
    for (auto& s : slots) detectors.push_back(std::move(*s));

    // Calibration: known non-member sets vs fresh student-generated sets.
    if (cfg.calibration_rounds > 0) {
      const auto n_cal = static_cast<std::size_t>(cfg.calibration_rounds);
      report.calibration_positive.assign(n_cal, 0.0);
      report.calibration_negative.assign(n_cal, 0.0);
      const RngStream cal_root = root.child(kCalibrationStream);
      parallel_for(2 * n_cal, threads, [&](std::size_t item) {
        const std::size_t r = item / 2;
        const bool positive = item % 2 == 0;
        RngStream rng = cal_root.child(r, item % 2);
        const Matrix cand = positive ? student(cfg.candidate_size, rng)
                                     : subsample(cal_pool, cfg.candidate_size, rng, false);
        const auto rec = score_candidate(detectors, cand, positive ? 1.0 : 0.0, cfg.tau,
                                         rng.child(99));
        (positive ? report.calibration_positive : report.calibration_negative)[r] = rec.p_bar;
      });
      std::vector<ScoredSample> cal;
      for (double p : report.calibration_positive) cal.push_back({p, true});
      for (double p : report.calibration_negative) cal.push_back({p, false});
      const double thr = best_threshold(cal).threshold;
      if (thr > 0.0 && thr < 1.0) {
        report.tau_calibrated = thr;
        report.tau_used = thr;
      }
    }

    // Detection rounds: slot 0 is the negative set, slot 1 + i the ratio i set.
    const std::size_t slots_per_round = cfg.ratios.size() + 1;
    const auto n_rounds = static_cast<std::size_t>(cfg.rounds);
    std::vector<CandidateRecord> records(n_rounds * slots_per_round);
    const RngStream round_root = root.child(kRoundStream);
    parallel_for(records.size(), threads, [&](std::size_t item) {
      const std::size_t r = item / slots_per_round;
      const std::size_t slot = item % slots_per_round;
      const double ratio = slot == 0 ? 0.0 : cfg.ratios[slot - 1];
      RngStream rng = round_root.child(r, slot);
      const Matrix cand = make_candidate(world, ratio, cfg.candidate_size, rng);
      records[item] = score_candidate(detectors, cand, ratio, report.tau_used, rng.child(99));
    });
    for (std::size_t r = 0; r < n_rounds; ++r) {
      RoundRecord rr;
      rr.round = static_cast<int>(r);
      rr.negative = records[r * slots_per_round];
      for (std::size_t s = 1; s < slots_per_round; ++s) {
        rr.positives.push_back(records[r * slots_per_round + s]);
      }
      report.rounds.push_back(std::move(rr));
    }
    for (std::size_t i = 0; i < cfg.ratios.size(); ++i) {
      report.metrics.push_back(ratio_metrics(report, i));
    }

    // Instance-level baseline on teacher and student outputs.
    RngStream brng = root.child(kBaselineStream);
    const Matrix q_mem = subsample(world.d_mem, cfg.baseline_queries, brng, false);
    const Matrix q_non = subsample(world.d_non_holdout, cfg.baseline_queries, brng, false);
    report.baseline_teacher = instance_attack_metrics(
        instance_scores(q_mem, q_non, world.teacher_gen.samples(), "teacher"));
    report.baseline_student =
        instance_attack_metrics(instance_scores(q_mem, q_non, world.d_student_gen, "student"));
  } catch (const NumericalError& e) {
    report.partial = true;
    report.error_kind = "numerical";
    report.error = e.what();
  } catch (const DataError& e) {
    report.partial = true;
    report.error_kind = "data";
    report.error = e.what();
  } catch (const ContractError& e) {
    report.partial = true;
    report.error_kind = "contract";
    report.error = e.what();
  }
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

Json to_json(const ExperimentConfig& c) {
  return {{"world", to_json(c.world)},
          {"train", to_json(c.train)},
          {"detect", to_json(c.detect)},
          {"ensemble_size", c.ensemble_size},
          {"tau", c.tau},
          {"calibration_rounds", c.calibration_rounds},
          {"ratios", c.ratios},
          {"candidate_size", c.candidate_size},
          {"nonmember_train_size", c.nonmember_train_size},
          {"nonmember_detect_size", c.nonmember_detect_size},
          {"calibration_pool_size", c.calibration_pool_size},
          {"rounds", c.rounds},
          {"baseline_queries", c.baseline_queries},
          {"seed", c.seed}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  static const std::set<std::string> known = {
      "world", "train", "detect", "ensemble_size", "tau", "calibration_rounds", "ratios",
      "candidate_size", "nonmember_train_size", "nonmember_detect_size",
      "calibration_pool_size", "rounds", "baseline_queries", "seed", "threads"};
  if (!j.is_object()) throw DataError(DataErrorCode::kSchema, "experiment config must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw DataError(DataErrorCode::kSchema, "experiment: unknown key '" + key + "'");
  }
  ExperimentConfig c;
  try {
    if (j.contains("world")) c.world = world_spec_from_json(j.at("world"));
    if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
    if (j.contains("detect")) c.detect = detect_config_from_json(j.at("detect"));
    c.ensemble_size = j.value("ensemble_size", c.ensemble_size);
    c.tau = j.value("tau", c.tau);
    c.calibration_rounds = j.value("calibration_rounds", c.calibration_rounds);
    c.ratios = j.value("ratios", c.ratios);
    c.candidate_size = j.value("candidate_size", c.candidate_size);
    c.nonmember_train_size = j.value("nonmember_train_size", c.nonmember_train_size);
    c.nonmember_detect_size = j.value("nonmember_detect_size", c.nonmember_detect_size);
    c.calibration_pool_size = j.value("calibration_pool_size", c.calibration_pool_size);
    c.rounds = j.value("rounds", c.rounds);
    c.baseline_queries = j.value("baseline_queries", c.baseline_queries);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
  } catch (const Json::exception& e) {
    throw DataError(DataErrorCode::kSchema, std::string("experiment: ") + e.what());
  }
  return c;
}

namespace {

Json summary_json(const MetricSummary& m) {
  return {{"asr", m.asr}, {"auc", m.auc}, {"tpr_at_fpr_0.05", m.tpr_at_fpr05}};
}

MetricSummary summary_from_json(const Json& j) {
  return MetricSummary{j.at("asr").get<double>(), j.at("auc").get<double>(),
                       j.at("tpr_at_fpr_0.05").get<double>()};
}

Json candidate_json(const CandidateRecord& c) {
  return {{"ratio", c.ratio}, {"p_bar", c.p_bar}, {"p_mem", c.p_mem}, {"decision", c.decision ? 1 : 0}};
}

CandidateRecord candidate_from_json(const Json& j) {
  CandidateRecord c;
  c.ratio = j.at("ratio").get<double>();
  c.p_bar = j.at("p_bar").get<double>();
  c.p_mem = j.at("p_mem").get<std::vector<double>>();
  c.decision = j.at("decision").get<int>() != 0;
  return c;
}

}  // namespace

Json to_json(const RunReport& r) {
  Json kernels = Json::array();
  for (const auto& k : r.kernels) {
    kernels.push_back({{"id", k.id},
                       {"epsilon", k.epsilon},
                       {"gamma_phi", k.gamma_phi},
                       {"gamma_q", k.gamma_q},
                       {"initial_loss", k.initial_loss},
                       {"final_loss", k.final_loss}});
  }
  Json rounds = Json::array();
  for (const auto& rr : r.rounds) {
    Json pos = Json::array();
    for (const auto& p : rr.positives) pos.push_back(candidate_json(p));
    rounds.push_back({{"round", rr.round}, {"negative", candidate_json(rr.negative)}, {"positives", pos}});
  }
  Json metrics = Json::array();
  for (const auto& m : r.metrics) {
    Json row = summary_json(m.summary);
    row["ratio"] = m.ratio;
    row["decision_accuracy"] = m.decision_accuracy;
    row["mean_p_bar"] = m.mean_p_bar;
    metrics.push_back(row);
  }
  Json j = {
      {"schema", "dmia.run_report"},
      {"version", kReportSchemaVersion},
      {"tool_version", kToolVersion},
      {"config", to_json(r.config)},
      {"effective", {{"train_batch", r.train_batch}, {"detect_batch", r.detect_batch}}},
      {"tau",
       {{"configured", r.config.tau},
        {"calibrated", r.tau_calibrated ? Json(*r.tau_calibrated) : Json(nullptr)},
        {"used", r.tau_used}}},
      {"calibration",
       {{"pool_rows", r.config.calibration_rounds > 0 ? r.config.calibration_pool_size : 0},
        {"positive_source", "student-generated"},
        {"positive_p_bar", r.calibration_positive},
        {"negative_p_bar", r.calibration_negative}}},
      {"kernels", kernels},
      {"rounds", rounds},
      {"metrics", metrics},
      {"baseline",
       {{"score", "min squared distance to generated samples"},
        {"queries_per_class", r.config.baseline_queries},
        {"teacher", summary_json(r.baseline_teacher)},
        {"student", summary_json(r.baseline_student)}}},
      {"histograms", histograms_json(r)},
      {"conventions",
       {{"bandwidth", kBandwidthConvention},
        {"metrics", kMetricConvention},
        {"training_loss", "minimize mmd2_u(anchor, proxy) - mmd2_u(anchor, non-member)"},
        {"noise", "fresh per training epoch; once per pool per detection call"}}},
      {"partial", r.partial},
      {"error_kind", r.error_kind},
      {"error", r.error},
  };
  return j;
}

RunReport run_report_from_json(const Json& j) {
  check_schema(j, "dmia.run_report", kReportSchemaVersion);
  RunReport r;
  try {
    r.config = experiment_config_from_json(j.at("config"));
    r.train_batch = j.at("effective").at("train_batch").get<Index>();
    r.detect_batch = j.at("effective").at("detect_batch").get<Index>();
    r.tau_used = j.at("tau").at("used").get<double>();
    if (!j.at("tau").at("calibrated").is_null()) {
      r.tau_calibrated = j.at("tau").at("calibrated").get<double>();
    }
    r.calibration_positive = j.at("calibration").at("positive_p_bar").get<std::vector<double>>();
    r.calibration_negative = j.at("calibration").at("negative_p_bar").get<std::vector<double>>();
    for (const auto& k : j.at("kernels")) {
      r.kernels.push_back(KernelSummary{k.at("id").get<int>(), k.at("epsilon").get<double>(),
                                        k.at("gamma_phi").get<double>(), k.at("gamma_q").get<double>(),
                                        k.at("initial_loss").get<double>(),
                                        k.at("final_loss").get<double>()});
    }
    for (const auto& rj : j.at("rounds")) {
      RoundRecord rr;
      rr.round = rj.at("round").get<int>();
      rr.negative = candidate_from_json(rj.at("negative"));
      for (const auto& p : rj.at("positives")) rr.positives.push_back(candidate_from_json(p));
      r.rounds.push_back(std::move(rr));
    }
    for (const auto& mj : j.at("metrics")) {
      RatioMetrics m;
      m.ratio = mj.at("ratio").get<double>();
      m.summary = summary_from_json(mj);
      m.decision_accuracy = mj.at("decision_accuracy").get<double>();
      m.mean_p_bar = mj.at("mean_p_bar").get<double>();
      r.metrics.push_back(m);
    }
    r.baseline_teacher = summary_from_json(j.at("baseline").at("teacher"));
    r.baseline_student = summary_from_json(j.at("baseline").at("student"));
    r.partial = j.at("partial").get<bool>();
    r.error_kind = j.at("error_kind").get<std::string>();
    r.error = j.at("error").get<std::string>();
  } catch (const Json::exception& e) {
    throw DataError(DataErrorCode::kSchema, std::string("run report: ") + e.what());
  }
  return r;
}

std::string metrics_csv(const RunReport& r) {
  std::ostringstream out;
  out << "ratio,asr,auc,tpr_at_fpr_0.05,decision_accuracy,mean_p_bar\n";
  char buf[256];
  for (const auto& m : r.metrics) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", m.ratio,
                  m.summary.asr, m.summary.auc, m.summary.tpr_at_fpr05, m.decision_accuracy,
                  m.mean_p_bar);
    out << buf;
  }
  return out.str();
}

Json histograms_json(const RunReport& r, int bins) {
  auto hist_json = [&](const std::vector<double>& values) {
    const Histogram h = histogram(values, bins, 0.0, 1.0);
    return Json{{"lo", h.lo}, {"hi", h.hi}, {"bins", bins}, {"counts", h.counts}};
  };
  Json out = Json::array();
  std::vector<double> neg;
  for (const auto& rr : r.rounds) neg.push_back(rr.negative.p_bar);
  out.push_back({{"label", "negative"}, {"ratio", 0.0}, {"p_bar", hist_json(neg)}});
  for (std::size_t i = 0; i < r.config.ratios.size(); ++i) {
    std::vector<double> vals;
    for (const auto& rr : r.rounds) {
      if (i < rr.positives.size()) vals.push_back(rr.positives[i].p_bar);
    }
    out.push_back({{"label", "positive"}, {"ratio", r.config.ratios[i]}, {"p_bar", hist_json(vals)}});
  }
  return out;
}

}  // namespace dmia
