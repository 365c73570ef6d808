#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "cli.h"
#include "dmia/dataset_io.h"
#include "dmia/experiment.h"
#include "dmia/serialize.h"
#include "dmia/world.h"
#include "gtest/gtest.h"

namespace dmia::cli {
namespace {

namespace fs = std::filesystem;

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "dmia");
  return cli_main(args);
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dmia_cli_test_" + std::string(
                ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write_json_file(const std::string& name, const Json& j) const {
    write_file(dir_ / name, j.dump(2));
  }

  // Reference world with 1000-row pools.
  void simulate(const std::string& format = "csv") {
    WorldSpec s = reference_world_spec(4);
    s.n_member = s.n_teacher_gen = s.n_student_gen = s.n_nonmember = s.n_nonmember_holdout = 1000;
    write_json_file("world_spec.json", to_json(s));
    ASSERT_EQ(run({"simulate", "--config", path("world_spec.json"), "--out", path("world"),
                   "--format", format}),
              kExitOk);
  }

  static ExperimentConfig tiny_experiment() {
    ExperimentConfig c = default_experiment_config(9);
    c.world.dim = 4;
    c.world.n_member = c.world.n_teacher_gen = c.world.n_student_gen = 400;
    c.world.n_nonmember = c.world.n_nonmember_holdout = 400;
    c.train.epochs = 20;
    c.train.batch_size = 32;
    c.train.generated_pool = 128;
    c.train.hidden_dim = 8;
    c.detect.trials = 10;
    c.detect.batch_size = 32;
    c.ensemble_size = 2;
    c.rounds = 3;
    c.calibration_rounds = 2;
    c.candidate_size = 60;
    c.nonmember_train_size = c.nonmember_detect_size = c.calibration_pool_size = 100;
    c.baseline_queries = 100;
    return c;
  }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"simulate", "--bogus"}), kExitUsage);
  EXPECT_EQ(run({"frobnicate"}), kExitUsage);
  EXPECT_EQ(run({"simulate", "--format", "npy"}), kExitUsage);
  EXPECT_EQ(run({"detect", "--candidate", "x.csv"}), kExitUsage);
  EXPECT_EQ(run({"--help"}), kExitOk);
}

TEST_F(CliTest, DataErrors) {
  write_file(dir_ / "bad.csv", "f0,f1\n1,2\n3\n");
  write_file(dir_ / "good.csv", "f0,f1\n1,2\n3,4\n");
  EXPECT_EQ(run({"train-kernel", "--nonmember", path("bad.csv"), "--student", path("good.csv"),
                 "--out", path("k")}),
            kExitData);
  EXPECT_EQ(run({"train-kernel", "--nonmember", path("missing.csv"), "--student",
                 path("good.csv"), "--out", path("k")}),
            kExitData);
  write_file(dir_ / "bad.json", "{not json");
  EXPECT_EQ(run({"experiment", "--config", path("bad.json"), "--out", path("e")}), kExitData);
  write_json_file("unknown.json", {{"no_such_key", 1}});
  EXPECT_EQ(run({"experiment", "--config", path("unknown.json"), "--out", path("e")}), kExitData);
  // Too few rows for the default batch size is a contract violation.
  EXPECT_EQ(run({"train-kernel", "--nonmember", path("good.csv"), "--student", path("good.csv"),
                 "--out", path("k")}),
            kExitData);
}

TEST_F(CliTest, SimulateWritesBothFormats) {
  simulate("f32bin");
  for (const char* name :
       {"member", "nonmember", "nonmember_holdout", "teacher_gen", "student_gen"}) {
    const Matrix m = load_dataset(path("world/") + name + ".f32bin", DatasetFormat::kF32Bin);
    EXPECT_EQ(m.rows(), 1000) << name;
    EXPECT_EQ(m.cols(), 8) << name;
  }
  EXPECT_TRUE(fs::exists(path("world/world.json")));
}

TEST_F(CliTest, PureMemberCandidateDetectedEndToEnd) {
  simulate();
  ASSERT_EQ(run({"train-kernel", "--nonmember", path("world/nonmember.csv"), "--student",
                 path("world/student_gen.csv"), "--encoder", path("world/world.json"), "--seed",
                 "1", "--out", path("kernel")}),
            kExitOk);
  EXPECT_TRUE(fs::exists(path("kernel/loss_history.csv")));
  ASSERT_EQ(run({"detect", "--kernel", path("kernel/kernel.json"), "--candidate",
                 path("world/member.csv"), "--nonmember", path("world/nonmember_holdout.csv"),
                 "--seed", "2", "--out", path("det")}),
            kExitOk);
  const Json det = Json::parse(read_file(path("det/detection.json")));
  EXPECT_GE(det.at("p_mem").get<double>(), 0.9);

  ASSERT_EQ(run({"ensemble", "--kernel", path("kernel/kernel.json"), "--kernel",
                 path("kernel/kernel.json"), "--candidate", path("world/member.csv"),
                 "--nonmember", path("world/nonmember_holdout.csv"), "--out", path("ens")}),
            kExitOk);
  const Json ens = Json::parse(read_file(path("ens/ensemble.json")));
  EXPECT_GE(ens.at("p_bar").get<double>(), 0.9);
  EXPECT_EQ(ens.at("decision"), 1);
}

TEST_F(CliTest, EnsembleTrainsItsOwnKernels) {
  simulate();
  write_json_file("ens.json", {{"train", {{"epochs", 30}, {"batch_size", 64}}}, {"h", 2}});
  ASSERT_EQ(run({"ensemble", "--config", path("ens.json"), "--student",
                 path("world/student_gen.csv"), "--candidate", path("world/student_gen.csv"),
                 "--nonmember", path("world/nonmember.csv"), "--out", path("ens")}),
            kExitOk);
  EXPECT_TRUE(fs::exists(path("ens/kernel_0.json")));
  EXPECT_TRUE(fs::exists(path("ens/kernel_1.json")));
  const Json ens = Json::parse(read_file(path("ens/ensemble.json")));
  EXPECT_EQ(ens.at("members").size(), 2u);
}

TEST_F(CliTest, ExperimentIsByteReproducible) {
  write_json_file("exp.json", to_json(tiny_experiment()));
  ASSERT_EQ(run({"experiment", "--config", path("exp.json"), "--seed", "5", "--out", path("a"),
                 "--threads", "1"}),
            kExitOk);
  ASSERT_EQ(run({"experiment", "--config", path("exp.json"), "--seed", "5", "--out", path("b"),
                 "--threads", "1"}),
            kExitOk);
  ASSERT_EQ(run({"experiment", "--config", path("exp.json"), "--seed", "5", "--out", path("c"),
                 "--threads", "3"}),
            kExitOk);
  const std::string a = read_file(path("a/report.json"));
  EXPECT_EQ(a, read_file(path("b/report.json")));
  EXPECT_EQ(a, read_file(path("c/report.json")));
  EXPECT_EQ(read_file(path("a/metrics.csv")), read_file(path("c/metrics.csv")));
  EXPECT_EQ(Json::parse(a).at("config").at("seed"), 5);
  EXPECT_TRUE(fs::exists(path("a/histograms.json")));
  EXPECT_TRUE(fs::exists(path("a/timing.json")));

  ASSERT_EQ(run({"report", "--input", path("a/report.json"), "--input", path("c/report.json"),
                 "--out", path("r"), "--bins", "10"}),
            kExitOk);
  const std::string csv = read_file(path("r/metrics.csv"));
  EXPECT_EQ(csv.substr(0, 7), "report,");
  // Header plus one row per ratio and report.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 4);
}

TEST_F(CliTest, ReportRejectsFutureVersion) {
  Json j = to_json(RunReport{});
  j["version"] = kReportSchemaVersion + 1;
  write_json_file("future.json", j);
  EXPECT_EQ(run({"report", "--input", path("future.json"), "--out", path("r")}), kExitData);
}

}  // namespace
}  // namespace dmia::cli
