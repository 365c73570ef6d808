#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <filesystem>
#include <limits>
#include <string>

#include "dmia/dataset_io.h"
#include "dmia/errors.h"
#include "dmia/experiment.h"
#include "dmia/rng.h"
#include "dmia/serialize.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace dmia {
namespace {

namespace fs = std::filesystem;

DataErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no DataError thrown";
  return DataErrorCode::kIo;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dmia_io_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Hand-built f32bin bytes, independent of the writer.
std::string f32bin_bytes(std::uint32_t version, std::uint32_t rows, std::uint32_t cols,
                         const std::vector<float>& values) {
  std::string s = "DMIA";
  auto put = [&s](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(version);
  put(rows);
  put(cols);
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put(bits);
  }
  return s;
}

TEST(CsvTest, TwoByTwoExample) {
  const Matrix m = parse_csv("f0,f1\n0,1\n2,3");
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 2);
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_EQ(m(0, 1), 1.0);
  EXPECT_EQ(m(1, 0), 2.0);
  EXPECT_EQ(m(1, 1), 3.0);
}

TEST(CsvTest, TrailingNewlineAndCrlfAccepted) {
  const Matrix a = parse_csv("f0,f1\r\n0.5,-1e-3\r\n");
  ASSERT_EQ(a.rows(), 1);
  EXPECT_EQ(a(0, 1), -1e-3);
}

TEST(CsvTest, WriterHeader) {
  Matrix m(1, 3);
  m << 1, 2, 3;
  EXPECT_EQ(to_csv(m).substr(0, 9), "f0,f1,f2\n");
}

TEST(CsvTest, ErrorCodes) {
  EXPECT_EQ(code_of([] { parse_csv(""); }), DataErrorCode::kMalformedHeader);
  EXPECT_EQ(code_of([] { parse_csv("a,b\n1,2"); }), DataErrorCode::kMalformedHeader);
  EXPECT_EQ(code_of([] { parse_csv("f0,f2\n1,2"); }), DataErrorCode::kMalformedHeader);
  EXPECT_EQ(code_of([] { parse_csv("f0,f1\n1,2\n3"); }), DataErrorCode::kRaggedRow);
  EXPECT_EQ(code_of([] { parse_csv("f0,f1\n1,2,3"); }), DataErrorCode::kRaggedRow);
  EXPECT_EQ(code_of([] { parse_csv("f0,f1\n1,x"); }), DataErrorCode::kBadNumber);
  EXPECT_EQ(code_of([] { parse_csv("f0,f1\n1,2.5abc"); }), DataErrorCode::kBadNumber);
  EXPECT_EQ(code_of([] { parse_csv("f0,f1\n1,"); }), DataErrorCode::kBadNumber);
  EXPECT_EQ(code_of([] { parse_csv("f0,f1\n1,nan"); }), DataErrorCode::kBadNumber);
}

TEST(F32BinTest, ParsesHandBuiltBytes) {
  const Matrix m = parse_f32bin(f32bin_bytes(1, 2, 3, {0.f, 1.f, 2.f, 3.5f, -4.f, 0.25f}));
  ASSERT_EQ(m.rows(), 2);
  ASSERT_EQ(m.cols(), 3);
  EXPECT_EQ(m(0, 2), 2.0);
  EXPECT_EQ(m(1, 0), 3.5);
  EXPECT_EQ(m(1, 1), -4.0);
  EXPECT_EQ(m(1, 2), 0.25);
}

TEST(F32BinTest, WriterMatchesHandBuiltBytes) {
  Matrix m(2, 2);
  m << 1.5, -2, 0, 1e-3;
  EXPECT_EQ(to_f32bin(m), f32bin_bytes(1, 2, 2, {1.5f, -2.f, 0.f, 1e-3f}));
}

TEST(F32BinTest, ErrorCodes) {
  const std::string good = f32bin_bytes(1, 2, 2, {1, 2, 3, 4});
  EXPECT_EQ(code_of([&] { parse_f32bin(good.substr(0, good.size() - 1)); }),
            DataErrorCode::kTruncated);
  EXPECT_EQ(code_of([&] { parse_f32bin(good.substr(0, 10)); }), DataErrorCode::kTruncated);
  EXPECT_EQ(code_of([&] { parse_f32bin(good + "x"); }), DataErrorCode::kTruncated);
  EXPECT_EQ(code_of([&] { parse_f32bin("DMIB" + good.substr(4)); }),
            DataErrorCode::kMagicMismatch);
  EXPECT_EQ(code_of([&] { parse_f32bin(""); }), DataErrorCode::kMagicMismatch);
  EXPECT_EQ(code_of([] { parse_f32bin(f32bin_bytes(2, 2, 2, {1, 2, 3, 4})); }),
            DataErrorCode::kUnsupportedVersion);
  const float inf = std::numeric_limits<float>::infinity();
  EXPECT_EQ(code_of([&] { parse_f32bin(f32bin_bytes(1, 1, 2, {1, inf})); }),
            DataErrorCode::kBadNumber);
}

TEST(DatasetFileTest, RoundTripBothFormats) {
  const fs::path dir = temp_dir("roundtrip");
  RngStream rng(1);
  // Values exactly representable in f32 so both formats are lossless.
  Matrix m = oracle::random_matrix(37, 5, rng, 3.0);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
  for (DatasetFormat f : {DatasetFormat::kCsv, DatasetFormat::kF32Bin}) {
    const fs::path p = dir / ("m" + std::string(format_extension(f)));
    save_dataset(p, m, f);
    const Matrix back = load_dataset(p, f);
    ASSERT_EQ(back.rows(), m.rows());
    ASSERT_EQ(back.cols(), m.cols());
    EXPECT_TRUE((back.array() == m.array()).all()) << format_name(f);
  }
  // CSV keeps full double precision.
  const Matrix d = oracle::random_matrix(9, 3, rng);
  save_dataset(dir / "d.csv", d, DatasetFormat::kCsv);
  EXPECT_TRUE((load_dataset(dir / "d.csv", DatasetFormat::kCsv).array() == d.array()).all());
  fs::remove_all(dir);
}

TEST(DatasetFileTest, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] { load_dataset("/nonexistent/x.csv", DatasetFormat::kCsv); }),
            DataErrorCode::kIo);
}

TEST(DatasetFileTest, FormatNames) {
  EXPECT_EQ(parse_format("csv"), DatasetFormat::kCsv);
  EXPECT_EQ(parse_format("f32bin"), DatasetFormat::kF32Bin);
  EXPECT_FALSE(parse_format("npy").has_value());
}

// ---------------------------------------------------------------------------
// JSON documents.

TEST(KernelJsonTest, RoundTripIsBitExact) {
  RngStream rng(2);
  KernelBundle b;
  b.kernel.net = FeatureNet::glorot(NetShape{4, 7, 3, 5}, rng);
  b.kernel.epsilon = 0.1 / 3.0;
  b.kernel.gamma_phi = std::sqrt(2.0);
  b.kernel.gamma_q = 1.0 / 7.0;
  b.anchor = oracle::random_matrix(6, 4, rng);
  b.encoder = Encoder::random_projection(4, 4, rng);
  const KernelBundle back = kernel_from_json(Json::parse(kernel_to_json(b).dump()));
  EXPECT_EQ(back.kernel.epsilon, b.kernel.epsilon);
  EXPECT_EQ(back.kernel.gamma_phi, b.kernel.gamma_phi);
  EXPECT_EQ(back.kernel.gamma_q, b.kernel.gamma_q);
  ASSERT_EQ(back.kernel.net.layers().size(), b.kernel.net.layers().size());
  for (std::size_t l = 0; l < b.kernel.net.layers().size(); ++l) {
    EXPECT_TRUE((back.kernel.net.layers()[l].weight.array() ==
                 b.kernel.net.layers()[l].weight.array()).all());
    EXPECT_TRUE((back.kernel.net.layers()[l].bias.array() ==
                 b.kernel.net.layers()[l].bias.array()).all());
  }
  ASSERT_TRUE(back.anchor.has_value());
  EXPECT_TRUE((back.anchor->array() == b.anchor->array()).all());
  ASSERT_TRUE(back.encoder.has_value());
  EXPECT_TRUE((back.encoder->matrix()->array() == b.encoder->matrix()->array()).all());
}

TEST(KernelJsonTest, UnknownVersionRejected) {
  RngStream rng(3);
  KernelBundle b;
  b.kernel.net = FeatureNet::glorot(NetShape{2, 3, 1, 2}, rng);
  Json j = kernel_to_json(b);
  j["version"] = kKernelSchemaVersion + 1;
  EXPECT_EQ(code_of([&] { kernel_from_json(j); }), DataErrorCode::kUnsupportedVersion);
  j.erase("schema");
  EXPECT_EQ(code_of([&] { kernel_from_json(j); }), DataErrorCode::kSchema);
}

TEST(ConfigJsonTest, ExperimentConfigRoundTrip) {
  ExperimentConfig c = default_experiment_config(42);
  c.ratios = {0.0, 0.25, 1.0};
  c.train.learning_rate = 3e-4;
  c.detect.trials = 17;
  c.world.nonmember_shift = 0.75;
  const ExperimentConfig back = experiment_config_from_json(Json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.seed, 42u);
  EXPECT_EQ(back.ratios, c.ratios);
}

TEST(ConfigJsonTest, UnknownKeyRejected) {
  Json j = to_json(default_experiment_config());
  j["roundz"] = 3;
  EXPECT_THROW(experiment_config_from_json(j), DataError);
  Json t = to_json(TrainConfig{});
  t["lr"] = 0.1;
  EXPECT_THROW(train_config_from_json(t), DataError);
}

TEST(ConfigJsonTest, MissingKeysKeepDefaults) {
  const TrainConfig t = train_config_from_json(Json::parse(R"({"epochs": 7})"));
  EXPECT_EQ(t.epochs, 7);
  EXPECT_EQ(t.batch_size, TrainConfig{}.batch_size);
}

// ---------------------------------------------------------------------------
// Experiment runner smoke test.

ExperimentConfig tiny_config() {
  ExperimentConfig c = default_experiment_config(3);
  c.world.dim = 4;
  c.world.n_member = 400;
  c.world.n_teacher_gen = 400;
  c.world.n_student_gen = 400;
  c.world.n_nonmember = 400;
  c.world.n_nonmember_holdout = 400;
  c.train.epochs = 20;
  c.train.batch_size = 32;
  c.train.generated_pool = 128;
  c.train.hidden_dim = 8;
  c.detect.trials = 10;
  c.detect.batch_size = 32;
  c.ensemble_size = 1;
  c.rounds = 1;
  c.calibration_rounds = 2;
  c.candidate_size = 60;
  c.nonmember_train_size = 100;
  c.nonmember_detect_size = 100;
  c.calibration_pool_size = 100;
  c.baseline_queries = 100;
  return c;
}

TEST(RunExperimentTest, TinyRunEmitsValidReport) {
  const auto start = std::chrono::steady_clock::now();
  const RunReport r = run_experiment(tiny_config());
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 10.0);
  EXPECT_FALSE(r.partial) << r.error;
  ASSERT_EQ(r.rounds.size(), 1u);
  ASSERT_EQ(r.kernels.size(), 1u);
  ASSERT_EQ(r.metrics.size(), r.config.ratios.size());

  const Json j = to_json(r);
  EXPECT_EQ(j.at("schema"), "dmia.run_report");
  EXPECT_EQ(j.at("version"), kReportSchemaVersion);
  EXPECT_FALSE(j.contains("wall_clock_seconds"));
  const RunReport back = run_report_from_json(Json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());

  // Every stored metric is recomputable from the rounds.
  for (std::size_t k = 0; k < r.metrics.size(); ++k) {
    const RatioMetrics m = ratio_metrics(back, k);
    EXPECT_EQ(m.summary.auc, r.metrics[k].summary.auc);
    EXPECT_EQ(m.summary.asr, r.metrics[k].summary.asr);
    EXPECT_EQ(m.mean_p_bar, r.metrics[k].mean_p_bar);
  }
  const std::string header = "ratio,asr,auc,tpr_at_fpr_0.05,decision_accuracy,mean_p_bar\n";
  EXPECT_EQ(metrics_csv(r).substr(0, header.size()), header);
}

TEST(RunExperimentTest, FutureReportVersionRejected) {
  Json j = to_json(RunReport{});
  j["version"] = kReportSchemaVersion + 1;
  EXPECT_THROW(run_report_from_json(j), DataError);
}

TEST(RunExperimentTest, InvalidConfigRejected) {
  ExperimentConfig c = tiny_config();
  c.rounds = 0;
  EXPECT_THROW(c.validate(), ContractError);
  c = tiny_config();
  c.candidate_size = 5000;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(RunExperimentTest, FailureYieldsPartialReport) {
  ExperimentConfig c = tiny_config();
  c.train.batch_size = 90;  // larger than half the training pool allows
  c.nonmember_train_size = 100;
  c.train.generated_pool = 8;
  const RunReport r = run_experiment(c);
  EXPECT_TRUE(r.partial);
  EXPECT_FALSE(r.error_kind.empty());
  EXPECT_FALSE(r.error.empty());
}

}  // namespace
}  // namespace dmia
