#include "dmia/serialize.h"

#include <set>
#include <string>

#include "dmia/errors.h"
#include "dmia/metrics.h"

namespace dmia {

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw DataError(DataErrorCode::kSchema, std::string(what) + " must be an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw DataError(DataErrorCode::kSchema, std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw DataError(DataErrorCode::kSchema, std::string(key) + ": " + e.what());
  }
}

Json layers_to_json(const LayerStack& layers) {
  Json arr = Json::array();
  for (const auto& l : layers) {
    Json bias = Json::array();
    for (Index i = 0; i < l.bias.size(); ++i) bias.push_back(l.bias(i));
    arr.push_back({{"weight", matrix_to_json(l.weight)}, {"bias", bias}});
  }
  return arr;
}

}  // namespace

void check_schema(const Json& j, const char* schema, int max_version) {
  if (!j.is_object() || !j.contains("schema") || j.at("schema") != schema) {
    throw DataError(DataErrorCode::kSchema, std::string("expected a '") + schema + "' document");
  }
  if (!j.contains("version") || !j.at("version").is_number_integer()) {
    throw DataError(DataErrorCode::kSchema, "missing integer 'version'");
  }
  const int v = j.at("version").get<int>();
  if (v < 1 || v > max_version) {
    throw DataError(DataErrorCode::kUnsupportedVersion,
                    std::string(schema) + " version " + std::to_string(v));
  }
}

Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (Index i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from_json(const Json& j) {
  try {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || !data.is_array() ||
        static_cast<Index>(data.size()) != rows * cols) {
      throw DataError(DataErrorCode::kSchema, "matrix data length != rows * cols");
    }
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
    return m;
  } catch (const Json::exception& e) {
    throw DataError(DataErrorCode::kSchema, std::string("matrix: ") + e.what());
  }
}

Json encoder_to_json(const Encoder& e) {
  if (e.mode() == Encoder::Mode::kIdentity) return {{"mode", "identity"}, {"dim", e.in_dim()}};
  return {{"mode", "projection"}, {"matrix", matrix_to_json(*e.matrix())}};
}

Encoder encoder_from_json(const Json& j) {
  const std::string mode = j.value("mode", "");
  if (mode == "identity") return Encoder::identity(j.at("dim").get<Index>());
  if (mode == "projection") return Encoder::projection(matrix_from_json(j.at("matrix")));
  throw DataError(DataErrorCode::kSchema, "encoder: unknown mode '" + mode + "'");
}

Json kernel_to_json(const KernelBundle& b) {
  const auto& k = b.kernel;
  const auto& s = k.net.shape();
  Json j = {
      {"schema", "dmia.kernel"},
      {"version", kKernelSchemaVersion},
      {"net",
       {{"in_dim", s.in_dim},
        {"hidden_dim", s.hidden_dim},
        {"depth", s.depth},
        {"out_dim", s.out_dim},
        {"activation", "softplus"},
        {"output_activation", "identity"},
        {"layers", layers_to_json(k.net.layers())}}},
      {"epsilon", k.epsilon},
      {"gamma_phi", k.gamma_phi},
      {"gamma_q", k.gamma_q},
      {"bandwidth_convention", kBandwidthConvention},
  };
  if (b.anchor) j["anchor"] = matrix_to_json(*b.anchor);
  if (b.encoder) j["encoder"] = encoder_to_json(*b.encoder);
  return j;
}

KernelBundle kernel_from_json(const Json& j) {
  check_schema(j, "dmia.kernel", kKernelSchemaVersion);
  try {
    const auto& net = j.at("net");
    if (net.at("activation") != "softplus") {
      throw DataError(DataErrorCode::kSchema, "unsupported activation");
    }
    NetShape shape{net.at("in_dim").get<Index>(), net.at("hidden_dim").get<Index>(),
                   net.at("depth").get<int>(), net.at("out_dim").get<Index>()};
    LayerStack layers;
    for (const auto& lj : net.at("layers")) {
      Layer l;
      l.weight = matrix_from_json(lj.at("weight"));
      const auto bias = lj.at("bias").get<std::vector<double>>();
      l.bias = RowVector(static_cast<Index>(bias.size()));
      for (std::size_t i = 0; i < bias.size(); ++i) l.bias(static_cast<Index>(i)) = bias[i];
      layers.push_back(std::move(l));
    }
    KernelBundle b;
    b.kernel.net = FeatureNet(shape, std::move(layers));
    b.kernel.epsilon = j.at("epsilon").get<double>();
    b.kernel.gamma_phi = j.at("gamma_phi").get<double>();
    b.kernel.gamma_q = j.at("gamma_q").get<double>();
    b.kernel.validate();
    if (j.contains("anchor")) b.anchor = matrix_from_json(j.at("anchor"));
    if (j.contains("encoder")) b.encoder = encoder_from_json(j.at("encoder"));
    return b;
  } catch (const Json::exception& e) {
    throw DataError(DataErrorCode::kSchema, std::string("kernel: ") + e.what());
  } catch (const ContractError& e) {
    throw DataError(DataErrorCode::kSchema, std::string("kernel: ") + e.what());
  }
}

Json to_json(const TrainConfig& c) {
  Json j = {{"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"noise_std", c.noise_std},
            {"generated_pool", c.generated_pool},
            {"hidden_dim", c.hidden_dim},
            {"depth", c.depth},
            {"out_dim", c.out_dim},
            {"epsilon", c.epsilon},
            {"train_epsilon", c.train_epsilon},
            {"lambda", c.lambda},
            {"objective", c.objective == Objective::kDifference ? "difference" : "normalized"}};
  j["gamma_phi"] = c.gamma_phi ? Json(*c.gamma_phi) : Json("median");
  j["gamma_q"] = c.gamma_q ? Json(*c.gamma_q) : Json("median");
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"epochs", "learning_rate", "batch_size", "noise_std", "generated_pool",
                  "hidden_dim", "depth", "out_dim", "epsilon", "train_epsilon", "lambda",
                  "objective", "gamma_phi", "gamma_q"},
                 "train");
  TrainConfig c;
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "noise_std", c.noise_std);
  read_opt(j, "generated_pool", c.generated_pool);
  read_opt(j, "hidden_dim", c.hidden_dim);
  read_opt(j, "depth", c.depth);
  read_opt(j, "out_dim", c.out_dim);
  read_opt(j, "epsilon", c.epsilon);
  read_opt(j, "train_epsilon", c.train_epsilon);
  read_opt(j, "lambda", c.lambda);
  if (j.contains("objective")) {
    const auto o = j.at("objective").get<std::string>();
    if (o == "difference") {
      c.objective = Objective::kDifference;
    } else if (o == "normalized") {
      c.objective = Objective::kNormalizedDifference;
    } else {
      throw DataError(DataErrorCode::kSchema, "train.objective: '" + o + "'");
    }
  }
  for (auto [key, slot] : {std::pair{"gamma_phi", &c.gamma_phi}, std::pair{"gamma_q", &c.gamma_q}}) {
    if (!j.contains(key)) continue;
    const auto& v = j.at(key);
    if (v.is_string() && v == "median") {
      slot->reset();
    } else if (v.is_number()) {
      *slot = v.get<double>();
    } else {
      throw DataError(DataErrorCode::kSchema, std::string("train.") + key + ": number or \"median\"");
    }
  }
  return c;
}

Json to_json(const DetectConfig& c) {
  return {{"trials", c.trials},
          {"batch_size", c.batch_size},
          {"noise_std", c.noise_std},
          {"max_cached_rows", c.max_cached_rows}};
}

DetectConfig detect_config_from_json(const Json& j) {
  reject_unknown(j, {"trials", "batch_size", "noise_std", "max_cached_rows"}, "detect");
  DetectConfig c;
  read_opt(j, "trials", c.trials);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "noise_std", c.noise_std);
  read_opt(j, "max_cached_rows", c.max_cached_rows);
  return c;
}

Json to_json(const WorldSpec& s) {
  return {{"dim", s.dim},
          {"member_components", s.member_components},
          {"mean_spread", s.mean_spread},
          {"cov_scale", s.cov_scale},
          {"nonmember_shift", s.nonmember_shift},
          {"teacher_components", s.teacher_components},
          {"n_member", s.n_member},
          {"n_teacher_gen", s.n_teacher_gen},
          {"student_components", s.student_components},
          {"n_student_gen", s.n_student_gen},
          {"n_nonmember", s.n_nonmember},
          {"n_nonmember_holdout", s.n_nonmember_holdout},
          {"teacher_memorization", s.teacher_memorization},
          {"memorization_jitter", s.memorization_jitter},
          {"encoder_dim", s.encoder_dim},
          {"seed", s.seed}};
}

WorldSpec world_spec_from_json(const Json& j) {
  reject_unknown(j,
                 {"dim", "member_components", "mean_spread", "cov_scale", "nonmember_shift",
                  "teacher_components", "n_member", "n_teacher_gen", "student_components",
                  "n_student_gen", "n_nonmember", "n_nonmember_holdout", "teacher_memorization",
                  "memorization_jitter", "encoder_dim", "seed"},
                 "world");
  WorldSpec s;
  read_opt(j, "dim", s.dim);
  read_opt(j, "member_components", s.member_components);
  read_opt(j, "mean_spread", s.mean_spread);
  read_opt(j, "cov_scale", s.cov_scale);
  read_opt(j, "nonmember_shift", s.nonmember_shift);
  read_opt(j, "teacher_components", s.teacher_components);
  read_opt(j, "n_member", s.n_member);
  read_opt(j, "n_teacher_gen", s.n_teacher_gen);
  read_opt(j, "student_components", s.student_components);
  read_opt(j, "n_student_gen", s.n_student_gen);
  read_opt(j, "n_nonmember", s.n_nonmember);
  read_opt(j, "n_nonmember_holdout", s.n_nonmember_holdout);
  read_opt(j, "teacher_memorization", s.teacher_memorization);
  read_opt(j, "memorization_jitter", s.memorization_jitter);
  read_opt(j, "encoder_dim", s.encoder_dim);
  read_opt(j, "seed", s.seed);
  return s;
}

Json to_json(const DetectionReport& r) {
  Json ind = Json::array();
  for (auto v : r.indicators) ind.push_back(static_cast<int>(v));
  return {{"schema", "dmia.detection"}, {"version", kReportSchemaVersion},
          {"kernel_id", r.kernel_id},   {"p_mem", r.p_mem},
          {"trials", r.indicators.size()}, {"indicators", ind},
          {"m1", r.m1},                 {"m2", r.m2}};
}

Json to_json(const EnsembleReport& r) {
  Json members = Json::array();
  for (const auto& m : r.members) members.push_back(to_json(m));
  return {{"schema", "dmia.ensemble"},
          {"version", kReportSchemaVersion},
          {"p_bar", r.p_bar},
          {"tau", r.tau},
          {"decision", r.decision ? 1 : 0},
          {"members", members},
          {"conventions",
           {{"bandwidth", kBandwidthConvention},
            {"indicator", "1 iff mmd2_u(candidate, anchor) < mmd2_u(non-member, anchor)"},
            {"decision", "1 iff p_bar >= tau"}}}};
}

}  // namespace dmia
