#ifndef DMIA_SERIALIZE_H_
#define DMIA_SERIALIZE_H_

#include <nlohmann/json.hpp>
#include <optional>

#include "dmia/dmia.h"
#include "dmia/encoder.h"
#include "dmia/kernels.h"
#include "dmia/world.h"

namespace dmia {

using Json = nlohmann::json;

inline constexpr int kKernelSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "dmia 1.0.0";

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

// Trained kernel document: network, epsilon, bandwidths and optionally the
// anchor batch and encoder needed to run detection later.
struct KernelBundle {
  DeepKernel kernel;
  std::optional<Matrix> anchor;
  std::optional<Encoder> encoder;
};

Json kernel_to_json(const KernelBundle& bundle);
KernelBundle kernel_from_json(const Json& j);

Json encoder_to_json(const Encoder& e);
Encoder encoder_from_json(const Json& j);

Json to_json(const TrainConfig& c);
Json to_json(const DetectConfig& c);
Json to_json(const WorldSpec& s);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const Json& j);
DetectConfig detect_config_from_json(const Json& j);
WorldSpec world_spec_from_json(const Json& j);

Json to_json(const DetectionReport& r);
Json to_json(const EnsembleReport& r);

// Throws DataError(kSchema / kUnsupportedVersion) when `j` is not a document
// of the given schema and a supported version.
void check_schema(const Json& j, const char* schema, int max_version);

}  // namespace dmia

#endif  // DMIA_SERIALIZE_H_
