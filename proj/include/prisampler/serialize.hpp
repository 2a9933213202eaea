#ifndef PRISAMPLER_SERIALIZE_HPP
#define PRISAMPLER_SERIALIZE_HPP

#include <Eigen/Dense>
#include <json.hpp>
#include <string>

#include "prisampler/continuous2d.hpp"
#include "prisampler/defense.hpp"
#include "prisampler/mlp.hpp"
#include "prisampler/schedule.hpp"
#include "prisampler/tabular.hpp"

namespace prisampler {

using Json = nlohmann::json;

// Key lookup that reports the enclosing object on failure, so parse errors
// from nested documents name the field path instead of a bare key.
const Json& require_key(const Json& j, const std::string& key,
                        const std::string& what);
double require_double(const Json& j, const std::string& key,
                      const std::string& what);
int require_int(const Json& j, const std::string& key, const std::string& what);
std::string require_string(const Json& j, const std::string& key,
                           const std::string& what);
double optional_double(const Json& j, const std::string& key, double fallback);
int optional_int(const Json& j, const std::string& key, int fallback);
bool optional_bool(const Json& j, const std::string& key, bool fallback);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& what);
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& what);

std::string schedule_kind_name(ScheduleKind kind);
ScheduleKind schedule_kind_from_name(const std::string& name);
std::string sampler_kind_name(SamplerKind kind);
SamplerKind sampler_kind_from_name(const std::string& name);

Json to_json(const NoiseSchedule& schedule);
NoiseSchedule schedule_from_json(const Json& j);

Json to_json(const Mlp& mlp);
Mlp mlp_from_json(const Json& j);

Json to_json(const DenoiserNet& net);
DenoiserNet denoiser_from_json(const Json& j);

Json to_json(const TabularSchema& schema);
TabularSchema schema_from_json(const Json& j);

Json to_json(const TabularCodec& codec);
TabularCodec codec_from_json(const Json& j);

// Model documents carry a "kind" tag ("tabddpm" or "continuous") so a loader
// pointed at the wrong artifact fails loudly instead of misreading fields.
Json to_json(const TabularModel& model);
TabularModel tabular_model_from_json(const Json& j);

Json to_json(const ContinuousModel& model);
ContinuousModel continuous_model_from_json(const Json& j);

Json to_json(const Hyperplane& plane);
Hyperplane hyperplane_from_json(const Json& j);

void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

// FNV-1a over the raw bytes, printed as 16 hex digits. Used for manifest
// identity and artifact provenance, not for anything adversarial.
std::string fnv1a_hex(const std::string& bytes);
std::string hash_file(const std::string& path);

}  // namespace prisampler

#endif  // PRISAMPLER_SERIALIZE_HPP
