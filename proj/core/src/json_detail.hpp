#pragma once

// nlohmann::json conversions shared by the library sources; not installed.

#include "smbound/errorbounds.hpp"
#include "smbound/json_io.hpp"

#include <json.hpp>

#include <string>

namespace smbound::detail {

using json = nlohmann::ordered_json;

json vector_value(const Vector& v);
Vector vector_from(const json& j);
json matrix_value(const Matrix& m);  // array of rows

json envelope_value(const DecayEnvelope& e);
DecayEnvelope envelope_from(const json& j);
json lambda_value(const LambdaSeries& s);
LambdaSeries lambda_from(const json& j);
json certificate_value(const StabilityCertificate& c);
StabilityCertificate certificate_from(const json& j);
json tau_value(const TauSeries& t);

json model_value(const IdentifiedModel& m);
IdentifiedModel model_from(const json& j);

void write_json(const std::string& path, const json& j);
json read_json(const std::string& path);

}  // namespace smbound::detail
