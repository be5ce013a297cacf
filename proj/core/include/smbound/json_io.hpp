#pragma once

#include "smbound/predictor.hpp"

#include <string>

namespace smbound {

// Library version with the git description of the source tree at configure time.
const char* version_string();

// Model document: flavor, method, o, m, q, theta1 per channel, envelopes, alpha, gamma,
// noise bound, lambda and tau series, stability certificates. Doubles round-trip exactly.
std::string model_to_json(const IdentifiedModel& model, int indent = 2);
IdentifiedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const IdentifiedModel& model);
IdentifiedModel load_model(const std::string& path);

}  // namespace smbound
