// Copyright 2026 The qbreak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON forms of the library's value types. Field names are stable and
// documented in docs/report-schema.md.
#ifndef QBREAK_SERIALIZE_HPP_
#define QBREAK_SERIALIZE_HPP_

#include <nlohmann/json.hpp>

#include "qbreak/breaktests.hpp"
#include "qbreak/ivx.hpp"
#include "qbreak/linalg.hpp"
#include "qbreak/qrsolve.hpp"
#include "qbreak/tsgen.hpp"

namespace qbreak {

nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j);
// Array of rows.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PersistenceSpec& spec);
PersistenceSpec persistence_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const InnovationSpec& spec);
InnovationSpec innovation_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BreakScenario& scenario);
BreakScenario break_scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Sample& sample);
Sample sample_from_json(const nlohmann::json& j);
nlohmann::json to_json(const IvxConfig& config);
IvxConfig ivx_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const QrFit& fit);
nlohmann::json to_json(const IvxFit& fit);
nlohmann::json to_json(const WaldResult& wald);
nlohmann::json to_json(const LambdaGrid& grid);
nlohmann::json to_json(const BreakTestResult& result);

}  // namespace qbreak

#endif  // QBREAK_SERIALIZE_HPP_
